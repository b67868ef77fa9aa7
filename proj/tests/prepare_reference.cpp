#include <cstdio>

#include "test_support.hpp"

int main() {
  const auto& model = segadv::testing::reference_model();
  std::printf("reference model ready: %zu parameters\n", model.parameter_count());
  return 0;
}
