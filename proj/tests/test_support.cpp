#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "segadv/attacks/budget_audit.hpp"
#include "segadv/harness/reference.hpp"

namespace segadv::testing {

tensor::Tensor random_tensor(const tensor::Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  tensor::Tensor t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

Image random_image(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng) {
  Image img(h, w, c);
  std::uniform_int_distribution<int> u(0, 255);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(u(rng));
  return img;
}

LabelMask random_mask(std::size_t h, std::size_t w, int num_classes, std::mt19937_64& rng) {
  LabelMask m(h, w);
  std::uniform_int_distribution<int> u(0, num_classes - 1);
  for (int& c : m.classes) c = u(rng);
  return m;
}

double central_difference(const std::function<double(const tensor::Tensor&)>& f, const tensor::Tensor& x,
                          std::size_t i, double h) {
  tensor::Tensor plus = x, minus = x;
  plus[i] += h;
  minus[i] -= h;
  return (f(plus) - f(minus)) / (2.0 * h);
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

const harness::Dataset& reference_data() {
  static const harness::Dataset data = harness::generate_in_memory(harness::reference_dataset_spec());
  return data;
}

const segnet::SegModel& reference_model() {
  static const segnet::SegModel model = harness::load_or_train_reference(SEGADV_CACHE_DIR, reference_data());
  return model;
}

namespace {

// Every adversarial image produced anywhere in a test binary must respect
// its l_inf budget.
class BudgetAuditEnvironment : public ::testing::Environment {
 public:
  void TearDown() override {
    const auto audit = attacks::budget_audit();
    EXPECT_EQ(audit.violations, 0u) << "l_inf budget violations across " << audit.checks << " attack outputs";
  }
};

[[maybe_unused]] const auto* const kAuditEnvironment =
    ::testing::AddGlobalTestEnvironment(new BudgetAuditEnvironment);

}  // namespace

}  // namespace segadv::testing
