#include "segadv/attacks/attack_config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "segadv/error.hpp"

namespace segadv::attacks {

std::string_view to_string(Norm norm) { return norm == Norm::kInf ? "inf" : "2"; }

Norm parse_norm(std::string_view text) {
  if (text == "inf" || text == "linf") return Norm::kInf;
  if (text == "2" || text == "l2") return Norm::kL2;
  throw UsageError("unknown norm \"" + std::string(text) + "\" (expected inf or 2)");
}

void AttackConfig::validate() const {
  if (!(lambda > 0.0)) throw UsageError("attack step size lambda must be positive");
  if (lambda > 255.0) throw UsageError("attack step size lambda > 255 is degenerate");
  if (!(epsilon >= 0.0)) throw UsageError("attack budget epsilon must be non-negative");
  if (norm == Norm::kInf && epsilon < lambda) throw UsageError("l_inf attacks need epsilon >= lambda");
  if (iterations && *iterations == 0) throw UsageError("explicit iteration count must be at least 1");
}

std::size_t iteration_budget(double epsilon) {
  return static_cast<std::size_t>(std::floor(std::min(epsilon + 4.0, 1.25 * epsilon)));
}

std::size_t resolved_iterations(const AttackConfig& config) {
  return config.iterations.value_or(std::max<std::size_t>(1, iteration_budget(config.epsilon)));
}

double norm_of(const tensor::Tensor& values, Norm norm) {
  double acc = 0.0;
  for (double v : values.values()) {
    if (norm == Norm::kInf) {
      acc = std::max(acc, std::abs(v));
    } else {
      acc += v * v;
    }
  }
  return norm == Norm::kInf ? acc : std::sqrt(acc);
}

}  // namespace segadv::attacks
