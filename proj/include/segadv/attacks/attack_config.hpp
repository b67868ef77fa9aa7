#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "segadv/segnet/model.hpp"
#include "segadv/tensor/tensor.hpp"

namespace segadv::attacks {

enum class Norm { kInf, kL2 };

// kAscend increases the loss of the current labels (untargeted), kDescend
// decreases the loss of a target labelling (targeted).
enum class Direction { kAscend, kDescend };

std::string_view to_string(Norm norm);
Norm parse_norm(std::string_view text);

// Step size and budget are in gray-value units.
struct AttackConfig {
  double lambda = 1.0;
  double epsilon = 8.0;
  Norm norm = Norm::kInf;
  std::optional<std::size_t> iterations;
  Direction direction = Direction::kAscend;
  std::uint64_t seed = 0;
  // Loss granularity for the untargeted single-step attack.
  segnet::LossMode mode = segnet::LossMode::kSegmentation;

  // Throws UsageError on lambda <= 0, lambda > 255, epsilon < lambda (l_inf)
  // or an explicit zero iteration count.
  void validate() const;
};

// floor(min(epsilon + 4, 1.25 * epsilon))
std::size_t iteration_budget(double epsilon);
std::size_t resolved_iterations(const AttackConfig& config);

double norm_of(const tensor::Tensor& values, Norm norm);

struct Perturbation {
  tensor::Tensor values;  // H x W x C
  Norm norm = Norm::kInf;
  double epsilon = 0.0;

  double magnitude() const { return norm_of(values, norm); }
  bool within_budget(double slack = 1e-9) const { return magnitude() <= epsilon + slack; }
};

}  // namespace segadv::attacks
