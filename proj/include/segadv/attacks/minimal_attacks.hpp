#pragma once

#include <cstddef>
#include <optional>

#include "segadv/attacks/attack_config.hpp"
#include "segadv/attacks/classifier.hpp"

namespace segadv::attacks {

inline constexpr double kDefaultOvershoot = 0.02;

struct MinimalPerturbationResult {
  Perturbation perturbation;  // (1 + overshoot) * raw, l2
  tensor::Tensor raw;         // accumulated linearised steps, before overshoot
  bool success = false;       // label at input + perturbation differs from the clean label
  std::size_t iterations = 0;
  int original_label = 0;
  int final_label = 0;
};

// Iterative linearisation: each step moves to the nearest linearised decision
// boundary over all other classes (ties to the smallest class index) and the
// loop ends once the label at input + (1 + overshoot) * raw changes. Gradients
// are evaluated at the overshot point.
MinimalPerturbationResult minimal_perturbation(const DifferentiableClassifier& classifier,
                                               const tensor::Tensor& input, std::size_t max_iters,
                                               double overshoot = kDefaultOvershoot);

struct CwOptions {
  double c = 1.0;
  std::size_t steps = 200;
  double step_size = 0.1;
  // Label to move away from; defaults to the classifier's label at the input.
  std::optional<int> clean_label;
};

struct CwResult {
  Perturbation perturbation;  // l2; best successful iterate, or the last one on failure
  bool success = false;
  int original_label = 0;
  int final_label = 0;
};

// Gradient descent on ||r||^2 + c * max(z_clean - max_{j != clean} z_j, 0).
CwResult cw_attack(const DifferentiableClassifier& classifier, const tensor::Tensor& input, const CwOptions& options);

}  // namespace segadv::attacks
