#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "segadv/attacks/attack_config.hpp"
#include "segadv/image.hpp"
#include "segadv/segnet/model.hpp"

namespace segadv::attacks {

// Euclidean projection onto the epsilon ball: elementwise clamp for l_inf,
// radial rescale for l2.
tensor::Tensor project_to_ball(tensor::Tensor values, Norm norm, double epsilon);

// clip_quantize(image + perturbation)
Image apply_perturbation(const Image& image, const tensor::Tensor& perturbation);
// As above; for l_inf the result is also held to the integer ball of radius
// floor(epsilon) and recorded in the budget audit.
Image apply_perturbation(const Image& image, const Perturbation& perturbation);

// Seeded i.i.d. uniform noise in [-epsilon, epsilon].
Perturbation random_uniform_perturbation(const tensor::Shape& shape, double epsilon, std::uint64_t seed);

struct UapConfig {
  double epsilon = 10.0;
  Norm norm = Norm::kInf;
  std::size_t passes = 5;
  std::size_t deepfool_iters = 50;
  double overshoot = 0.02;
};

struct UapResult {
  Perturbation perturbation;
  double fooled_fraction_train = 0.0;
  double fooled_fraction_holdout = 0.0;
  std::vector<double> pass_fooling;  // training fooling rate after each pass
};

// For every training image the current perturbation does not fool yet, adds
// the minimal perturbation of (image + r) and projects back onto the ball.
// Images are visited in the given order. Stops early once every training
// image is fooled. Throws UsageError on an empty training set or when the
// two sets share an image.
UapResult craft_uap(const segnet::SegModel& model, std::span<const Image> train, std::span<const Image> holdout,
                    const UapConfig& config);

// Guard added to each squared feature norm before the log.
inline constexpr double kFeatureNormGuard = 1e-12;

// -sum_l log ||f_l||_2 over the given feature maps.
double fff_objective(std::span<const tensor::Tensor> taps);

struct FffConfig {
  double epsilon = 10.0;
  std::size_t steps = 100;
  double step_size = 2000.0;
  std::uint64_t seed = 0;
};

struct FffResult {
  Perturbation perturbation;
  std::vector<double> loss_trace;  // objective at the start and after every step
};

// Data-free universal perturbation: projected gradient descent on
// fff_objective of the network's taps, evaluating the network on
// 128 + r so the probe stays in the valid gray range. Starts from seeded
// uniform noise in the l_inf ball. Throws NumericalError if every tap is zero
// at the start.
FffResult fff_uap(const segnet::SegModel& model, const FffConfig& config);

}  // namespace segadv::attacks
