#include "segadv/attacks/minimal_attacks.hpp"

#include <cmath>
#include <limits>

#include "segadv/error.hpp"

namespace segadv::attacks {
namespace {

using tensor::Tensor;

// Keeps a step of exactly zero length from stalling on the boundary itself.
constexpr double kBoundaryFloor = 1e-9;

Tensor shifted(const Tensor& x, const Tensor& r, double scale) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * r[i];
  return out;
}

double squared_norm(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.values()) acc += v * v;
  return acc;
}

}  // namespace

MinimalPerturbationResult minimal_perturbation(const DifferentiableClassifier& classifier, const Tensor& input,
                                               std::size_t max_iters, double overshoot) {
  if (overshoot < 0.0) throw UsageError("overshoot must be non-negative");
  MinimalPerturbationResult result;
  result.raw = Tensor(input.shape());
  result.original_label = classifier.label(input);
  const auto k0 = static_cast<std::size_t>(result.original_label);

  Tensor point = input;
  for (;;) {
    ClassJacobian jac = classifier.jacobian(point);
    const int label = segnet::argmax(jac.logits);
    result.final_label = label;
    if (label != result.original_label) {
      result.success = true;
      break;
    }
    if (result.iterations == max_iters) break;

    double best_ratio = std::numeric_limits<double>::infinity();
    std::size_t best = k0;
    Tensor best_w;
    double best_f = 0.0, best_w2 = 0.0;
    for (std::size_t k = 0; k < jac.logits.size(); ++k) {
      if (k == k0) continue;
      Tensor w = jac.gradients[k];
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= jac.gradients[k0][i];
      const double w2 = squared_norm(w);
      if (w2 == 0.0) continue;
      const double f = jac.logits[k] - jac.logits[k0];
      const double ratio = std::abs(f) / std::sqrt(w2);
      if (ratio < best_ratio) {
        best_ratio = ratio;
        best = k;
        best_w = std::move(w);
        best_f = f;
        best_w2 = w2;
      }
    }
    if (best == k0) break;  // flat in every direction

    const double scale = (std::abs(best_f) + kBoundaryFloor) / best_w2;
    for (std::size_t i = 0; i < result.raw.size(); ++i) result.raw[i] += scale * best_w[i];
    ++result.iterations;
    point = shifted(input, result.raw, 1.0 + overshoot);
  }

  Tensor applied = result.raw;
  for (double& v : applied.values()) v *= 1.0 + overshoot;
  const double magnitude = norm_of(applied, Norm::kL2);
  result.perturbation = Perturbation{std::move(applied), Norm::kL2, magnitude};
  return result;
}

CwResult cw_attack(const DifferentiableClassifier& classifier, const Tensor& input, const CwOptions& options) {
  if (!(options.c > 0.0)) throw UsageError("C&W constant c must be positive");
  if (!(options.step_size > 0.0)) throw UsageError("C&W step size must be positive");
  const std::size_t n = classifier.num_classes();
  CwResult result;
  result.original_label = options.clean_label.value_or(classifier.label(input));
  if (result.original_label < 0 || static_cast<std::size_t>(result.original_label) >= n) {
    throw UsageError("C&W clean label outside the class range");
  }
  const auto k0 = static_cast<std::size_t>(result.original_label);

  Tensor r(input.shape());
  std::optional<Tensor> best;
  double best_norm2 = std::numeric_limits<double>::infinity();

  for (std::size_t step = 0;; ++step) {
    const Tensor point = shifted(input, r, 1.0);
    const std::vector<double> z = classifier.logits(point);
    const int label = segnet::argmax(z);
    const double norm2 = squared_norm(r);
    if (label != result.original_label && norm2 < best_norm2) {
      best = r;
      best_norm2 = norm2;
      result.final_label = label;
    }
    if (step == options.steps) break;

    std::size_t rival = k0 == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != k0 && z[j] > z[rival]) rival = j;
    }
    Tensor grad = r;
    for (double& v : grad.values()) v *= 2.0;
    if (n > 1 && z[k0] - z[rival] > 0.0) {
      std::vector<double> coeffs(n, 0.0);
      coeffs[k0] = 1.0;
      coeffs[rival] = -1.0;
      const Tensor g = classifier.combination_gradient(point, coeffs);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += options.c * g[i];
    }
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= options.step_size * grad[i];
  }

  if (best) {
    result.success = true;
    r = std::move(*best);
  } else {
    result.final_label = classifier.label(shifted(input, r, 1.0));
  }
  const double magnitude = norm_of(r, Norm::kL2);
  result.perturbation = Perturbation{std::move(r), Norm::kL2, magnitude};
  return result;
}

}  // namespace segadv::attacks
