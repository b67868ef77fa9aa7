#include "segadv/attacks/universal.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "segadv/attacks/budget_audit.hpp"
#include "segadv/attacks/classifier.hpp"
#include "segadv/attacks/minimal_attacks.hpp"
#include "segadv/error.hpp"
#include "segadv/metrics/metrics.hpp"

namespace segadv::attacks {

using tensor::Tensor;
using tensor::Var;

Tensor project_to_ball(Tensor values, Norm norm, double epsilon) {
  if (norm == Norm::kInf) {
    for (double& v : values.values()) v = std::clamp(v, -epsilon, epsilon);
  } else {
    const double n = norm_of(values, Norm::kL2);
    if (n > epsilon) {
      const double scale = epsilon / n;
      for (double& v : values.values()) v *= scale;
    }
  }
  return values;
}

Image apply_perturbation(const Image& image, const Tensor& perturbation) {
  Tensor x = to_tensor(image);
  if (perturbation.shape() != x.shape()) {
    throw ShapeError("perturbation " + tensor::to_string(perturbation.shape()) + " does not fit image " +
                     tensor::to_string(x.shape()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += perturbation[i];
  return clip_quantize(x);
}

Image apply_perturbation(const Image& image, const Perturbation& perturbation) {
  Image out = apply_perturbation(image, perturbation.values);
  if (perturbation.norm == Norm::kInf) {
    out = project_linf(out, image, perturbation.epsilon);
    record_budget_check(image, out, perturbation.epsilon);
  }
  return out;
}

Perturbation random_uniform_perturbation(const tensor::Shape& shape, double epsilon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-epsilon, epsilon);
  Tensor values(shape);
  for (double& v : values.values()) v = uniform(rng);
  return Perturbation{std::move(values), Norm::kInf, epsilon};
}

UapResult craft_uap(const segnet::SegModel& model, std::span<const Image> train, std::span<const Image> holdout,
                    const UapConfig& config) {
  if (train.empty()) throw UsageError("UAP crafting needs a non-empty training set");
  if (!(config.epsilon > 0.0)) throw UsageError("UAP budget epsilon must be positive");
  for (const Image& t : train) {
    for (const Image& v : holdout) {
      if (t == v) throw UsageError("UAP training and holdout sets must be disjoint");
    }
  }
  const SegModelClassifier classifier(model);
  const Tensor first = to_tensor(train.front());
  model.check_input(first);

  std::vector<int> clean_labels;
  for (const Image& image : train) clean_labels.push_back(segnet::classify(model, to_tensor(image)).label);

  Tensor r(first.shape());
  UapResult result;
  for (std::size_t pass = 0; pass < config.passes; ++pass) {
    for (std::size_t i = 0; i < train.size(); ++i) {
      const Tensor perturbed = to_tensor(apply_perturbation(train[i], r));
      if (segnet::classify(model, perturbed).label != clean_labels[i]) continue;
      Tensor shifted = to_tensor(train[i]);
      for (std::size_t j = 0; j < shifted.size(); ++j) shifted[j] += r[j];
      const auto step = minimal_perturbation(classifier, shifted, config.deepfool_iters, config.overshoot);
      if (!step.success) continue;
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += step.perturbation.values[j];
      r = project_to_ball(std::move(r), config.norm, config.epsilon);
    }
    result.pass_fooling.push_back(metrics::fooling_rate(model, train, r));
    if (result.pass_fooling.back() == 1.0) break;
  }
  result.fooled_fraction_train = result.pass_fooling.empty() ? 0.0 : result.pass_fooling.back();
  result.fooled_fraction_holdout = holdout.empty() ? 0.0 : metrics::fooling_rate(model, holdout, r);
  result.perturbation = Perturbation{std::move(r), config.norm, config.epsilon};
  return result;
}

double fff_objective(std::span<const Tensor> taps) {
  double j = 0.0;
  for (const Tensor& t : taps) {
    double sq = kFeatureNormGuard;
    for (double v : t.values()) sq += v * v;
    j -= 0.5 * std::log(sq);
  }
  return j;
}

namespace {

struct FffStep {
  double objective = 0.0;
  Tensor gradient;
  bool all_dead = false;
};

FffStep fff_step(const segnet::SegModel& model, const Tensor& r) {
  Tensor probe = r;
  for (double& v : probe.values()) v += 128.0;
  tensor::Tape tape;
  segnet::Graph g = segnet::build_graph(model, tape, probe, true, false);
  FffStep out;
  out.all_dead = true;
  Var total;
  for (const Var& tap : g.taps) {
    for (double v : tap.value().values()) {
      if (v != 0.0) {
        out.all_dead = false;
        break;
      }
    }
    Var term = tensor::affine(tensor::log_l2_norm(tap, kFeatureNormGuard), -1.0, 0.0);
    total = total.valid() ? tensor::add(total, term) : term;
  }
  tape.backward(total);
  out.objective = total.value().item();
  out.gradient = tape.grad(g.image);
  return out;
}

}  // namespace

FffResult fff_uap(const segnet::SegModel& model, const FffConfig& config) {
  if (!(config.epsilon > 0.0)) throw UsageError("FFF budget epsilon must be positive");
  if (!(config.step_size > 0.0)) throw UsageError("FFF step size must be positive");
  const segnet::Architecture& arch = model.architecture();
  Tensor r = random_uniform_perturbation({arch.height, arch.width, arch.channels}, config.epsilon, config.seed).values;

  FffResult result;
  FffStep step = fff_step(model, r);
  if (step.all_dead) {
    throw NumericalError("FFF: every feature tap is zero at the initial perturbation; the network is dead");
  }
  result.loss_trace.push_back(step.objective);
  for (std::size_t s = 0; s < config.steps; ++s) {
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= config.step_size * step.gradient[i];
    r = project_to_ball(std::move(r), Norm::kInf, config.epsilon);
    step = fff_step(model, r);
    result.loss_trace.push_back(step.objective);
  }
  result.perturbation = Perturbation{std::move(r), Norm::kInf, config.epsilon};
  return result;
}

}  // namespace segadv::attacks
