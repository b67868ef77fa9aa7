#include "segadv/attacks/gradient_attacks.hpp"

#include <algorithm>
#include <cmath>

#include "segadv/attacks/budget_audit.hpp"
#include "segadv/attacks/targets.hpp"
#include "segadv/error.hpp"

namespace segadv::attacks {
namespace {

using segnet::LossSpec;
using tensor::Tensor;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_geometry(const segnet::SegModel& model, const Image& image) { model.check_input(to_tensor(image)); }

LossSpec segmentation_loss(LabelMask target) { return LossSpec::segmentation(std::move(target)); }

AttackResult finish(const Image& clean, const Tensor& working, const AttackConfig& config,
                    std::vector<double> trace) {
  AttackResult result;
  result.adversarial = project_linf(clip_quantize(working), clean, config.epsilon);
  record_budget_check(clean, result.adversarial, config.epsilon);
  result.perturbation = Perturbation{difference(result.adversarial, clean), Norm::kInf, config.epsilon};
  result.loss_trace = std::move(trace);
  return result;
}

AttackResult signed_step(const segnet::SegModel& model, const Image& image, const AttackConfig& config,
                         const LossSpec& spec, double direction) {
  const Tensor x = to_tensor(image);
  auto lg = segnet::loss_and_input_gradient(model, x, spec);
  Tensor stepped = x;
  for (std::size_t i = 0; i < stepped.size(); ++i) stepped[i] += direction * config.lambda * sign(lg.gradient[i]);
  AttackResult result = finish(image, stepped, config, {lg.loss});
  result.loss_trace.push_back(segnet::loss_value(model, to_tensor(result.adversarial), spec));
  return result;
}

}  // namespace

AttackResult fgsm(const segnet::SegModel& model, const Image& image, const AttackConfig& config,
                  const std::optional<LabelMask>& labels) {
  config.validate();
  if (config.direction != Direction::kAscend) throw UsageError("FGSM ascends the loss; direction must be ascend");
  check_geometry(model, image);
  const Tensor x = to_tensor(image);
  LossSpec spec;
  if (config.mode == segnet::LossMode::kClassification) {
    spec = LossSpec::classification(segnet::classify(model, x).label);
  } else {
    spec = segmentation_loss(labels ? *labels : segnet::predict_mask(model, x));
  }
  return signed_step(model, image, config, spec, +1.0);
}

AttackResult llcm(const segnet::SegModel& model, const Image& image, const AttackConfig& config) {
  config.validate();
  check_geometry(model, image);
  const LabelMask target = least_likely_targets(segnet::scores(model, to_tensor(image)));
  return signed_step(model, image, config, segmentation_loss(target), -1.0);
}

AttackResult iterative_attack(const segnet::SegModel& model, const Image& image, const AttackConfig& config,
                              const AttackTarget& target) {
  config.validate();
  if (config.norm != Norm::kInf) throw UsageError("iterative signed-gradient attacks use the l_inf budget");
  check_geometry(model, image);
  const Tensor x = to_tensor(image);

  LabelMask labels;
  switch (target.kind) {
    case AttackTarget::Kind::kOwnPrediction:
      if (config.direction != Direction::kAscend) {
        throw UsageError("descending toward the model's own prediction is not an attack; give a target mask");
      }
      labels = segnet::predict_mask(model, x);
      break;
    case AttackTarget::Kind::kLeastLikely:
      if (config.direction != Direction::kDescend) throw UsageError("least-likely targets require direction descend");
      labels = least_likely_targets(segnet::scores(model, x));
      break;
    case AttackTarget::Kind::kMask:
      labels = target.mask;
      break;
  }
  const LossSpec spec = segmentation_loss(std::move(labels));
  const double direction = config.direction == Direction::kAscend ? 1.0 : -1.0;
  const std::size_t iterations = resolved_iterations(config);

  Tensor working = x;
  std::vector<double> trace;
  for (std::size_t it = 0; it < iterations; ++it) {
    auto lg = segnet::loss_and_input_gradient(model, working, spec);
    trace.push_back(lg.loss);
    for (std::size_t i = 0; i < working.size(); ++i) {
      const double stepped = working[i] + direction * config.lambda * sign(lg.gradient[i]);
      const double lo = std::max(0.0, x[i] - config.epsilon);
      const double hi = std::min(255.0, x[i] + config.epsilon);
      working[i] = std::clamp(stepped, lo, hi);
    }
  }
  trace.push_back(segnet::loss_value(model, working, spec));
  return finish(image, working, config, std::move(trace));
}

AttackResult ssmm_attack(const segnet::SegModel& model, const Image& image, const LabelMask& fake_mask,
                         const AttackConfig& config) {
  if (config.direction != Direction::kDescend) throw UsageError("SSMM descends toward the fake mask");
  if (fake_mask.height != image.height || fake_mask.width != image.width) {
    throw ShapeError("SSMM fake mask geometry does not match the image");
  }
  return iterative_attack(model, image, config, AttackTarget::fixed(fake_mask));
}

DnnmResult dnnm_attack(const segnet::SegModel& model, const Image& image, int objective_class,
                       const AttackConfig& config) {
  config.validate();
  check_geometry(model, image);
  const LabelMask clean = segnet::predict_mask(model, to_tensor(image));
  if (std::find(clean.classes.begin(), clean.classes.end(), objective_class) == clean.classes.end()) {
    const double loss = segnet::loss_value(model, to_tensor(image), segmentation_loss(clean));
    AttackResult unchanged{image, Perturbation{Tensor({image.height, image.width, image.channels}), Norm::kInf,
                                               config.epsilon},
                           {loss}};
    return DnnmResult{std::move(unchanged), clean};
  }
  LabelMask target = build_dnnm_target(clean, objective_class);
  AttackConfig descend = config;
  descend.direction = Direction::kDescend;
  AttackResult attack = iterative_attack(model, image, descend, AttackTarget::fixed(target));
  return DnnmResult{std::move(attack), std::move(target)};
}

segnet::AdversaryFn fgsm_adversary(double epsilon) {
  return [epsilon](const segnet::SegModel& model, const segnet::Sample& sample) -> Image {
    if (epsilon == 0.0) return sample.image;
    AttackConfig cfg;
    cfg.lambda = epsilon;
    cfg.epsilon = epsilon;
    return fgsm(model, sample.image, cfg, sample.mask).adversarial;
  };
}

}  // namespace segadv::attacks
