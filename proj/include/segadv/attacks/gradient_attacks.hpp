#pragma once

#include <optional>
#include <vector>

#include "segadv/attacks/attack_config.hpp"
#include "segadv/image.hpp"
#include "segadv/segnet/model.hpp"
#include "segadv/segnet/train.hpp"

namespace segadv::attacks {

struct AttackResult {
  Image adversarial;
  Perturbation perturbation;       // adversarial - clean, in gray levels
  std::vector<double> loss_trace;  // objective at every iterate, including the last
};

// Untargeted single step x + lambda * sign(grad J). The labels default to the
// model's own clean prediction. sign(0) = 0.
AttackResult fgsm(const segnet::SegModel& model, const Image& image, const AttackConfig& config,
                  const std::optional<LabelMask>& labels = std::nullopt);

// Single targeted step x - lambda * sign(grad J(least-likely mask)).
AttackResult llcm(const segnet::SegModel& model, const Image& image, const AttackConfig& config);

struct AttackTarget {
  enum class Kind { kOwnPrediction, kLeastLikely, kMask };
  Kind kind = Kind::kOwnPrediction;
  LabelMask mask;

  static AttackTarget own_prediction() { return {}; }
  static AttackTarget least_likely() { return {Kind::kLeastLikely, {}}; }
  static AttackTarget fixed(LabelMask m) { return {Kind::kMask, std::move(m)}; }
};

// Iterated signed-gradient steps on a real-valued working image, each
// followed by projection onto the l_inf ball of radius epsilon and the valid
// gray range; quantized once at the end. The target labelling is fixed from
// the clean image. Without an explicit count the budget is
// floor(min(eps + 4, 1.25 eps)).
AttackResult iterative_attack(const segnet::SegModel& model, const Image& image, const AttackConfig& config,
                              const AttackTarget& target);

// Targeted descent toward a fake mask borrowed from another scene.
AttackResult ssmm_attack(const segnet::SegModel& model, const Image& image, const LabelMask& fake_mask,
                         const AttackConfig& config);

struct DnnmResult {
  AttackResult attack;
  LabelMask target;
};

// Removes `objective_class` from the predicted mask by targeted descent
// toward the nearest-neighbour filled mask.
DnnmResult dnnm_attack(const segnet::SegModel& model, const Image& image, int objective_class,
                       const AttackConfig& config);

// FGSM against the current parameters with the sample's ground truth, for
// segnet::adversarial_train. epsilon = 0 returns the clean image.
segnet::AdversaryFn fgsm_adversary(double epsilon);

}  // namespace segadv::attacks
