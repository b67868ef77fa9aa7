#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "segadv/image.hpp"
#include "segadv/segnet/model.hpp"

namespace segadv::segnet {

struct Sample {
  Image image;
  LabelMask mask;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  double learning_rate = 0.05;
  std::uint64_t seed = 7;
  // Optional per-class loss weights (length N). Empty means uniform.
  std::vector<double> class_weights;
};

struct TrainResult {
  SegModel model;
  std::vector<double> epoch_losses;  // mean per-sample loss of each epoch
};

// Produces the adversarial counterpart of a training sample against the
// current parameters.
using AdversaryFn = std::function<Image(const SegModel&, const Sample&)>;

// Plain minibatch SGD on the full-resolution cross-entropy. Deterministic
// given the seed.
TrainResult train(SegModel model, std::span<const Sample> data, const TrainConfig& config);

// As train(), but in every batch the first round(mix_ratio * batch) samples
// are replaced by adversary(current model, sample) with the clean labels.
TrainResult adversarial_train(SegModel model, std::span<const Sample> data, const TrainConfig& config,
                              const AdversaryFn& adversary, double mix_ratio);

// Inverse-square-root class frequency weights, normalised to mean 1 over the
// classes present.
std::vector<double> balanced_class_weights(std::span<const Sample> data, std::size_t num_classes);

}  // namespace segadv::segnet
