#include "segadv/segnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "segadv/error.hpp"

namespace segadv::segnet {
namespace {

void validate_dataset(const SegModel& model, std::span<const Sample> data) {
  if (data.empty()) throw UsageError("training dataset is empty");
  const Architecture& arch = model.architecture();
  for (const Sample& s : data) {
    if (s.image.height != arch.height || s.image.width != arch.width || s.image.channels != arch.channels) {
      throw ShapeError("training image geometry does not match the model");
    }
    if (s.mask.height != arch.height || s.mask.width != arch.width) {
      throw ShapeError("training mask geometry does not match the model");
    }
    validate_mask(s.mask, model.num_classes());
  }
}

std::optional<std::vector<double>> pixel_weights_for(const LabelMask& mask, const std::vector<double>& class_weights) {
  if (class_weights.empty()) return std::nullopt;
  std::vector<double> w(mask.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = class_weights[static_cast<std::size_t>(mask.classes[i])];
  return w;
}

TrainResult run_training(SegModel model, std::span<const Sample> data, const TrainConfig& config,
                         const AdversaryFn* adversary, double mix_ratio) {
  validate_dataset(model, data);
  if (config.batch_size == 0) throw UsageError("batch size must be positive");
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw UsageError("mix ratio must lie in [0, 1]");
  if (!config.class_weights.empty() && config.class_weights.size() != model.num_classes()) {
    throw UsageError("class weight count does not match the number of classes");
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{model, {}};
  SegModel& current = result.model;
  auto& params = current.mutable_parameters();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t batch = end - start;
      const auto n_adv = adversary ? static_cast<std::size_t>(std::llround(mix_ratio * static_cast<double>(batch)))
                                   : std::size_t{0};

      std::vector<std::vector<double>> grads(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) grads[i].assign(params[i].size(), 0.0);

      for (std::size_t b = 0; b < batch; ++b) {
        const Sample& sample = data[order[start + b]];
        const Tensor input = b < n_adv ? to_tensor((*adversary)(current, sample)) : to_tensor(sample.image);
        Tape tape;
        Graph g = build_graph(current, tape, input, false, true);
        const auto weights = pixel_weights_for(sample.mask, config.class_weights);
        std::optional<std::span<const double>> wspan;
        if (weights) wspan = std::span<const double>(*weights);
        Var loss = tensor::softmax_cross_entropy(g.logits, sample.mask.classes, wspan);
        tape.backward(loss);
        epoch_loss += loss.value().item();
        for (std::size_t i = 0; i < params.size(); ++i) {
          auto gi = tape.grad_of(g.params[i].id());
          for (std::size_t j = 0; j < gi.size(); ++j) grads[i][j] += gi[j];
        }
      }

      const double step = config.learning_rate / static_cast<double>(batch);
      if (step != 0.0) {
        for (std::size_t i = 0; i < params.size(); ++i) {
          auto pv = params[i].values();
          for (std::size_t j = 0; j < pv.size(); ++j) pv[j] -= step * grads[i][j];
        }
      }
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1));
    }
    result.epoch_losses.push_back(epoch_loss);
  }
  return result;
}

}  // namespace

TrainResult train(SegModel model, std::span<const Sample> data, const TrainConfig& config) {
  return run_training(std::move(model), data, config, nullptr, 0.0);
}

TrainResult adversarial_train(SegModel model, std::span<const Sample> data, const TrainConfig& config,
                              const AdversaryFn& adversary, double mix_ratio) {
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw UsageError("mix ratio must lie in [0, 1]");
  if (mix_ratio == 0.0 || !adversary) return run_training(std::move(model), data, config, nullptr, 0.0);
  return run_training(std::move(model), data, config, &adversary, mix_ratio);
}

std::vector<double> balanced_class_weights(std::span<const Sample> data, std::size_t num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  for (const Sample& s : data) {
    for (int c : s.mask.classes) counts.at(static_cast<std::size_t>(c)) += 1.0;
  }
  std::vector<double> weights(num_classes, 0.0);
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] > 0) {
      weights[c] = 1.0 / std::sqrt(counts[c]);
      total += weights[c];
      ++present;
    }
  }
  if (present == 0) throw UsageError("cannot balance an empty dataset");
  for (double& w : weights) w *= static_cast<double>(present) / total;
  return weights;
}

}  // namespace segadv::segnet
