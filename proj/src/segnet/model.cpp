#include "segadv/segnet/model.hpp"

#include <cmath>
#include <random>

#include "segadv/error.hpp"

namespace segadv::segnet {
namespace {

// Input gray values are mapped to roughly [-2, 2] before the first conv.
constexpr double kInputScale = 1.0 / 64.0;
constexpr double kInputShift = -127.5 / 64.0;

enum ParamIndex : std::size_t {
  kFull1K, kFull1B, kFull2K, kFull2B,
  kHalf1K, kHalf1B, kHalf2K, kHalf2B,
  kQuarter1K, kQuarter1B, kQuarter2K, kQuarter2B,
  kFuseK, kFuseB,
  kClassifierK, kClassifierB,
  kParamCount
};

}  // namespace

void Architecture::validate() const {
  if (height == 0 || width == 0 || height % 8 != 0 || width % 8 != 0) {
    throw UsageError("architecture: height and width must be positive multiples of 8, got " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  if (channels == 0 || num_classes == 0 || stem_channels == 0 || feature_channels == 0) {
    throw UsageError("architecture: channel and class counts must be positive");
  }
}

std::vector<ParameterSpec> parameter_layout(const Architecture& arch) {
  const std::size_t c = arch.channels, s = arch.stem_channels, f = arch.feature_channels, n = arch.num_classes;
  return {
      {"full.conv1.kernel", {3, 3, c, s}},    {"full.conv1.bias", {s}},
      {"full.conv2.kernel", {3, 3, s, f}},    {"full.conv2.bias", {f}},
      {"half.conv1.kernel", {3, 3, c, f}},    {"half.conv1.bias", {f}},
      {"half.conv2.kernel", {3, 3, f, f}},    {"half.conv2.bias", {f}},
      {"quarter.conv1.kernel", {3, 3, c, f}}, {"quarter.conv1.bias", {f}},
      {"quarter.conv2.kernel", {3, 3, f, f}}, {"quarter.conv2.bias", {f}},
      {"fuse.conv.kernel", {3, 3, f, f}},     {"fuse.conv.bias", {f}},
      {"classifier.kernel", {1, 1, f, n}},    {"classifier.bias", {n}},
  };
}

std::vector<std::string> tap_names() {
  return {"full.conv1", "full.conv2", "half.conv1", "half.conv2", "quarter.conv1", "quarter.conv2", "fuse.conv"};
}

SegModel SegModel::he_initialized(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Tensor> params;
  for (const auto& spec : parameter_layout(arch)) {
    Tensor t(spec.shape);
    if (spec.shape.size() == 4) {
      const double fan_in = static_cast<double>(spec.shape[0] * spec.shape[1] * spec.shape[2]);
      const double stddev = std::sqrt(2.0 / fan_in);
      for (double& v : t.values()) v = stddev * normal(rng);
    }
    params.push_back(std::move(t));
  }
  return SegModel(arch, std::move(params));
}

SegModel SegModel::zeros(const Architecture& arch) {
  arch.validate();
  std::vector<Tensor> params;
  for (const auto& spec : parameter_layout(arch)) params.emplace_back(spec.shape);
  return SegModel(arch, std::move(params));
}

SegModel SegModel::from_parameters(const Architecture& arch, std::vector<Tensor> params) {
  arch.validate();
  const auto layout = parameter_layout(arch);
  if (params.size() != layout.size()) {
    throw ShapeError("model needs " + std::to_string(layout.size()) + " parameter tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params[i].shape() != layout[i].shape) {
      throw ShapeError("parameter " + layout[i].name + " expected shape " + tensor::to_string(layout[i].shape) +
                       ", got " + tensor::to_string(params[i].shape()));
    }
  }
  return SegModel(arch, std::move(params));
}

std::size_t SegModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.size();
  return total;
}

void SegModel::check_input(const Tensor& image) const {
  const tensor::Shape expected{arch_.height, arch_.width, arch_.channels};
  if (image.shape() != expected) {
    throw ShapeError("model expects input " + tensor::to_string(expected) + ", got " +
                     tensor::to_string(image.shape()));
  }
}

Graph build_graph(const SegModel& model, Tape& tape, const Tensor& image, bool image_requires_grad,
                  bool params_require_grad) {
  model.check_input(image);
  const Architecture& arch = model.architecture();
  Graph g;
  g.image = tape.leaf(image, image_requires_grad);
  for (const auto& p : model.parameters()) g.params.push_back(tape.leaf(p, params_require_grad));
  const auto& p = g.params;
  using tensor::conv2d;
  using tensor::relu;

  const std::size_t h = arch.height, w = arch.width;
  Var x = tensor::affine(g.image, kInputScale, kInputShift);
  Var x_half = tensor::bilinear_resize(x, h / 2, w / 2);
  Var x_quarter = tensor::bilinear_resize(x, h / 4, w / 4);

  Var full1 = relu(conv2d(x, p[kFull1K], p[kFull1B], 1, 1));
  Var full2 = relu(conv2d(full1, p[kFull2K], p[kFull2B], 2, 1));          // H/2
  Var half1 = relu(conv2d(x_half, p[kHalf1K], p[kHalf1B], 1, 1));
  Var half2 = relu(conv2d(half1, p[kHalf2K], p[kHalf2B], 2, 1));          // H/4
  Var quarter1 = relu(conv2d(x_quarter, p[kQuarter1K], p[kQuarter1B], 1, 1));
  Var quarter2 = relu(conv2d(quarter1, p[kQuarter2K], p[kQuarter2B], 2, 1));  // H/8

  Var fused_low = tensor::add(tensor::bilinear_resize(quarter2, h / 4, w / 4), half2);
  Var fused = tensor::add(tensor::bilinear_resize(fused_low, h / 2, w / 2), full2);
  Var fuse = relu(conv2d(fused, p[kFuseK], p[kFuseB], 1, 1));
  Var logits_low = conv2d(fuse, p[kClassifierK], p[kClassifierB], 1, 0);
  g.logits = tensor::bilinear_resize(logits_low, h, w);
  g.taps = {full1, full2, half1, half2, quarter1, quarter2, fuse};
  return g;
}

std::pair<ScoreVolume, FeatureTaps> forward_scores(const SegModel& model, const Tensor& image) {
  Tape tape;
  Graph g = build_graph(model, tape, image, false, false);
  ScoreVolume sv{g.logits.value(), tensor::softmax_channels(g.logits.value())};
  FeatureTaps taps;
  taps.names = tap_names();
  for (const Var& t : g.taps) taps.layers.push_back(t.value());
  return {std::move(sv), std::move(taps)};
}

ScoreVolume scores(const SegModel& model, const Tensor& image) {
  Tape tape;
  Graph g = build_graph(model, tape, image, false, false);
  return ScoreVolume{g.logits.value(), tensor::softmax_channels(g.logits.value())};
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

LabelMask predict_mask(const ScoreVolume& scores) {
  const Tensor& probs = scores.probs;
  if (probs.rank() != 3) throw ShapeError("predict_mask: expected H x W x N scores");
  const std::size_t n = probs.dim(2);
  LabelMask mask(probs.dim(0), probs.dim(1));
  auto pv = probs.values();
  for (std::size_t p = 0; p < mask.size(); ++p) mask.classes[p] = argmax(pv.subspan(p * n, n));
  return mask;
}

LabelMask predict_mask(const SegModel& model, const Tensor& image) { return predict_mask(scores(model, image)); }

Classification classify(const SegModel& model, const Tensor& image) {
  Tape tape;
  Graph g = build_graph(model, tape, image, false, false);
  Var pooled = tensor::spatial_mean(g.logits);
  Classification c;
  c.logits = pooled.value().storage();
  c.label = argmax(c.logits);
  return c;
}

namespace {

Var build_loss(const SegModel& model, const Graph& g, const LossSpec& spec) {
  Var loss;
  if (spec.mode == LossMode::kSegmentation) {
    const Architecture& arch = model.architecture();
    if (spec.target_mask.height != arch.height || spec.target_mask.width != arch.width) {
      throw ShapeError("loss target mask is " + std::to_string(spec.target_mask.height) + "x" +
                       std::to_string(spec.target_mask.width) + ", model output is " + std::to_string(arch.height) +
                       "x" + std::to_string(arch.width));
    }
    validate_mask(spec.target_mask, model.num_classes());
    std::optional<std::span<const double>> weights;
    if (spec.pixel_weights) weights = std::span<const double>(*spec.pixel_weights);
    loss = tensor::softmax_cross_entropy(g.logits, spec.target_mask.classes, weights);
  } else {
    if (spec.target_class < 0 || static_cast<std::size_t>(spec.target_class) >= model.num_classes()) {
      throw UsageError("loss target class " + std::to_string(spec.target_class) + " outside [0, " +
                       std::to_string(model.num_classes()) + ")");
    }
    const int target = spec.target_class;
    loss = tensor::softmax_cross_entropy(tensor::spatial_mean(g.logits), std::span<const int>(&target, 1));
  }
  if (spec.scale != 1.0) loss = tensor::affine(loss, spec.scale, 0.0);
  return loss;
}

}  // namespace

LossGradient loss_and_input_gradient(const SegModel& model, const Tensor& image, const LossSpec& spec) {
  Tape tape;
  Graph g = build_graph(model, tape, image, true, false);
  Var loss = build_loss(model, g, spec);
  tape.backward(loss);
  return LossGradient{loss.value().item(), tape.grad(g.image)};
}

Tensor input_gradient(const SegModel& model, const Tensor& image, const LossSpec& spec) {
  return loss_and_input_gradient(model, image, spec).gradient;
}

double loss_value(const SegModel& model, const Tensor& image, const LossSpec& spec) {
  Tape tape;
  Graph g = build_graph(model, tape, image, false, false);
  return build_loss(model, g, spec).value().item();
}

}  // namespace segadv::segnet
