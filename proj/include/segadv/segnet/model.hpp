#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "segadv/image.hpp"
#include "segadv/tensor/ops.hpp"
#include "segadv/tensor/tape.hpp"
#include "segadv/tensor/tensor.hpp"

namespace segadv::segnet {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

// Three-branch multi-scale encoder (full, half and quarter resolution
// inputs), upsample-and-add fusion, one fusion conv, a 1x1 classifier and a
// final bilinear upsample back to H x W.
struct Architecture {
  std::uint32_t height = 64;
  std::uint32_t width = 128;
  std::uint32_t channels = 3;
  std::uint32_t num_classes = 8;
  std::uint32_t stem_channels = 8;
  std::uint32_t feature_channels = 16;

  // Throws UsageError unless H and W are positive multiples of 8 and all
  // channel counts are positive.
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct ParameterSpec {
  std::string name;
  tensor::Shape shape;
};

// Parameter names and shapes in declaration (and checkpoint) order.
std::vector<ParameterSpec> parameter_layout(const Architecture& arch);

class SegModel {
 public:
  static SegModel he_initialized(const Architecture& arch, std::uint64_t seed);
  static SegModel zeros(const Architecture& arch);
  // Throws ShapeError if the tensors do not match parameter_layout(arch).
  static SegModel from_parameters(const Architecture& arch, std::vector<Tensor> params);

  const Architecture& architecture() const noexcept { return arch_; }
  std::size_t num_classes() const noexcept { return arch_.num_classes; }
  const std::vector<Tensor>& parameters() const noexcept { return params_; }
  std::vector<Tensor>& mutable_parameters() noexcept { return params_; }
  std::size_t parameter_count() const;

  // Throws ShapeError unless `image` is H x W x C for this architecture.
  void check_input(const Tensor& image) const;

  friend bool operator==(const SegModel&, const SegModel&) = default;

 private:
  SegModel(Architecture arch, std::vector<Tensor> params) : arch_(arch), params_(std::move(params)) {}

  Architecture arch_;
  std::vector<Tensor> params_;
};

// Handles into one recorded forward pass.
struct Graph {
  Var image;
  Var logits;              // H x W x N
  std::vector<Var> taps;   // every post-ReLU activation, fixed order
  std::vector<Var> params; // declaration order
};

Graph build_graph(const SegModel& model, Tape& tape, const Tensor& image, bool image_requires_grad,
                  bool params_require_grad);

std::vector<std::string> tap_names();

struct ScoreVolume {
  Tensor logits;  // H x W x N
  Tensor probs;   // H x W x N
};

struct FeatureTaps {
  std::vector<std::string> names;
  std::vector<Tensor> layers;
};

std::pair<ScoreVolume, FeatureTaps> forward_scores(const SegModel& model, const Tensor& image);
ScoreVolume scores(const SegModel& model, const Tensor& image);

// Per-pixel argmax, ties to the smallest class index.
LabelMask predict_mask(const ScoreVolume& scores);
LabelMask predict_mask(const SegModel& model, const Tensor& image);

struct Classification {
  int label = 0;
  std::vector<double> logits;
};

// Image-level logits are the spatial mean of the segmentation logits.
Classification classify(const SegModel& model, const Tensor& image);

// Index of the largest value, ties to the smallest index.
int argmax(std::span<const double> values);

enum class LossMode { kSegmentation, kClassification };

struct LossSpec {
  LossMode mode = LossMode::kSegmentation;
  LabelMask target_mask;
  int target_class = 0;
  std::optional<std::vector<double>> pixel_weights;
  double scale = 1.0;

  static LossSpec segmentation(LabelMask target) {
    LossSpec s;
    s.target_mask = std::move(target);
    return s;
  }
  static LossSpec classification(int target) {
    LossSpec s;
    s.mode = LossMode::kClassification;
    s.target_class = target;
    return s;
  }
};

struct LossGradient {
  double loss = 0.0;
  Tensor gradient;  // H x W x C, same units as the image
};

LossGradient loss_and_input_gradient(const SegModel& model, const Tensor& image, const LossSpec& spec);
Tensor input_gradient(const SegModel& model, const Tensor& image, const LossSpec& spec);
double loss_value(const SegModel& model, const Tensor& image, const LossSpec& spec);

}  // namespace segadv::segnet
