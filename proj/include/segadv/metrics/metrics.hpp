#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "segadv/image.hpp"
#include "segadv/segnet/model.hpp"
#include "segadv/tensor/tensor.hpp"

namespace segadv::metrics {

// Rows are ground-truth classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0);

  std::size_t num_classes() const noexcept { return n_; }
  std::uint64_t count(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }
  std::uint64_t& count(std::size_t truth, std::size_t pred) { return counts_[truth * n_ + pred]; }
  std::uint64_t total() const;

  std::uint64_t true_positives(std::size_t s) const { return count(s, s); }
  std::uint64_t false_positives(std::size_t s) const;
  std::uint64_t false_negatives(std::size_t s) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) { return a += b; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

// counts[truth][pred] += 1 per pixel, skipping pixels whose truth is
// ignore_class.
void accumulate(ConfusionMatrix& cm, const LabelMask& pred, const LabelMask& truth,
                std::optional<int> ignore_class = std::nullopt);

ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& truth, std::size_t num_classes,
                          std::optional<int> ignore_class = std::nullopt);

// Per-class IoU; nullopt for classes with TP + FP + FN = 0.
std::vector<std::optional<double>> class_iou(const ConfusionMatrix& cm);

// Mean IoU over classes that occur in truth or prediction. Throws
// NumericalError if the matrix holds no pixels.
double miou(const ConfusionMatrix& cm);

// Q = miou_adv / miou_clean.
double miou_ratio(double miou_adv, double miou_clean);

// Fraction of images whose image-level label changes once the perturbation
// is added and the result clip-quantized.
double fooling_rate(const segnet::SegModel& model, std::span<const Image> images,
                    const tensor::Tensor& perturbation);

}  // namespace segadv::metrics
