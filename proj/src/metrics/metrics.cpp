#include "segadv/metrics/metrics.hpp"

#include <numeric>
#include <string>

#include "segadv/error.hpp"

namespace segadv::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::false_positives(std::size_t s) const {
  std::uint64_t column = 0;
  for (std::size_t t = 0; t < n_; ++t) column += count(t, s);
  return column - count(s, s);
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t s) const {
  std::uint64_t row = 0;
  for (std::size_t p = 0; p < n_; ++p) row += count(s, p);
  return row - count(s, s);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw ShapeError("cannot merge confusion matrices with different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

void accumulate(ConfusionMatrix& cm, const LabelMask& pred, const LabelMask& truth, std::optional<int> ignore_class) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw ShapeError("accumulate: prediction is " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                     ", truth is " + std::to_string(truth.height) + "x" + std::to_string(truth.width));
  }
  const auto n = static_cast<int>(cm.num_classes());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth.classes[i];
    if (ignore_class && t == *ignore_class) continue;
    const int p = pred.classes[i];
    if (t < 0 || t >= n || p < 0 || p >= n) {
      throw UsageError("accumulate: class id outside [0, " + std::to_string(n) + ") at pixel " + std::to_string(i));
    }
    ++cm.count(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
  }
}

ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& truth, std::size_t num_classes,
                          std::optional<int> ignore_class) {
  ConfusionMatrix cm(num_classes);
  accumulate(cm, pred, truth, ignore_class);
  return cm;
}

std::vector<std::optional<double>> class_iou(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> iou(cm.num_classes());
  for (std::size_t s = 0; s < cm.num_classes(); ++s) {
    const std::uint64_t tp = cm.true_positives(s);
    const std::uint64_t denom = tp + cm.false_positives(s) + cm.false_negatives(s);
    if (denom > 0) iou[s] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return iou;
}

double miou(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw NumericalError("mIoU is undefined for an empty confusion matrix");
  // Extended precision from the integer counts, one rounding at the end, so
  // small rational cases come out correctly rounded (e.g. exactly 7/12).
  long double sum = 0.0L;
  std::size_t present = 0;
  for (std::size_t s = 0; s < cm.num_classes(); ++s) {
    const std::uint64_t tp = cm.true_positives(s);
    const std::uint64_t denom = tp + cm.false_positives(s) + cm.false_negatives(s);
    if (denom == 0) continue;
    sum += static_cast<long double>(tp) / static_cast<long double>(denom);
    ++present;
  }
  return static_cast<double>(sum / static_cast<long double>(present));
}

double miou_ratio(double miou_adv, double miou_clean) {
  if (!(miou_clean > 0.0)) throw UsageError("mIoU ratio needs a positive clean mIoU");
  return miou_adv / miou_clean;
}

double fooling_rate(const segnet::SegModel& model, std::span<const Image> images,
                    const tensor::Tensor& perturbation) {
  if (images.empty()) throw UsageError("fooling rate needs at least one image");
  std::size_t fooled = 0;
  for (const Image& image : images) {
    const tensor::Tensor clean = to_tensor(image);
    if (perturbation.shape() != clean.shape()) {
      throw ShapeError("perturbation shape " + tensor::to_string(perturbation.shape()) + " does not match image " +
                       tensor::to_string(clean.shape()));
    }
    tensor::Tensor shifted = clean;
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += perturbation[i];
    const tensor::Tensor adv = to_tensor(clip_quantize(shifted));
    if (segnet::classify(model, adv).label != segnet::classify(model, clean).label) ++fooled;
  }
  return static_cast<double>(fooled) / static_cast<double>(images.size());
}

}  // namespace segadv::metrics
