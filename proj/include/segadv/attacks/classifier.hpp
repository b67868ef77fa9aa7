#pragma once

#include <span>
#include <vector>

#include "segadv/segnet/model.hpp"
#include "segadv/tensor/tensor.hpp"

namespace segadv::attacks {

struct ClassJacobian {
  std::vector<double> logits;
  std::vector<tensor::Tensor> gradients;  // d logit_k / d input, one per class
};

// Image-level classifier with input gradients, as consumed by the
// minimal-perturbation and C&W attacks.
class DifferentiableClassifier {
 public:
  virtual ~DifferentiableClassifier() = default;

  virtual std::size_t num_classes() const = 0;
  virtual std::vector<double> logits(const tensor::Tensor& input) const = 0;
  virtual ClassJacobian jacobian(const tensor::Tensor& input) const = 0;
  // Gradient of sum_k coefficients[k] * logit_k.
  virtual tensor::Tensor combination_gradient(const tensor::Tensor& input,
                                              std::span<const double> coefficients) const = 0;

  int label(const tensor::Tensor& input) const;
};

// The segmentation model's mean-pooled classification head.
class SegModelClassifier final : public DifferentiableClassifier {
 public:
  explicit SegModelClassifier(const segnet::SegModel& model) : model_(&model) {}

  std::size_t num_classes() const override { return model_->num_classes(); }
  std::vector<double> logits(const tensor::Tensor& input) const override;
  ClassJacobian jacobian(const tensor::Tensor& input) const override;
  tensor::Tensor combination_gradient(const tensor::Tensor& input,
                                      std::span<const double> coefficients) const override;

 private:
  const segnet::SegModel* model_;
};

// logit_k = <weights[k], x> + bias[k].
class LinearClassifier final : public DifferentiableClassifier {
 public:
  LinearClassifier(std::vector<tensor::Tensor> weights, std::vector<double> bias);

  std::size_t num_classes() const override { return weights_.size(); }
  std::vector<double> logits(const tensor::Tensor& input) const override;
  ClassJacobian jacobian(const tensor::Tensor& input) const override;
  tensor::Tensor combination_gradient(const tensor::Tensor& input,
                                      std::span<const double> coefficients) const override;

 private:
  std::vector<tensor::Tensor> weights_;
  std::vector<double> bias_;
};

}  // namespace segadv::attacks
