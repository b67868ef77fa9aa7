#include "segadv/attacks/classifier.hpp"

#include "segadv/error.hpp"

namespace segadv::attacks {

using tensor::Tensor;

int DifferentiableClassifier::label(const Tensor& input) const { return segnet::argmax(logits(input)); }

std::vector<double> SegModelClassifier::logits(const Tensor& input) const {
  return segnet::classify(*model_, input).logits;
}

ClassJacobian SegModelClassifier::jacobian(const Tensor& input) const {
  tensor::Tape tape;
  segnet::Graph g = segnet::build_graph(*model_, tape, input, true, false);
  tensor::Var pooled = tensor::spatial_mean(g.logits);
  ClassJacobian out;
  out.logits = pooled.value().storage();
  const std::size_t n = out.logits.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> pick(n, 0.0);
    pick[k] = 1.0;
    tape.backward(tensor::weighted_sum(pooled, pick));
    out.gradients.push_back(tape.grad(g.image));
  }
  return out;
}

Tensor SegModelClassifier::combination_gradient(const Tensor& input, std::span<const double> coefficients) const {
  tensor::Tape tape;
  segnet::Graph g = segnet::build_graph(*model_, tape, input, true, false);
  tensor::Var pooled = tensor::spatial_mean(g.logits);
  tape.backward(tensor::weighted_sum(pooled, coefficients));
  return tape.grad(g.image);
}

LinearClassifier::LinearClassifier(std::vector<Tensor> weights, std::vector<double> bias)
    : weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.empty() || weights_.size() != bias_.size()) {
    throw UsageError("linear classifier needs one weight tensor and one bias per class");
  }
  for (const auto& w : weights_) {
    if (w.shape() != weights_.front().shape()) throw ShapeError("linear classifier weights differ in shape");
  }
}

std::vector<double> LinearClassifier::logits(const Tensor& input) const {
  if (input.shape() != weights_.front().shape()) throw ShapeError("linear classifier input shape mismatch");
  std::vector<double> z(weights_.size());
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    double acc = bias_[k];
    for (std::size_t i = 0; i < input.size(); ++i) acc += weights_[k][i] * input[i];
    z[k] = acc;
  }
  return z;
}

ClassJacobian LinearClassifier::jacobian(const Tensor& input) const { return {logits(input), weights_}; }

Tensor LinearClassifier::combination_gradient(const Tensor& input, std::span<const double> coefficients) const {
  if (input.shape() != weights_.front().shape()) throw ShapeError("linear classifier input shape mismatch");
  Tensor g(input.shape());
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += coefficients[k] * weights_[k][i];
  }
  return g;
}

}  // namespace segadv::attacks
