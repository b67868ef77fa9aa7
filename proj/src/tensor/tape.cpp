#include "segadv/tensor/tape.hpp"

#include <algorithm>

#include "segadv/error.hpp"

namespace segadv::tensor {

const Tensor& Var::value() const { return tape_->node(id_).value; }

bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

Var Tape::leaf(Tensor value, bool requires_grad) {
  TapeNode node;
  node.id = nodes_.size();
  node.kind = OpKind::kLeaf;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::span<const Var> inputs, Tensor value, BackwardFn backward) {
  TapeNode node;
  node.id = nodes_.size();
  node.kind = kind;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw UsageError("variable does not belong to this tape");
  }
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (nodes_[loss.id()].value.size() != 1) {
    throw ShapeError("backward() needs a single-element loss, got shape " +
                     to_string(nodes_[loss.id()].value.shape()));
  }
  grads_.assign(nodes_.size(), {});
  for (std::size_t i = 0; i <= loss.id(); ++i) {
    if (nodes_[i].requires_grad) grads_[i].assign(nodes_[i].value.size(), 0.0);
  }
  if (!nodes_[loss.id()].requires_grad) return;
  grads_[loss.id()][0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const TapeNode& node = nodes_[i];
    if (!node.requires_grad || !node.backward) continue;
    const auto& g = grads_[i];
    if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) continue;
    node.backward(*this, node);
  }
}

Tensor Tape::grad(Var v) const {
  check_owned(v);
  const std::size_t id = v.id();
  if (id < grads_.size() && !grads_[id].empty()) return Tensor(nodes_[id].value.shape(), grads_[id]);
  return Tensor(nodes_[id].value.shape(), 0.0);
}

std::span<const double> Tape::grad_of(std::size_t id) const { return grads_[id]; }

std::span<double> Tape::grad_accumulator(std::size_t id) { return grads_[id]; }

}  // namespace segadv::tensor
