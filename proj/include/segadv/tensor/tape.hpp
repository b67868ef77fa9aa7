#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "segadv/tensor/tensor.hpp"

namespace segadv::tensor {

enum class OpKind {
  kLeaf,
  kConv2d,
  kRelu,
  kBilinearResize,
  kAdd,
  kAffine,
  kSum,
  kWeightedSum,
  kSpatialMean,
  kSoftmaxCrossEntropy,
  kLogL2Norm,
};

class Tape;
struct TapeNode;

// Propagates the gradient of `node` into the gradient buffers of its inputs.
using BackwardFn = std::function<void(Tape&, const TapeNode&)>;

struct TapeNode {
  std::size_t id = 0;
  OpKind kind = OpKind::kLeaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  bool requires_grad = false;
  BackwardFn backward;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Append-only record of one forward pass. Nodes are stored in creation order,
// which is a topological order by construction.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var record(OpKind kind, std::span<const Var> inputs, Tensor value, BackwardFn backward);

  // Reverse sweep from a single-element loss. Gradient buffers are reset
  // first, so calling backward repeatedly on different losses is allowed.
  void backward(Var loss);

  // Gradient of the last backward() loss with respect to `v`. Nodes not
  // reachable from that loss (or not requiring grad) have zero gradient.
  Tensor grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const TapeNode& node(std::size_t id) const { return nodes_[id]; }

  // Used by backward rules.
  std::span<const double> grad_of(std::size_t id) const;
  std::span<double> grad_accumulator(std::size_t id);
  bool wants_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  void check_owned(Var v) const;

  std::vector<TapeNode> nodes_;
  std::vector<std::vector<double>> grads_;
};

}  // namespace segadv::tensor
