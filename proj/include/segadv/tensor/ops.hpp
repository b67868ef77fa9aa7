#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "segadv/tensor/tape.hpp"

// Differentiable operations. Spatial tensors are H x W x C, row-major.
namespace segadv::tensor {

// Cross-correlation with a k x k x Cin x Cout kernel (k odd) plus bias.
Var conv2d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding);

// max(0, v); the backward gate at exactly 0 is 0.
Var relu(Var input);

// Half-pixel-center bilinear interpolation with edge clamping.
Var bilinear_resize(Var input, std::size_t out_h, std::size_t out_w);

Var add(Var a, Var b);

// scale * v + shift, elementwise.
Var affine(Var input, double scale, double shift);

Var sum(Var input);

// sum_i weights[i] * v[i]; weights must match the element count.
Var weighted_sum(Var input, std::span<const double> weights);

// H x W x N -> N, mean over all pixels.
Var spatial_mean(Var input);

// Per-pixel softmax + negative log-likelihood of `targets`. Logits are
// H x W x N (or a length-N vector, treated as one pixel). Each pixel's term is
// multiplied by its weight and the total divided by the pixel count, so the
// loss is linear in the weights and unweighted calls give the plain mean.
Var softmax_cross_entropy(Var logits, std::span<const int> targets,
                          std::optional<std::span<const double>> pixel_weights = std::nullopt);

// log(sqrt(sum v^2 + guard)).
Var log_l2_norm(Var input, double guard);

// Non-differentiable helpers on plain tensors.
Tensor softmax_channels(const Tensor& logits);

}  // namespace segadv::tensor
