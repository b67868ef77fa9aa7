#include "segadv/tensor/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "segadv/error.hpp"

namespace segadv::tensor {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got shape " +
                     to_string(t.shape()));
  }
}

struct AxisSample {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;
};

std::vector<AxisSample> bilinear_axis(std::size_t in, std::size_t out) {
  std::vector<AxisSample> samples(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::size_t>(std::floor(src));
    if (lo >= in - 1) {
      samples[d] = {in - 1, in - 1, 0.0};
    } else {
      samples[d] = {lo, lo + 1, src - static_cast<double>(lo)};
    }
  }
  return samples;
}

}  // namespace

Var conv2d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding) {
  const Tensor& x = input.value();
  const Tensor& k = kernel.value();
  const Tensor& b = bias.value();
  require_rank(x, 3, "conv2d", "input");
  require_rank(k, 4, "conv2d", "kernel");
  require_rank(b, 1, "conv2d", "bias");
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const std::size_t h = x.dim(0), w = x.dim(1), cin = x.dim(2);
  const std::size_t ks = k.dim(0), cout = k.dim(3);
  if (k.dim(1) != ks || ks % 2 == 0) {
    throw ShapeError("conv2d: kernel must be k x k with k odd, got " + to_string(k.shape()));
  }
  if (k.dim(2) != cin) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(k.dim(2)) + " input channels, input " +
                     to_string(x.shape()) + " has " + std::to_string(cin));
  }
  if (b.dim(0) != cout) {
    throw ShapeError("conv2d: bias " + to_string(b.shape()) + " does not match " + std::to_string(cout) +
                     " output channels");
  }
  if (h + 2 * padding < ks || w + 2 * padding < ks) {
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " smaller than kernel " + to_string(k.shape()) +
                     " with padding " + std::to_string(padding));
  }
  const std::size_t oh = (h + 2 * padding - ks) / stride + 1;
  const std::size_t ow = (w + 2 * padding - ks) / stride + 1;

  Tensor out({oh, ow, cout});
  {
    const double* xin = x.values().data();
    const double* kv = k.values().data();
    double* o = out.values().data();
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double* op = o + (oy * ow + ox) * cout;
        std::copy(b.values().begin(), b.values().end(), op);
        for (std::size_t ky = 0; ky < ks; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < ks; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const double* px = xin + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
            const double* kp = kv + (ky * ks + kx) * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double v = px[ci];
              const double* kr = kp + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) op[co] += v * kr[co];
            }
          }
        }
      }
    }
  }

  const std::array<Var, 3> inputs{input, kernel, bias};
  return input.tape().record(
      OpKind::kConv2d, inputs, std::move(out),
      [h, w, cin, ks, cout, oh, ow, stride, padding](Tape& tape, const TapeNode& node) {
        const std::size_t xi = node.inputs[0], ki = node.inputs[1], bi = node.inputs[2];
        const double* g = tape.grad_of(node.id).data();
        const double* xin = tape.node(xi).value.values().data();
        const double* kv = tape.node(ki).value.values().data();
        double* gx = tape.wants_grad(xi) ? tape.grad_accumulator(xi).data() : nullptr;
        double* gk = tape.wants_grad(ki) ? tape.grad_accumulator(ki).data() : nullptr;
        double* gb = tape.wants_grad(bi) ? tape.grad_accumulator(bi).data() : nullptr;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const double* gp = g + (oy * ow + ox) * cout;
            if (gb) {
              for (std::size_t co = 0; co < cout; ++co) gb[co] += gp[co];
            }
            for (std::size_t ky = 0; ky < ks; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kx = 0; kx < ks; ++kx) {
                const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                const std::size_t pix = (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
                const std::size_t kof = (ky * ks + kx) * cin * cout;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  const double* kr = kv + kof + ci * cout;
                  if (gx) {
                    double acc = 0.0;
                    for (std::size_t co = 0; co < cout; ++co) acc += gp[co] * kr[co];
                    gx[pix + ci] += acc;
                  }
                  if (gk) {
                    const double v = xin[pix + ci];
                    double* gkr = gk + kof + ci * cout;
                    for (std::size_t co = 0; co < cout; ++co) gkr[co] += v * gp[co];
                  }
                }
              }
            }
          }
        }
      });
}

Var relu(Var input) {
  Tensor out = input.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  const std::array<Var, 1> inputs{input};
  return input.tape().record(OpKind::kRelu, inputs, std::move(out), [](Tape& tape, const TapeNode& node) {
    const std::size_t xi = node.inputs[0];
    auto g = tape.grad_of(node.id);
    auto x = tape.node(xi).value.values();
    auto gx = tape.grad_accumulator(xi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) gx[i] += g[i];
    }
  });
}

Var bilinear_resize(Var input, std::size_t out_h, std::size_t out_w) {
  const Tensor& x = input.value();
  require_rank(x, 3, "bilinear_resize", "input");
  if (out_h == 0 || out_w == 0) throw ShapeError("bilinear_resize: output size must be positive");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  auto rows = bilinear_axis(h, out_h);
  auto cols = bilinear_axis(w, out_w);

  Tensor out({out_h, out_w, c});
  const double* xv = x.values().data();
  double* o = out.values().data();
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const AxisSample& r = rows[oy];
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const AxisSample& s = cols[ox];
      const double w00 = (1 - r.frac) * (1 - s.frac), w01 = (1 - r.frac) * s.frac;
      const double w10 = r.frac * (1 - s.frac), w11 = r.frac * s.frac;
      const double* p00 = xv + (r.lo * w + s.lo) * c;
      const double* p01 = xv + (r.lo * w + s.hi) * c;
      const double* p10 = xv + (r.hi * w + s.lo) * c;
      const double* p11 = xv + (r.hi * w + s.hi) * c;
      double* op = o + (oy * out_w + ox) * c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        op[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
      }
    }
  }

  const std::array<Var, 1> inputs{input};
  return input.tape().record(
      OpKind::kBilinearResize, inputs, std::move(out),
      [rows = std::move(rows), cols = std::move(cols), w, c, out_h, out_w](Tape& tape, const TapeNode& node) {
        const std::size_t xi = node.inputs[0];
        const double* g = tape.grad_of(node.id).data();
        double* gx = tape.grad_accumulator(xi).data();
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const AxisSample& r = rows[oy];
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const AxisSample& s = cols[ox];
            const double w00 = (1 - r.frac) * (1 - s.frac), w01 = (1 - r.frac) * s.frac;
            const double w10 = r.frac * (1 - s.frac), w11 = r.frac * s.frac;
            const double* gp = g + (oy * out_w + ox) * c;
            double* p00 = gx + (r.lo * w + s.lo) * c;
            double* p01 = gx + (r.lo * w + s.hi) * c;
            double* p10 = gx + (r.hi * w + s.lo) * c;
            double* p11 = gx + (r.hi * w + s.hi) * c;
            for (std::size_t ch = 0; ch < c; ++ch) {
              p00[ch] += w00 * gp[ch];
              p01[ch] += w01 * gp[ch];
              p10[ch] += w10 * gp[ch];
              p11[ch] += w11 * gp[ch];
            }
          }
        }
      });
}

Var add(Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
  }
  Tensor out = a.value();
  auto bv = b.value().values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  const std::array<Var, 2> inputs{a, b};
  return a.tape().record(OpKind::kAdd, inputs, std::move(out), [](Tape& tape, const TapeNode& node) {
    auto g = tape.grad_of(node.id);
    for (std::size_t in : node.inputs) {
      if (!tape.wants_grad(in)) continue;
      auto gi = tape.grad_accumulator(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var affine(Var input, double scale, double shift) {
  Tensor out = input.value();
  for (double& v : out.values()) v = scale * v + shift;
  const std::array<Var, 1> inputs{input};
  return input.tape().record(OpKind::kAffine, inputs, std::move(out), [scale](Tape& tape, const TapeNode& node) {
    auto g = tape.grad_of(node.id);
    auto gi = tape.grad_accumulator(node.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += scale * g[i];
  });
}

Var sum(Var input) {
  double total = 0.0;
  for (double v : input.value().values()) total += v;
  const std::array<Var, 1> inputs{input};
  return input.tape().record(OpKind::kSum, inputs, Tensor::scalar(total), [](Tape& tape, const TapeNode& node) {
    const double g = tape.grad_of(node.id)[0];
    for (double& gi : tape.grad_accumulator(node.inputs[0])) gi += g;
  });
}

Var weighted_sum(Var input, std::span<const double> weights) {
  auto v = input.value().values();
  if (weights.size() != v.size()) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for tensor " +
                     to_string(input.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += weights[i] * v[i];
  const std::array<Var, 1> inputs{input};
  return input.tape().record(
      OpKind::kWeightedSum, inputs, Tensor::scalar(total),
      [w = std::vector<double>(weights.begin(), weights.end())](Tape& tape, const TapeNode& node) {
        const double g = tape.grad_of(node.id)[0];
        auto gi = tape.grad_accumulator(node.inputs[0]);
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g * w[i];
      });
}

Var spatial_mean(Var input) {
  const Tensor& x = input.value();
  require_rank(x, 3, "spatial_mean", "input");
  const std::size_t pixels = x.dim(0) * x.dim(1), n = x.dim(2);
  Tensor out({n});
  auto xv = x.values();
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t c = 0; c < n; ++c) out[c] += xv[p * n + c];
  }
  for (double& v : out.values()) v /= static_cast<double>(pixels);
  const std::array<Var, 1> inputs{input};
  return input.tape().record(OpKind::kSpatialMean, inputs, std::move(out),
                             [pixels, n](Tape& tape, const TapeNode& node) {
                               auto g = tape.grad_of(node.id);
                               auto gi = tape.grad_accumulator(node.inputs[0]);
                               const double inv = 1.0 / static_cast<double>(pixels);
                               for (std::size_t p = 0; p < pixels; ++p) {
                                 for (std::size_t c = 0; c < n; ++c) gi[p * n + c] += g[c] * inv;
                               }
                             });
}

Var softmax_cross_entropy(Var logits, std::span<const int> targets,
                          std::optional<std::span<const double>> pixel_weights) {
  const Tensor& z = logits.value();
  if (z.rank() != 1 && z.rank() != 3) {
    throw ShapeError("softmax_cross_entropy: logits must be H x W x N or N, got " + to_string(z.shape()));
  }
  const std::size_t n = z.shape().back();
  const std::size_t pixels = z.size() / n;
  if (targets.size() != pixels) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(pixels) + " pixels");
  }
  if (pixel_weights && pixel_weights->size() != pixels) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(pixel_weights->size()) + " weights for " +
                     std::to_string(pixels) + " pixels");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= n) {
      throw UsageError("softmax_cross_entropy: class id " + std::to_string(t) + " outside [0, " +
                       std::to_string(n) + ")");
    }
  }

  // Softmax is cached for the backward pass.
  std::vector<double> probs(z.size());
  std::vector<double> weights(pixels, 1.0);
  if (pixel_weights) std::copy(pixel_weights->begin(), pixel_weights->end(), weights.begin());
  auto zv = z.values();
  double total = 0.0, compensation = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* row = zv.data() + p * n;
    const double mx = *std::max_element(row, row + n);
    double denom = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      probs[p * n + c] = std::exp(row[c] - mx);
      denom += probs[p * n + c];
    }
    for (std::size_t c = 0; c < n; ++c) probs[p * n + c] /= denom;
    const double nll = std::log(denom) + mx - row[targets[p]];
    // Neumaier compensation: finite-difference checks resolve loss changes
    // far below the rounding error of a plain running sum.
    const double term = weights[p] * nll, t = total + term;
    compensation += std::abs(total) >= std::abs(term) ? (total - t) + term : (term - t) + total;
    total = t;
  }
  total = (total + compensation) / static_cast<double>(pixels);

  const std::array<Var, 1> inputs{logits};
  return logits.tape().record(
      OpKind::kSoftmaxCrossEntropy, inputs, Tensor::scalar(total),
      [probs = std::move(probs), weights = std::move(weights), tgt = std::vector<int>(targets.begin(), targets.end()),
       n, pixels](Tape& tape, const TapeNode& node) {
        const double g = tape.grad_of(node.id)[0] / static_cast<double>(pixels);
        auto gi = tape.grad_accumulator(node.inputs[0]);
        for (std::size_t p = 0; p < pixels; ++p) {
          const double scale = g * weights[p];
          if (scale == 0.0) continue;
          for (std::size_t c = 0; c < n; ++c) gi[p * n + c] += scale * probs[p * n + c];
          gi[p * n + static_cast<std::size_t>(tgt[p])] -= scale;
        }
      });
}

Var log_l2_norm(Var input, double guard) {
  double sq = guard;
  for (double v : input.value().values()) sq += v * v;
  const std::array<Var, 1> inputs{input};
  return input.tape().record(OpKind::kLogL2Norm, inputs, Tensor::scalar(0.5 * std::log(sq)),
                             [sq](Tape& tape, const TapeNode& node) {
                               const double g = tape.grad_of(node.id)[0] / sq;
                               auto x = tape.node(node.inputs[0]).value.values();
                               auto gi = tape.grad_accumulator(node.inputs[0]);
                               for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g * x[i];
                             });
}

Tensor softmax_channels(const Tensor& logits) {
  const std::size_t n = logits.shape().back();
  Tensor probs = logits;
  auto pv = probs.values();
  for (std::size_t p = 0; p < pv.size() / n; ++p) {
    double* row = pv.data() + p * n;
    const double mx = *std::max_element(row, row + n);
    double denom = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      row[c] = std::exp(row[c] - mx);
      denom += row[c];
    }
    for (std::size_t c = 0; c < n; ++c) row[c] /= denom;
  }
  return probs;
}

}  // namespace segadv::tensor
