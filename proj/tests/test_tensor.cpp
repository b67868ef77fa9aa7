#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "segadv/error.hpp"
#include "segadv/tensor/ops.hpp"
#include "segadv/tensor/tape.hpp"
#include "segadv/tensor/tensor.hpp"
#include "test_support.hpp"

namespace segadv::tensor {
namespace {

using segadv::testing::random_tensor;
using segadv::testing::relative_error;

using OpBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Projects the op output onto fixed random weights so every output element
// contributes to the scalar being differentiated.
double projected_forward(const OpBuilder& op, const std::vector<Tensor>& inputs, const std::vector<double>& proj) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t, false));
  Var out = op(tape, vars);
  double s = 0.0;
  for (std::size_t i = 0; i < out.value().size(); ++i) s += proj[i] * out.value()[i];
  return s;
}

void expect_gradients_match(const OpBuilder& op, const std::vector<Tensor>& inputs, std::uint64_t seed,
                            double tol = 1e-6) {
  std::mt19937_64 rng(seed);
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t, true));
  Var out = op(tape, vars);
  std::vector<double> proj(out.value().size());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& p : proj) p = u(rng);
  tape.backward(weighted_sum(out, proj));

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor g = tape.grad(vars[k]);
    ASSERT_EQ(g.shape(), inputs[k].shape());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto f = [&](const Tensor& xk) {
        auto in = inputs;
        in[k] = xk;
        return projected_forward(op, in, proj);
      };
      const double fd = segadv::testing::central_difference(f, inputs[k], i, 1e-5);
      EXPECT_LT(relative_error(g[i], fd, 1e-6), tol) << "input " << k << " element " << i << ": tape " << g[i]
                                                     << " vs fd " << fd;
    }
  }
}

// Moves values away from the ReLU kink so central differences stay on one side.
Tensor away_from_zero(Tensor t) {
  for (double& v : t.values()) {
    if (std::abs(v) < 0.05) v = v < 0 ? -0.05 - v : 0.05 + v;
  }
  return t;
}

TEST(TensorTest, ConstructionAndItem) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_THROW((void)t.item(), ShapeError);
  EXPECT_DOUBLE_EQ(Tensor::scalar(4.0).item(), 4.0);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_TRUE(t.all_finite());
  t[0] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(OpsForward, Conv2dMatchesNaiveLoop) {
  std::mt19937_64 rng(11);
  const std::size_t h = 7, w = 6, cin = 2, cout = 3, k = 3;
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t pad : {0u, 1u}) {
      Tensor x = random_tensor({h, w, cin}, rng);
      Tensor kern = random_tensor({k, k, cin, cout}, rng);
      Tensor b = random_tensor({cout}, rng);
      Tape tape;
      Var y = conv2d(tape.leaf(x, false), tape.leaf(kern, false), tape.leaf(b, false), stride, pad);
      const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
      ASSERT_EQ(y.shape(), (Shape{oh, ow, cout}));
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox)
          for (std::size_t co = 0; co < cout; ++co) {
            double acc = b[co];
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                for (std::size_t ci = 0; ci < cin; ++ci)
                  acc += x[(iy * w + ix) * cin + ci] * kern[((ky * k + kx) * cin + ci) * cout + co];
              }
            EXPECT_NEAR(y.value()[(oy * ow + ox) * cout + co], acc, 1e-12);
          }
    }
  }
}

TEST(OpsForward, Conv2dRejectsBadShapes) {
  Tape tape;
  Var x = tape.leaf(Tensor({4, 4, 2}), false);
  Var k = tape.leaf(Tensor({3, 3, 3, 1}), false);
  Var b = tape.leaf(Tensor({1}), false);
  EXPECT_THROW(conv2d(x, k, b, 1, 1), ShapeError);
}

// Independent scalar oracle: half-pixel centres, clamped source coordinates.
double bilinear_oracle(const Tensor& in, std::size_t oy, std::size_t ox, std::size_t c, std::size_t oh,
                       std::size_t ow) {
  const std::size_t ih = in.dim(0), iw = in.dim(1), ch = in.dim(2);
  auto src = [](std::size_t o, std::size_t n_in, std::size_t n_out) {
    double s = (static_cast<double>(o) + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(n_in - 1));
  };
  const double sy = src(oy, ih, oh), sx = src(ox, iw, ow);
  const auto y0 = static_cast<std::size_t>(std::floor(sy)), x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min(y0 + 1, ih - 1), x1 = std::min(x0 + 1, iw - 1);
  const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
  auto at = [&](std::size_t y, std::size_t x) { return in[(y * iw + x) * ch + c]; };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

TEST(OpsForward, BilinearHandExample) {
  Tape tape;
  Var x = tape.leaf(Tensor({1, 2, 1}, std::vector<double>{0.0, 1.0}), false);
  Var y = bilinear_resize(x, 1, 4);
  const std::vector<double> expected{0.0, 0.25, 0.75, 1.0};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y.value()[i], expected[i], 1e-15);
}

TEST(OpsForward, BilinearMatchesOracle) {
  std::mt19937_64 rng(5);
  for (auto [ih, iw, oh, ow] : std::vector<std::array<std::size_t, 4>>{{4, 4, 8, 8}, {3, 5, 12, 7}, {8, 8, 4, 4}}) {
    Tensor x = random_tensor({ih, iw, 2}, rng);
    Tape tape;
    Var y = bilinear_resize(tape.leaf(x, false), oh, ow);
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t c = 0; c < 2; ++c)
          EXPECT_NEAR(y.value()[(oy * ow + ox) * 2 + c], bilinear_oracle(x, oy, ox, c, oh, ow), 1e-12);
  }
}

TEST(OpsForward, BilinearIdentityAtSameSize) {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({5, 3, 2}, rng);
  Tape tape;
  Var y = bilinear_resize(tape.leaf(x, false), 5, 3);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.value()[i], x[i], 1e-15);
}

TEST(OpsForward, SoftmaxCrossEntropyHandValues) {
  Tape tape;
  // Two pixels, three classes.
  Tensor logits({1, 2, 3}, std::vector<double>{0.0, 0.0, 0.0, 1.0, 2.0, 3.0});
  const std::vector<int> targets{1, 2};
  Var l = softmax_cross_entropy(tape.leaf(logits, false), targets);
  const double p2 = std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  EXPECT_NEAR(l.value().item(), (std::log(3.0) - std::log(p2)) / 2.0, 1e-12);

  const std::vector<double> weights{2.0, 0.0};
  Var lw = softmax_cross_entropy(tape.leaf(logits, false), targets, std::span<const double>(weights));
  EXPECT_NEAR(lw.value().item(), 2.0 * std::log(3.0) / 2.0, 1e-12);
}

TEST(OpsForward, SoftmaxCrossEntropyStableForLargeLogits) {
  Tape tape;
  Tensor logits({2}, std::vector<double>{1000.0, 0.0});
  const std::vector<int> targets{0};
  Var l = softmax_cross_entropy(tape.leaf(logits, false), targets);
  EXPECT_TRUE(std::isfinite(l.value().item()));
  EXPECT_NEAR(l.value().item(), 0.0, 1e-12);
}

TEST(OpsForward, SoftmaxChannelsSumsToOne) {
  std::mt19937_64 rng(8);
  Tensor x = random_tensor({3, 4, 5}, rng, -20, 20);
  Tensor p = softmax_channels(x);
  for (std::size_t px = 0; px < 12; ++px) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) s += p[px * 5 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(OpsForward, ElementwiseAndReductions) {
  Tape tape;
  Tensor a({2, 1, 2}, std::vector<double>{1, -2, 3, -4});
  Tensor b({2, 1, 2}, std::vector<double>{0.5, 0.5, 0.5, 0.5});
  Var va = tape.leaf(a, false), vb = tape.leaf(b, false);
  EXPECT_EQ(relu(va).value().storage(), (std::vector<double>{1, 0, 3, 0}));
  EXPECT_EQ(add(va, vb).value().storage(), (std::vector<double>{1.5, -1.5, 3.5, -3.5}));
  EXPECT_EQ(affine(va, 2.0, 1.0).value().storage(), (std::vector<double>{3, -3, 7, -7}));
  EXPECT_DOUBLE_EQ(sum(va).value().item(), -2.0);
  const std::vector<double> w{1, 1, 0, 2};
  EXPECT_DOUBLE_EQ(weighted_sum(va, w).value().item(), -9.0);
  EXPECT_EQ(spatial_mean(va).value().storage(), (std::vector<double>{2.0, -3.0}));
  EXPECT_NEAR(log_l2_norm(va, 0.0).value().item(), std::log(std::sqrt(30.0)), 1e-14);
  EXPECT_THROW(add(va, tape.leaf(Tensor({4}), false)), ShapeError);
}

TEST(OpsGradient, Conv2d) {
  std::mt19937_64 rng(21);
  for (std::size_t stride : {1u, 2u}) {
    OpBuilder op = [stride](Tape&, const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], stride, 1); };
    expect_gradients_match(op, {random_tensor({5, 6, 2}, rng), random_tensor({3, 3, 2, 2}, rng),
                                random_tensor({2}, rng)},
                           30 + stride);
  }
}

TEST(OpsGradient, Relu) {
  std::mt19937_64 rng(22);
  OpBuilder op = [](Tape&, const std::vector<Var>& v) { return relu(v[0]); };
  expect_gradients_match(op, {away_from_zero(random_tensor({3, 3, 2}, rng))}, 40);
}

TEST(OpsGradient, ReluGateAtZeroIsZero) {
  Tape tape;
  Var x = tape.leaf(Tensor({3}, std::vector<double>{0.0, 1.0, -1.0}), true);
  tape.backward(sum(relu(x)));
  EXPECT_EQ(tape.grad(x).storage(), (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(OpsGradient, BilinearUpAndDown) {
  std::mt19937_64 rng(23);
  OpBuilder up = [](Tape&, const std::vector<Var>& v) { return bilinear_resize(v[0], 7, 9); };
  expect_gradients_match(up, {random_tensor({3, 4, 2}, rng)}, 41);
  OpBuilder down = [](Tape&, const std::vector<Var>& v) { return bilinear_resize(v[0], 2, 3); };
  expect_gradients_match(down, {random_tensor({6, 8, 1}, rng)}, 42);
}

TEST(OpsGradient, AddAffineSumWeightedMean) {
  std::mt19937_64 rng(24);
  OpBuilder op = [](Tape&, const std::vector<Var>& v) { return affine(add(v[0], v[1]), -1.7, 0.3); };
  expect_gradients_match(op, {random_tensor({2, 3, 2}, rng), random_tensor({2, 3, 2}, rng)}, 43);
  OpBuilder s = [](Tape&, const std::vector<Var>& v) { return sum(v[0]); };
  expect_gradients_match(s, {random_tensor({4}, rng)}, 44);
  OpBuilder m = [](Tape&, const std::vector<Var>& v) { return spatial_mean(v[0]); };
  expect_gradients_match(m, {random_tensor({3, 2, 4}, rng)}, 45);
}

TEST(OpsGradient, SoftmaxCrossEntropyWeightedAndUnweighted) {
  std::mt19937_64 rng(25);
  const std::vector<int> targets{0, 3, 1, 2, 2, 0};
  const std::vector<double> weights{1.0, 0.5, 2.0, 0.0, 1.5, 3.0};
  OpBuilder plain = [&](Tape&, const std::vector<Var>& v) { return softmax_cross_entropy(v[0], targets); };
  expect_gradients_match(plain, {random_tensor({2, 3, 4}, rng, -3, 3)}, 46);
  OpBuilder weighted = [&](Tape&, const std::vector<Var>& v) {
    return softmax_cross_entropy(v[0], targets, std::span<const double>(weights));
  };
  expect_gradients_match(weighted, {random_tensor({2, 3, 4}, rng, -3, 3)}, 47);
}

TEST(OpsGradient, LogL2Norm) {
  std::mt19937_64 rng(26);
  OpBuilder op = [](Tape&, const std::vector<Var>& v) { return log_l2_norm(v[0], 1e-12); };
  expect_gradients_match(op, {random_tensor({3, 2, 2}, rng)}, 48);
}

TEST(OpsGradient, ComposedGraphWithFanOut) {
  std::mt19937_64 rng(27);
  OpBuilder op = [](Tape&, const std::vector<Var>& v) {
    Var c = conv2d(v[0], v[1], v[2], 1, 1);
    Var r = relu(c);
    Var small = bilinear_resize(r, 2, 2);
    Var back = bilinear_resize(small, 4, 4);
    return add(add(back, r), c);
  };
  expect_gradients_match(op, {random_tensor({4, 4, 1}, rng), random_tensor({3, 3, 1, 2}, rng),
                              random_tensor({2}, rng)},
                         49, 1e-5);
}

TEST(TapeTest, RepeatedBackwardResetsGradients) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, std::vector<double>{1.0, 2.0}), true);
  Var s = sum(x);
  const std::vector<double> w{3.0, -1.0};
  Var ws = weighted_sum(x, w);
  tape.backward(s);
  EXPECT_EQ(tape.grad(x).storage(), (std::vector<double>{1.0, 1.0}));
  tape.backward(ws);
  EXPECT_EQ(tape.grad(x).storage(), (std::vector<double>{3.0, -1.0}));
  tape.backward(s);
  EXPECT_EQ(tape.grad(x).storage(), (std::vector<double>{1.0, 1.0}));
}

TEST(TapeTest, UnreachableAndFrozenNodesHaveZeroGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, 1.0), true);
  Var frozen = tape.leaf(Tensor({2}, 1.0), false);
  Var other = tape.leaf(Tensor({2}, 1.0), true);
  tape.backward(sum(add(x, frozen)));
  EXPECT_EQ(tape.grad(frozen).storage(), (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(tape.grad(other).storage(), (std::vector<double>{0.0, 0.0}));
}

TEST(TapeTest, BackwardRequiresScalarLoss) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, 1.0), true);
  EXPECT_THROW(tape.backward(x), ShapeError);
}

TEST(TapeTest, RejectsForeignVars) {
  Tape a, b;
  Var x = a.leaf(Tensor({2}, 1.0), true);
  Var y = b.leaf(Tensor({2}, 1.0), true);
  EXPECT_THROW(add(x, y), UsageError);
}

}  // namespace
}  // namespace segadv::tensor
