#include <gtest/gtest.h>

#include <cmath>

#include "retts/error.hpp"
#include "retts/gradcheck.hpp"
#include "retts/ops.hpp"
#include "retts/rng.hpp"

using namespace retts;

namespace {

Tensor randn(Shape shape, std::uint64_t seed) {
  RngStream rng(seed, "test");
  return rng_normal(rng, std::move(shape));
}

std::function<Tensor(const Tensor&)> weighted(std::function<Tensor(const Tensor&)> f, Shape out_shape) {
  Tensor w = randn(std::move(out_shape), 99);
  return [f, w](const Tensor& x) { return sum(mul(f(x), w)); };
}

}  // namespace

TEST(Tensor, RejectsZeroExtents) {
  EXPECT_THROW(Tensor::zeros({3, 0}), DimensionError);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(Tensor, BackwardNeedsScalar) {
  Tensor x = Tensor::full({2}, 1.0).set_requires_grad(true);
  EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
}

TEST(Tensor, GradientsAccumulateAcrossUses) {
  Tensor x = Tensor::from({2}, {1.0, -2.0}).set_requires_grad(true);
  backward(sum(add(mul(x, x), scale(x, 3.0))));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0 * 1.0 + 3.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2.0 * -2.0 + 3.0);
}

TEST(Tensor, NoGradGuardRecordsNothing) {
  Tensor x = Tensor::full({2}, 1.0).set_requires_grad(true);
  Tensor y;
  {
    NoGradGuard guard;
    y = scale(x, 2.0);
  }
  EXPECT_FALSE(y.requires_grad());
}

TEST(Ops, MatmulMatchesLoop) {
  const Tensor a = randn({2, 3, 4}, 1);
  const Tensor b = randn({4, 5}, 2);
  const Tensor c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 3, 5}));
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 4; ++k) acc += a.data()[n * 12 + i * 4 + k] * b.data()[k * 5 + j];
        EXPECT_NEAR(c.data()[n * 15 + i * 5 + j], acc, 1e-12);
      }
    }
  }
}

TEST(Ops, SoftmaxRowsSumToOne) {
  const Tensor p = softmax_lastdim(randn({4, 7}, 3));
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) s += p.at(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, MaskedSoftmaxZeroesMaskedEntries) {
  const Tensor x = randn({2, 3}, 4);
  const Tensor p = masked_softmax_lastdim(x, {false, true, false, true, true, false});
  EXPECT_EQ(p.at(0, 1), 0.0);
  EXPECT_EQ(p.at(1, 0), 0.0);
  EXPECT_EQ(p.at(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(p.at(1, 2), 1.0);
  EXPECT_THROW(masked_softmax_lastdim(x, {true, true, true, false, false, false}), ContractError);
}

TEST(Ops, SoftmaxRejectsNonFinite) {
  Tensor x = Tensor::from({1, 2}, {0.0, std::nan("")});
  EXPECT_THROW(softmax_lastdim(x), NumericError);
}

TEST(Ops, LayerNormNormalizes) {
  const Tensor x = randn({3, 6}, 5);
  const Tensor y = layer_norm(x, Tensor::full({6}, 1.0), Tensor::zeros({6}));
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 6; ++c) mean += y.at(r, c) / 6.0;
    for (std::size_t c = 0; c < 6; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean) / 6.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(Ops, Conv1dMatchesLoop) {
  const Tensor x = randn({7, 3}, 6);
  const Tensor w = randn({5, 3, 2}, 7);
  const Tensor b = randn({2}, 8);
  const std::size_t stride = 2, pad = 2;
  const Tensor y = conv1d(x, w, b, stride, pad);
  const std::size_t out_t = (7 + 2 * pad - 5) / stride + 1;
  ASSERT_EQ(y.shape(), (Shape{out_t, 2}));
  for (std::size_t t = 0; t < out_t; ++t) {
    for (std::size_t o = 0; o < 2; ++o) {
      double acc = b.at(o);
      for (std::size_t k = 0; k < 5; ++k) {
        const long src = static_cast<long>(t * stride + k) - static_cast<long>(pad);
        if (src < 0 || src >= 7) continue;
        for (std::size_t c = 0; c < 3; ++c) acc += x.at(static_cast<std::size_t>(src), c) * w.data()[(k * 3 + c) * 2 + o];
      }
      EXPECT_NEAR(y.at(t, o), acc, 1e-12);
    }
  }
}

TEST(Ops, GradientsMatchFiniteDifferences) {
  const Tensor x = randn({3, 4}, 10);
  const Tensor w = randn({4, 2}, 11);
  const Tensor g = randn({4}, 12);
  const Tensor b = randn({4}, 13);
  EXPECT_LT(grad_check(weighted([&](const Tensor& v) { return matmul(v, w); }, {3, 2}), x), 1e-6);
  EXPECT_LT(grad_check(weighted([](const Tensor& v) { return softmax_lastdim(v); }, {3, 4}), x), 1e-6);
  EXPECT_LT(grad_check(weighted([](const Tensor& v) { return log_softmax_lastdim(v); }, {3, 4}), x), 1e-6);
  EXPECT_LT(grad_check(weighted([&](const Tensor& v) { return layer_norm(v, g, b); }, {3, 4}), x), 1e-6);
  EXPECT_LT(grad_check(weighted([](const Tensor& v) { return transpose(v); }, {4, 3}), x), 1e-6);
  EXPECT_LT(grad_check(weighted([](const Tensor& v) { return exp(v); }, {3, 4}), x), 1e-6);
  EXPECT_LT(grad_check(weighted([](const Tensor& v) { return leaky_relu(v, 0.2); }, {3, 4}), x), 1e-6);
  EXPECT_LT(grad_check(weighted([&](const Tensor& v) { return pairwise_neg_sq_dist(v, x); }, {3, 3}), x), 1e-6);
  const std::vector<std::size_t> idx{2, 0, 2};
  EXPECT_LT(grad_check(weighted([&](const Tensor& v) { return gather_rows(v, idx); }, {3, 4}), x), 1e-6);
  EXPECT_LT(grad_check(weighted([](const Tensor& v) { return concat_cols({v, slice_cols(v, 1, 3)}); }, {3, 6}), x),
            1e-6);
  EXPECT_LT(grad_check([&](const Tensor& v) { return l1_loss(v, scale(x, 0.5)); }, x), 1e-6);
}

TEST(Ops, DropoutIsInvertedAndSeeded) {
  const Tensor x = Tensor::full({1000}, 1.0);
  RngStream a(1, "d"), b(1, "d");
  const Tensor ya = dropout(x, 0.25, a);
  const Tensor yb = dropout(x, 0.25, b);
  EXPECT_EQ(ya.to_vector(), yb.to_vector());
  std::size_t kept = 0;
  for (double v : ya.data()) {
    if (v != 0.0) {
      EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
      ++kept;
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1000.0, 0.75, 0.05);
}

namespace {

// x^3 with a backward that is off by `error` (relative).
Tensor skewed_cube(const Tensor& x, double error) {
  std::vector<double> values;
  for (double v : x.data()) values.push_back(v * v * v);
  Tensor in = x;
  return detail::make_result(x.shape(), std::move(values), {x}, [in, error](const detail::Node& out) {
    auto& node = *in.node();
    node.ensure_grad();
    for (std::size_t i = 0; i < node.data.size(); ++i) {
      node.grad[i] += out.grad[i] * 3.0 * node.data[i] * node.data[i] * (1.0 + error);
    }
  });
}

}  // namespace

TEST(GradCheck, DetectsSmallBackwardErrors) {
  const Tensor x = randn({2, 3}, 20);
  EXPECT_LT(grad_check([](const Tensor& v) { return sum(skewed_cube(v, 0.0)); }, x), 1e-7);
  EXPECT_GT(grad_check([](const Tensor& v) { return sum(skewed_cube(v, 1e-3)); }, x), 5e-4);
  // a large loss offset raises the rounding bound but not above real errors
  EXPECT_GT(grad_check([](const Tensor& v) { return add_scalar(sum(skewed_cube(v, 1e-3)), 100.0); }, x), 5e-4);
}

TEST(GradCheck, ExactZeroGradientAgainstRoundingNoise) {
  // d/db of (b - c) + (c - b) is exactly zero; the difference sees only rounding
  const Tensor b = randn({1}, 21);
  const Tensor c = randn({1}, 22);
  EXPECT_EQ(grad_check([&](const Tensor& v) { return add(sum(sub(v, c)), sum(sub(scale(c, 1.0), v))); }, b), 0.0);
}
