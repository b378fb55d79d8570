#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "retts/tensor.hpp"

namespace retts {

class RngStream;

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor neg(const Tensor& x);

/// x[..., C] + row[C], the row broadcast over every leading index.
Tensor add_row(const Tensor& x, const Tensor& row);

/// Batched matrix product a[..., p, q] x b[..., q, r]; leading batch extents
/// broadcast numpy-style (equal, or 1 on one side).
Tensor matmul(const Tensor& a, const Tensor& b);
/// Swaps the two axes of a matrix.
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);

/// Reductions to a scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);
/// Softmax over the last axis where entries with mask == true receive zero
/// weight. mask has one entry per element of x. A fully masked row is a
/// contract error.
Tensor masked_softmax_lastdim(const Tensor& x, const std::vector<bool>& mask);

/// Normalizes every last-axis slice, then applies gain/bias of extent C.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// x[T, Cin] convolved with weight[K, Cin, Cout] (+ bias[Cout]); zero padding
/// of `pad` frames on both ends. Output has (T + 2 pad - K) / stride + 1 rows.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
/// out[i, :] = x[index[i], :]; backward scatter-adds.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

/// out[t, j] = -||a[t] - b[j]||^2 for a[T, D], b[N, D].
Tensor pairwise_neg_sq_dist(const Tensor& a, const Tensor& b);

Tensor mse_loss(const Tensor& prediction, const Tensor& target);
/// Mean absolute difference.
Tensor l1_loss(const Tensor& prediction, const Tensor& target);

/// Inverted dropout: zeroes each element with probability p and rescales the
/// survivors by 1/(1-p). Identity when p == 0.
Tensor dropout(const Tensor& x, double p, RngStream& rng);

namespace detail {

using BackwardFn = std::function<void(const Node& out)>;

/// Builds an op result. When grad mode is on and any input requires grad the
/// result is attached to the tape with `fn` as its backward closure.
Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs,
                   BackwardFn fn);
Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   BackwardFn fn);

/// Accumulates into t's grad buffer when t takes part in differentiation.
inline bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

}  // namespace detail

}  // namespace retts
