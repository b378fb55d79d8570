#include "retts/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "retts/error.hpp"
#include "retts/rng.hpp"

namespace retts {

namespace detail {

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   BackwardFn fn) {
  Tensor out = Tensor::from(std::move(shape), std::move(values));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const Tensor& t : inputs) any = any || wants_grad(t);
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const Tensor& t : inputs) {
    if (wants_grad(t)) node.parents.push_back(t.node());
  }
  node.backward = std::move(fn);
  return out;
}

Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs,
                   BackwardFn fn) {
  return make_result(std::move(shape), std::move(values), std::vector<Tensor>(inputs),
                     std::move(fn));
}

}  // namespace detail

namespace {

using detail::make_result;
using detail::Node;
using detail::wants_grad;

std::vector<double>& grad_of(const Tensor& t) {
  t.node()->ensure_grad();
  return t.node()->grad;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_matrix(const Tensor& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(x.shape()));
  }
}

void require_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
  return make_result(x.shape(), std::move(out), {x}, [x, df](const Node& o) {
    auto& gx = grad_of(x);
    auto xd = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * df(xd[i], o.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](const Node& o) {
    for (const Tensor* t : {&a, &b}) {
      if (!wants_grad(*t)) continue;
      auto& g = grad_of(*t);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](const Node& o) {
    if (wants_grad(a)) {
      auto& g = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (wants_grad(b)) {
      auto& g = grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](const Node& o) {
    if (wants_grad(a)) {
      auto& g = grad_of(a);
      auto bd = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bd[i];
    }
    if (wants_grad(b)) {
      auto& g = grad_of(b);
      auto ad = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * ad[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor add_row(const Tensor& x, const Tensor& row) {
  if (x.rank() == 0) throw DimensionError("add_row: scalar input");
  const std::size_t cols = x.shape().back();
  if (row.numel() != cols) {
    throw DimensionError("add_row: row " + shape_str(row.shape()) + " does not match last extent of " +
                         shape_str(x.shape()));
  }
  auto xd = x.data();
  auto rd = row.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] + rd[i % cols];
  return make_result(x.shape(), std::move(out), {x, row}, [x, row, cols](const Node& o) {
    if (wants_grad(x)) {
      auto& g = grad_of(x);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (wants_grad(row)) {
      auto& g = grad_of(row);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % cols] += o.grad[i];
    }
  });
}

namespace {

struct BatchPlan {
  Shape out_batch;
  std::vector<std::size_t> a_offsets;  // in matrices, not elements
  std::vector<std::size_t> b_offsets;
};

BatchPlan plan_batches(const Shape& a_batch, const Shape& b_batch, const Tensor& a,
                       const Tensor& b) {
  const std::size_t rank = std::max(a_batch.size(), b_batch.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a_batch.begin(), a_batch.end(), pa.begin() + (rank - a_batch.size()));
  std::copy(b_batch.begin(), b_batch.end(), pb.begin() + (rank - b_batch.size()));
  BatchPlan plan;
  plan.out_batch.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw DimensionError("matmul: batch extents not broadcastable: " + shape_str(a.shape()) +
                           " x " + shape_str(b.shape()));
    }
    plan.out_batch[i] = std::max(pa[i], pb[i]);
  }
  const std::size_t count = shape_numel(plan.out_batch);
  plan.a_offsets.resize(count);
  plan.b_offsets.resize(count);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t n = 0; n < count; ++n) {
    std::size_t ao = 0, bo = 0;
    for (std::size_t i = 0; i < rank; ++i) {
      ao = ao * pa[i] + (pa[i] == 1 ? 0 : idx[i]);
      bo = bo * pb[i] + (pb[i] == 1 ? 0 : idx[i]);
    }
    plan.a_offsets[n] = ao;
    plan.b_offsets[n] = bo;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < plan.out_batch[i]) break;
      idx[i] = 0;
    }
  }
  return plan;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul: operands must have rank >= 2, got " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  const std::size_t p = a.shape()[a.rank() - 2];
  const std::size_t q = a.shape().back();
  const std::size_t q2 = b.shape()[b.rank() - 2];
  const std::size_t r = b.shape().back();
  if (q != q2) {
    throw DimensionError("matmul: inner extents differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  BatchPlan plan = plan_batches(a_batch, b_batch, a, b);

  Shape out_shape = plan.out_batch;
  out_shape.push_back(p);
  out_shape.push_back(r);
  std::vector<double> out(shape_numel(out_shape), 0.0);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t n = 0; n < plan.a_offsets.size(); ++n) {
    const double* A = ad.data() + plan.a_offsets[n] * p * q;
    const double* B = bd.data() + plan.b_offsets[n] * q * r;
    double* C = out.data() + n * p * r;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t k = 0; k < q; ++k) {
        const double aik = A[i * q + k];
        if (aik == 0.0) continue;
        const double* Brow = B + k * r;
        double* Crow = C + i * r;
        for (std::size_t j = 0; j < r; ++j) Crow[j] += aik * Brow[j];
      }
    }
  }
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [a, b, plan, p, q, r](const Node& o) {
                       auto ad = a.data();
                       auto bd = b.data();
                       const bool ga = wants_grad(a);
                       const bool gb = wants_grad(b);
                       double* dA_all = ga ? grad_of(a).data() : nullptr;
                       double* dB_all = gb ? grad_of(b).data() : nullptr;
                       for (std::size_t n = 0; n < plan.a_offsets.size(); ++n) {
                         const double* A = ad.data() + plan.a_offsets[n] * p * q;
                         const double* B = bd.data() + plan.b_offsets[n] * q * r;
                         const double* dC = o.grad.data() + n * p * r;
                         if (ga) {
                           double* dA = dA_all + plan.a_offsets[n] * p * q;
                           for (std::size_t i = 0; i < p; ++i) {
                             for (std::size_t k = 0; k < q; ++k) {
                               double acc = 0.0;
                               for (std::size_t j = 0; j < r; ++j) acc += dC[i * r + j] * B[k * r + j];
                               dA[i * q + k] += acc;
                             }
                           }
                         }
                         if (gb) {
                           double* dB = dB_all + plan.b_offsets[n] * q * r;
                           for (std::size_t i = 0; i < p; ++i) {
                             for (std::size_t k = 0; k < q; ++k) {
                               const double aik = A[i * q + k];
                               if (aik == 0.0) continue;
                               for (std::size_t j = 0; j < r; ++j) dB[k * r + j] += aik * dC[i * r + j];
                             }
                           }
                         }
                       }
                     });
}

Tensor transpose(const Tensor& x) {
  require_matrix(x, "transpose");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = xd[i * cols + j];
  return make_result({cols, rows}, std::move(out), {x}, [x, rows, cols](const Node& o) {
    auto& g = grad_of(x);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) g[i * cols + j] += o.grad[j * rows + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  return make_result(std::move(shape), x.to_vector(), {x}, [x](const Node& o) {
    auto& g = grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({}, {total}, {x}, [x](const Node& o) {
    auto& g = grad_of(x);
    for (double& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  const double n = static_cast<double>(x.numel());
  return make_result({}, {total / n}, {x}, [x, n](const Node& o) {
    auto& g = grad_of(x);
    for (double& v : g) v += o.grad[0] / n;
  });
}

namespace {

// Shared kernel for the three softmax flavours. Masked entries (mask[i] true)
// are excluded and receive probability exactly zero.
Tensor softmax_impl(const Tensor& x, const std::vector<bool>* mask, bool log_output) {
  if (x.rank() == 0) throw DimensionError("softmax: scalar input");
  auto xd = x.data();
  require_finite(xd, "softmax");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = xd.size() / cols;
  std::vector<double> out(xd.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * cols;
    double* y = out.data() + r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask && (*mask)[r * cols + c]) continue;
      mx = std::max(mx, in[c]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ContractError("softmax: row " + std::to_string(r) + " is fully masked");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask && (*mask)[r * cols + c]) continue;
      total += std::exp(in[c] - mx);
    }
    const double log_total = std::log(total);
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask && (*mask)[r * cols + c]) {
        y[c] = log_output ? -std::numeric_limits<double>::infinity() : 0.0;
        continue;
      }
      y[c] = log_output ? in[c] - mx - log_total : std::exp(in[c] - mx) / total;
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [x, cols, rows, log_output](const Node& o) {
    auto& g = grad_of(x);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = o.data.data() + r * cols;
      const double* gy = o.grad.data() + r * cols;
      double* gx = g.data() + r * cols;
      if (log_output) {
        double gsum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) gsum += gy[c];
        for (std::size_t c = 0; c < cols; ++c) {
          if (std::isinf(y[c])) continue;
          gx[c] += gy[c] - std::exp(y[c]) * gsum;
        }
      } else {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += gy[c] * y[c];
        for (std::size_t c = 0; c < cols; ++c) gx[c] += y[c] * (gy[c] - dot);
      }
    }
  });
}

}  // namespace

Tensor softmax_lastdim(const Tensor& x) { return softmax_impl(x, nullptr, false); }

Tensor log_softmax_lastdim(const Tensor& x) { return softmax_impl(x, nullptr, true); }

Tensor masked_softmax_lastdim(const Tensor& x, const std::vector<bool>& mask) {
  if (mask.size() != x.numel()) {
    throw DimensionError("masked_softmax: mask has " + std::to_string(mask.size()) +
                         " entries for tensor " + shape_str(x.shape()));
  }
  return softmax_impl(x, &mask, false);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t cols = x.shape().back();
  if (gain.numel() != cols || bias.numel() != cols) {
    throw DimensionError("layer_norm: gain/bias extent does not match " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / cols;
  auto xd = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  std::vector<double> out(xd.size());
  std::vector<double> xhat(xd.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += in[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (in[c] - mu) * inv_std[r];
      xhat[r * cols + c] = h;
      out[r * cols + c] = h * gd[c] + bd[c];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [x, gain, bias, cols, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node& o) {
        auto gd = gain.data();
        if (wants_grad(gain)) {
          auto& gg = grad_of(gain);
          for (std::size_t i = 0; i < o.grad.size(); ++i) gg[i % cols] += o.grad[i] * xhat[i];
        }
        if (wants_grad(bias)) {
          auto& gb = grad_of(bias);
          for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i % cols] += o.grad[i];
        }
        if (wants_grad(x)) {
          auto& gx = grad_of(x);
          const double n = static_cast<double>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_g = 0.0, mean_gh = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double gh = o.grad[r * cols + c] * gd[c];
              mean_g += gh;
              mean_gh += gh * xhat[r * cols + c];
            }
            mean_g /= n;
            mean_gh /= n;
            for (std::size_t c = 0; c < cols; ++c) {
              const double gh = o.grad[r * cols + c] * gd[c];
              gx[r * cols + c] += inv_std[r] * (gh - mean_g - xhat[r * cols + c] * mean_gh);
            }
          }
        }
      });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require_matrix(x, "conv1d");
  if (weight.rank() != 3) throw DimensionError("conv1d: weight must be [K, Cin, Cout]");
  const std::size_t T = x.dim(0), cin = x.dim(1);
  const std::size_t K = weight.dim(0), cout = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw DimensionError("conv1d: input " + shape_str(x.shape()) + " vs weight " +
                         shape_str(weight.shape()));
  }
  if (bias.defined() && bias.numel() != cout) throw DimensionError("conv1d: bias extent");
  if (stride == 0) throw ContractError("conv1d: stride must be >= 1");
  if (T + 2 * pad < K) throw DimensionError("conv1d: sequence shorter than kernel");
  const std::size_t T_out = (T + 2 * pad - K) / stride + 1;

  auto xd = x.data();
  auto wd = weight.data();
  std::vector<double> out(T_out * cout, 0.0);
  for (std::size_t t = 0; t < T_out; ++t) {
    double* y = out.data() + t * cout;
    if (bias.defined()) {
      auto bd = bias.data();
      std::copy(bd.begin(), bd.end(), y);
    }
    for (std::size_t k = 0; k < K; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(pad);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      const double* in = xd.data() + static_cast<std::size_t>(src) * cin;
      for (std::size_t c = 0; c < cin; ++c) {
        const double v = in[c];
        if (v == 0.0) continue;
        const double* w = wd.data() + (k * cin + c) * cout;
        for (std::size_t o = 0; o < cout; ++o) y[o] += v * w[o];
      }
    }
  }
  return make_result(
      {T_out, cout}, std::move(out), {x, weight, bias},
      [x, weight, bias, T, cin, K, cout, T_out, stride, pad](const Node& o) {
        auto xd = x.data();
        auto wd = weight.data();
        const bool gx_on = wants_grad(x);
        const bool gw_on = wants_grad(weight);
        double* gx = gx_on ? grad_of(x).data() : nullptr;
        double* gw = gw_on ? grad_of(weight).data() : nullptr;
        if (wants_grad(bias)) {
          auto& gb = grad_of(bias);
          for (std::size_t t = 0; t < T_out; ++t)
            for (std::size_t c = 0; c < cout; ++c) gb[c] += o.grad[t * cout + c];
        }
        for (std::size_t t = 0; t < T_out; ++t) {
          const double* gy = o.grad.data() + t * cout;
          for (std::size_t k = 0; k < K; ++k) {
            const std::ptrdiff_t src =
                static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
            const std::size_t s = static_cast<std::size_t>(src);
            for (std::size_t c = 0; c < cin; ++c) {
              const double* w = wd.data() + (k * cin + c) * cout;
              if (gx_on) {
                double acc = 0.0;
                for (std::size_t oc = 0; oc < cout; ++oc) acc += gy[oc] * w[oc];
                gx[s * cin + c] += acc;
              }
              if (gw_on) {
                const double v = xd[s * cin + c];
                if (v == 0.0) continue;
                double* gwr = gw + (k * cin + c) * cout;
                for (std::size_t oc = 0; oc < cout; ++oc) gwr[oc] += v * gy[oc];
              }
            }
          }
        }
      });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  if (begin >= end || end > x.dim(0)) throw DimensionError("slice_rows: bad range");
  const std::size_t cols = x.dim(1);
  auto xd = x.data();
  std::vector<double> out(xd.begin() + begin * cols, xd.begin() + end * cols);
  return make_result({end - begin, cols}, std::move(out), {x}, [x, begin, cols](const Node& o) {
    auto& g = grad_of(x);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[begin * cols + i] += o.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  if (begin >= end || end > x.dim(1)) throw DimensionError("slice_cols: bad range");
  const std::size_t rows = x.dim(0), cols = x.dim(1), width = end - begin;
  auto xd = x.data();
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(xd.begin() + r * cols + begin, width, out.begin() + r * width);
  return make_result({rows, width}, std::move(out), {x}, [x, begin, rows, cols, width](const Node& o) {
    auto& g = grad_of(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < width; ++c) g[r * cols + begin + c] += o.grad[r * width + c];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t cols = parts.front().dim(1);
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.dim(1) != cols) throw DimensionError("concat_rows: column extents differ");
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result({rows, cols}, std::move(out), parts, [parts](const Node& o) {
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
      const std::size_t n = p.numel();
      if (wants_grad(p)) {
        auto& g = grad_of(p);
        for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[offset + i];
      }
      offset += n;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts.front().dim(0);
  std::size_t cols = 0;
  for (const Tensor& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.dim(0) != rows) throw DimensionError("concat_cols: row extents differ");
    cols += p.dim(1);
  }
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.dim(1);
    auto pd = p.data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pd.begin() + r * w, w, out.begin() + r * cols + offset);
    offset += w;
  }
  return make_result({rows, cols}, std::move(out), parts, [parts, rows, cols](const Node& o) {
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
      const std::size_t w = p.dim(1);
      if (wants_grad(p)) {
        auto& g = grad_of(p);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < w; ++c) g[r * w + c] += o.grad[r * cols + offset + c];
      }
      offset += w;
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_matrix(x, "gather_rows");
  if (index.empty()) throw ContractError("gather_rows: empty index");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  auto xd = x.data();
  std::vector<double> out(index.size() * cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw InputError("gather_rows: index " + std::to_string(index[i]) + " out of range");
    std::copy_n(xd.begin() + index[i] * cols, cols, out.begin() + i * cols);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result({idx.size(), cols}, std::move(out), {x}, [x, idx, cols](const Node& o) {
    auto& g = grad_of(x);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) g[idx[i] * cols + c] += o.grad[i * cols + c];
  });
}

Tensor pairwise_neg_sq_dist(const Tensor& a, const Tensor& b) {
  require_matrix(a, "pairwise_neg_sq_dist");
  require_matrix(b, "pairwise_neg_sq_dist");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("pairwise_neg_sq_dist: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t T = a.dim(0), N = b.dim(0), D = a.dim(1);
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(T * N);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < N; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < D; ++k) {
        const double diff = ad[t * D + k] - bd[j * D + k];
        d2 += diff * diff;
      }
      out[t * N + j] = -d2;
    }
  return make_result({T, N}, std::move(out), {a, b}, [a, b, T, N, D](const Node& o) {
    auto ad = a.data();
    auto bd = b.data();
    const bool ga = wants_grad(a), gb = wants_grad(b);
    double* gA = ga ? grad_of(a).data() : nullptr;
    double* gB = gb ? grad_of(b).data() : nullptr;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < N; ++j) {
        const double g = o.grad[t * N + j];
        for (std::size_t k = 0; k < D; ++k) {
          const double diff = ad[t * D + k] - bd[j * D + k];
          if (ga) gA[t * D + k] -= 2.0 * g * diff;
          if (gb) gB[j * D + k] += 2.0 * g * diff;
        }
      }
  });
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  return mean(square(sub(prediction, target)));
}

Tensor l1_loss(const Tensor& prediction, const Tensor& target) {
  return mean(abs(sub(prediction, target)));
}

Tensor dropout(const Tensor& x, double p, RngStream& rng) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: probability must be in [0, 1)");
  if (p == 0.0) return x;
  std::vector<double> keep(x.numel());
  const double scale_kept = 1.0 / (1.0 - p);
  for (double& k : keep) k = rng.uniform() >= p ? scale_kept : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(keep)));
}

}  // namespace retts
