#include "retts/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "retts/error.hpp"

namespace retts {

namespace {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-12});
  return std::fabs(analytic - numeric) / denom;
}

// Largest error the central difference itself can carry from rounding f.
double rounding_bound(double f, double eps) {
  return 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(f)) / eps;
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor leaf = x.clone();
  leaf.set_requires_grad(true);
  return grad_check_captured([&] { return f(leaf); }, leaf, eps);
}

double grad_check_captured(const std::function<Tensor()>& f, Tensor target, double eps) {
  const bool was_required = target.requires_grad();
  target.set_requires_grad(true);
  target.zero_grad();
  Tensor out = f();
  if (out.numel() != 1) throw ContractError("grad_check: function must return a scalar");
  const double bound = rounding_bound(out.item(), eps);
  backward(out);
  std::vector<double> analytic(target.numel(), 0.0);
  if (target.has_grad()) {
    auto g = target.grad();
    std::copy(g.begin(), g.end(), analytic.begin());
  }
  target.zero_grad();

  NoGradGuard no_grad;
  double worst = 0.0;
  auto values = target.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = f().item();
    values[i] = saved - eps;
    const double down = f().item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    if (std::fabs(analytic[i] - numeric) <= bound) continue;
    worst = std::max(worst, relative_error(analytic[i], numeric));
  }
  target.set_requires_grad(was_required);
  return worst;
}

}  // namespace retts
