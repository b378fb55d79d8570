#pragma once

#include <functional>

#include "retts/tensor.hpp"

namespace retts {

/// Largest coordinate-wise relative error between the reverse-mode gradient
/// of f at x and a central finite difference with step eps:
///   |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
/// Coordinates whose gap is within the rounding error of the difference
/// itself, 8 * machine_eps * max(1, |f|) / eps, count as agreeing.
/// f must return a scalar and must not depend on hidden mutable state.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps = 1e-5);

/// Same measure, taken with respect to a tensor f closes over (typically a
/// parameter). The tensor's values are perturbed in place and restored; its
/// grad buffer is cleared afterwards.
double grad_check_captured(const std::function<Tensor()>& f, Tensor target, double eps = 1e-5);

}  // namespace retts
