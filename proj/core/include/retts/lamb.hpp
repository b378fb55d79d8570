#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "retts/tensor.hpp"
#include "retts/train_config.hpp"

namespace retts {

struct LambConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 1e-6;
  double trust_clip = 10.0;  // upper clamp on ||param|| in the trust ratio

  static LambConfig from(const TrainConfig& cfg);
};

struct LambSlot {
  std::vector<double> m;
  std::vector<double> v;
};

struct LambState {
  std::uint64_t step = 0;
  std::vector<LambSlot> slots;  // parallel to the parameter list

  bool operator==(const LambState& other) const;
};

/// One layer-wise adaptive update over every tensor in `params`, reading each
/// tensor's grad (absent grad counts as zero):
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   u  = m_hat / (sqrt(v_hat) + eps) + weight_decay * w
///   w <- w - lr * r * u,  r = min(||w||, trust_clip) / ||u||  (1 if either is 0)
/// Throws NumericError, leaving params and state untouched, if any gradient
/// is non-finite.
void lamb_step(std::span<Tensor> params, LambState& state, double lr, const LambConfig& cfg);

/// Rescales grads so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

struct PolySchedule {
  double peak = 0.1;
  double power = 0.5;
  std::uint64_t warmup = 1000;
  std::uint64_t total = 80000;
};

/// Linear warmup from 0 to peak, then peak * (1 - progress)^power, 0 past total.
double poly_lr(std::uint64_t step, const PolySchedule& schedule);

}  // namespace retts
