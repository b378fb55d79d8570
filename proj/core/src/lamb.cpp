#include "retts/lamb.hpp"

#include <algorithm>
#include <cmath>

#include "retts/error.hpp"

namespace retts {

LambConfig LambConfig::from(const TrainConfig& cfg) {
  return {cfg.beta1, cfg.beta2, cfg.lamb_eps, cfg.weight_decay, cfg.trust_clip};
}

bool LambState::operator==(const LambState& other) const {
  if (step != other.step || slots.size() != other.slots.size()) return false;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].m != other.slots[i].m || slots[i].v != other.slots[i].v) return false;
  }
  return true;
}

void lamb_step(std::span<Tensor> params, LambState& state, double lr, const LambConfig& cfg) {
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("lamb_step: non-finite gradient, step rejected");
    }
  }
  if (state.slots.empty()) {
    state.slots.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.slots[i].m.assign(params[i].numel(), 0.0);
      state.slots[i].v.assign(params[i].numel(), 0.0);
    }
  }
  if (state.slots.size() != params.size()) {
    throw ContractError("lamb_step: optimizer state tracks a different parameter list");
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  std::vector<double> update;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto w = p.mutable_data();
    auto& slot = state.slots[i];
    if (slot.m.size() != w.size()) throw ContractError("lamb_step: state/parameter extent mismatch");
    const bool has_grad = p.has_grad();
    auto g = has_grad ? p.grad() : std::span<const double>{};

    update.assign(w.size(), 0.0);
    double w_norm2 = 0.0, u_norm2 = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = has_grad ? g[k] : 0.0;
      slot.m[k] = cfg.beta1 * slot.m[k] + (1.0 - cfg.beta1) * gk;
      slot.v[k] = cfg.beta2 * slot.v[k] + (1.0 - cfg.beta2) * gk * gk;
      const double m_hat = slot.m[k] / bias1;
      const double v_hat = slot.v[k] / bias2;
      update[k] = m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * w[k];
      w_norm2 += w[k] * w[k];
      u_norm2 += update[k] * update[k];
    }
    const double w_norm = std::min(std::sqrt(w_norm2), cfg.trust_clip);
    const double u_norm = std::sqrt(u_norm2);
    const double ratio = (w_norm > 0.0 && u_norm > 0.0) ? w_norm / u_norm : 1.0;
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * ratio * update[k];
  }
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double total = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) total += g * g;
  }
  const double norm = std::sqrt(total);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Tensor& p : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

double poly_lr(std::uint64_t step, const PolySchedule& schedule) {
  if (step < schedule.warmup) {
    return schedule.peak * static_cast<double>(step) / static_cast<double>(schedule.warmup);
  }
  if (step >= schedule.total) return 0.0;
  const double progress = static_cast<double>(step - schedule.warmup) /
                          static_cast<double>(schedule.total - schedule.warmup);
  return schedule.peak * std::pow(1.0 - progress, schedule.power);
}

}  // namespace retts
