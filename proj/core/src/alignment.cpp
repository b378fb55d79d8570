#include "retts/alignment.hpp"

#include <cmath>
#include <limits>

#include "retts/error.hpp"
#include "retts/ops.hpp"

namespace retts {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::fabs(a - b)));
}

void require_alignable(const Tensor& log_probs, const char* op) {
  if (log_probs.rank() != 2) throw DimensionError(std::string(op) + ": log_probs must be [T, N]");
  if (log_probs.dim(0) < log_probs.dim(1)) {
    throw ContractError(std::string(op) + ": " + std::to_string(log_probs.dim(0)) +
                        " frames cannot cover " + std::to_string(log_probs.dim(1)) + " phonemes");
  }
}

}  // namespace

AlignerParams AlignerParams::init(std::size_t vocab, std::size_t n_mels, std::size_t align_dim,
                                  RngStream& rng) {
  AlignerParams p;
  p.text_embedding = rng_normal(rng, {vocab, align_dim}, 1.0).set_requires_grad(true);
  p.text_projection = Linear::init(align_dim, align_dim, rng);
  p.mel_projection = Linear::init(n_mels, align_dim, rng);
  return p;
}

void AlignerParams::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".text_embedding", text_embedding});
  text_projection.collect(prefix + ".text_projection", out);
  mel_projection.collect(prefix + ".mel_projection", out);
}

std::vector<double> AlignmentMatrix::probabilities() const {
  std::vector<double> p = log_probs.to_vector();
  for (double& v : p) v = std::exp(v);
  return p;
}

AlignmentMatrix soft_alignment(const Tensor& mel, const Tensor& phoneme_embedding,
                               const AlignerParams& params) {
  if (mel.rank() != 2 || phoneme_embedding.rank() != 2) {
    throw DimensionError("soft_alignment: expected [T, n_mels] and [N, d]");
  }
  if (mel.dim(0) < phoneme_embedding.dim(0)) {
    throw ContractError("soft_alignment: " + std::to_string(mel.dim(0)) + " frames cannot cover " +
                        std::to_string(phoneme_embedding.dim(0)) + " phonemes");
  }
  Tensor frames = params.mel_projection(mel);
  Tensor phones = params.text_projection(phoneme_embedding);
  return {log_softmax_lastdim(pairwise_neg_sq_dist(frames, phones))};
}

Tensor forward_sum_loss(const Tensor& log_probs) {
  require_alignable(log_probs, "forward_sum_loss");
  const std::size_t T = log_probs.dim(0), N = log_probs.dim(1);
  auto lp = log_probs.data();

  // alpha[t][j]: log-probability of all valid prefixes ending on phoneme j at t.
  std::vector<double> alpha(T * N, kNegInf);
  alpha[0] = lp[0];
  for (std::size_t t = 1; t < T; ++t) {
    // Phoneme j is reachable at t only if j <= t and N-1-j <= T-1-t.
    const std::size_t j_lo = (t + N > T) ? t + N - T : 0;
    const std::size_t j_hi = std::min(t, N - 1);
    for (std::size_t j = j_lo; j <= j_hi; ++j) {
      double prev = alpha[(t - 1) * N + j];
      if (j > 0) prev = log_add_exp(prev, alpha[(t - 1) * N + j - 1]);
      alpha[t * N + j] = prev == kNegInf ? kNegInf : prev + lp[t * N + j];
    }
  }
  const double log_total = alpha[T * N - 1];
  if (!std::isfinite(log_total)) throw NumericError("forward_sum_loss: no path has finite probability");

  return detail::make_result({}, {-log_total}, {log_probs}, [log_probs, alpha, T, N, log_total](const detail::Node& o) {
    auto lp = log_probs.data();
    // beta[t][j]: log-probability of all valid suffixes after being on j at t.
    std::vector<double> beta(T * N, kNegInf);
    beta[T * N - 1] = 0.0;
    for (std::size_t t = T - 1; t-- > 0;) {
      for (std::size_t j = 0; j < N; ++j) {
        double stay = beta[(t + 1) * N + j];
        stay = stay == kNegInf ? kNegInf : stay + lp[(t + 1) * N + j];
        double advance = kNegInf;
        if (j + 1 < N && beta[(t + 1) * N + j + 1] != kNegInf) {
          advance = beta[(t + 1) * N + j + 1] + lp[(t + 1) * N + j + 1];
        }
        beta[t * N + j] = log_add_exp(stay, advance);
      }
    }
    log_probs.node()->ensure_grad();
    auto& g = log_probs.node()->grad;
    for (std::size_t i = 0; i < T * N; ++i) {
      if (alpha[i] == kNegInf || beta[i] == kNegInf) continue;
      const double posterior = std::exp(alpha[i] + beta[i] - log_total);
      g[i] -= o.grad[0] * posterior;
    }
  });
}

std::vector<int> extract_durations(const Tensor& log_probs) {
  require_alignable(log_probs, "extract_durations");
  const std::size_t T = log_probs.dim(0), N = log_probs.dim(1);
  auto lp = log_probs.data();
  std::vector<double> best(T * N, kNegInf);
  best[0] = lp[0];
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < N && j <= t; ++j) {
      double prev = best[(t - 1) * N + j];
      if (j > 0) prev = std::max(prev, best[(t - 1) * N + j - 1]);
      if (prev != kNegInf) best[t * N + j] = prev + lp[t * N + j];
    }
  }
  if (best[T * N - 1] == kNegInf) throw NumericError("extract_durations: no finite path");

  // Optimal paths are closed under pointwise max, so preferring "stay" on
  // ties while backtracking picks the pointwise-largest optimal path: the one
  // whose transitions happen as early as possible.
  std::vector<int> durations(N, 0);
  std::size_t j = N - 1;
  for (std::size_t t = T - 1;; --t) {
    ++durations[j];
    if (t == 0) break;
    const double stay = best[(t - 1) * N + j];
    const double advance = j > 0 ? best[(t - 1) * N + j - 1] : kNegInf;
    if (advance > stay) --j;
  }
  return durations;
}

std::pair<std::vector<double>, std::vector<double>> pool_phoneme_prosody(
    const FrameProsody& frames, std::span<const int> durations) {
  if (frames.pitch.size() != frames.energy.size()) {
    throw InputError("pool_phoneme_prosody: pitch and energy tracks differ in length");
  }
  long total = 0;
  for (int d : durations) {
    if (d < 0) throw InputError("pool_phoneme_prosody: negative duration");
    total += d;
  }
  if (total != static_cast<long>(frames.pitch.size())) {
    throw InputError("pool_phoneme_prosody: durations sum to " + std::to_string(total) + " but " +
                     std::to_string(frames.pitch.size()) + " frames were given");
  }
  std::vector<double> pitch(durations.size(), 0.0), energy(durations.size(), 0.0);
  std::size_t t = 0;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const auto d = static_cast<std::size_t>(durations[i]);
    if (d == 0) continue;
    double ps = 0.0, es = 0.0;
    for (std::size_t k = 0; k < d; ++k, ++t) {
      ps += frames.pitch[t];
      es += frames.energy[t];
    }
    pitch[i] = ps / static_cast<double>(d);
    energy[i] = es / static_cast<double>(d);
  }
  return {pitch, energy};
}

}  // namespace retts
