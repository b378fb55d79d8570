// Straight-line reference implementations used to pin the optimized code.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "retts/rng.hpp"
#include "retts/tensor.hpp"

namespace retts::oracle {

/// Calls visit(durations) for every split of T frames into N segments of at
/// least one frame, in lexicographic order of the duration vector.
inline void for_each_monotonic_path(std::size_t T, std::size_t N,
                                    const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> d(N, 1);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
    if (i + 1 == N) {
      d[i] = static_cast<int>(left);
      visit(d);
      return;
    }
    const std::size_t rest = N - i - 1;
    for (std::size_t k = 1; k + rest <= left; ++k) {
      d[i] = static_cast<int>(k);
      rec(i + 1, left - k);
    }
  };
  if (N >= 1 && T >= N) rec(0, T);
}

inline double path_score(const std::vector<double>& lp, std::size_t N, const std::vector<int>& d) {
  double s = 0.0;
  std::size_t t = 0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    for (int k = 0; k < d[j]; ++k, ++t) s += lp[t * N + j];
  }
  return s;
}

/// -log sum over paths of exp(path score), by enumeration.
inline double forward_sum(const std::vector<double>& lp, std::size_t T, std::size_t N) {
  std::vector<double> scores;
  for_each_monotonic_path(T, N, [&](const std::vector<int>& d) { scores.push_back(path_score(lp, N, d)); });
  const double hi = *std::max_element(scores.begin(), scores.end());
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - hi);
  return -(hi + std::log(acc));
}

/// Best path by enumeration; among exact ties, the lexicographically smallest
/// duration vector (the one that moves on to each next phoneme earliest).
inline std::vector<int> best_path(const std::vector<double>& lp, std::size_t T, std::size_t N) {
  std::vector<int> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for_each_monotonic_path(T, N, [&](const std::vector<int>& d) {
    const double s = path_score(lp, N, d);
    if (s > best_score) {
      best_score = s;
      best = d;
    }
  });
  return best;
}

inline std::vector<double> length_regulate(const std::vector<double>& h, std::size_t cols,
                                           const std::vector<int>& durations) {
  std::vector<double> out;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    for (int k = 0; k < durations[i]; ++k) {
      for (std::size_t c = 0; c < cols; ++c) out.push_back(h[i * cols + c]);
    }
  }
  return out;
}

inline std::vector<double> splice(const std::vector<double>& original, const std::vector<double>& segment,
                                  std::size_t cols, std::size_t left) {
  std::vector<double> out;
  for (std::size_t i = 0; i < left * cols; ++i) out.push_back(original[i]);
  for (double v : segment) out.push_back(v);
  for (std::size_t i = left * cols; i < original.size(); ++i) out.push_back(original[i]);
  return out;
}

/// Upper tail of the chi-square distribution with 2 degrees of freedom.
inline double chi2_sf_2dof(double x) { return std::exp(-x / 2.0); }

}  // namespace retts::oracle
