#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "retts/tensor.hpp"

namespace retts {

/// Counter-based random stream. The value of draw i depends only on
/// (seed, stream_id, i), so a stream can be checkpointed as its counter and
/// two streams with different ids never share a sequence.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string stream_id, std::uint64_t counter = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal (Box-Muller; consumes two draws).
  double normal();
  /// Uniform integer in [0, n).
  std::size_t uniform_int(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t seed() const { return seed_; }
  const std::string& stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t counter) { counter_ = counter; }

  /// Value of draw `index` without touching the counter.
  std::uint64_t peek(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::string stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Tensor of i.i.d. N(0, stddev^2) draws taken from `stream` in row-major order.
Tensor rng_normal(RngStream& stream, Shape shape, double stddev = 1.0);

}  // namespace retts
