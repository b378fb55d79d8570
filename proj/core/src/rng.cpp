#include "retts/rng.hpp"

#include <cmath>
#include <numbers>

#include "retts/error.hpp"

namespace retts {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string stream_id, std::uint64_t counter)
    : seed_(seed),
      stream_id_(std::move(stream_id)),
      key_(splitmix64(splitmix64(seed) ^ fnv1a(stream_id_))),
      counter_(counter) {}

std::uint64_t RngStream::peek(std::uint64_t index) const {
  return splitmix64(key_ ^ splitmix64(index));
}

std::uint64_t RngStream::next_u64() { return peek(counter_++); }

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RngStream::uniform_int(std::size_t n) {
  if (n == 0) throw ContractError("uniform_int: empty range");
  const auto v = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return v < n ? v : n - 1;
}

Tensor rng_normal(RngStream& stream, Shape shape, double stddev) {
  const std::size_t n = shape_numel(shape);
  std::vector<double> values(n);
  for (double& v : values) v = stddev * stream.normal();
  return Tensor::from(std::move(shape), std::move(values));
}

}  // namespace retts
