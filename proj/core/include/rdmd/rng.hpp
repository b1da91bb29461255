#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace rdmd {

// Counter-based generator: output i is a fixed 64-bit mix of (key, i). The
// mixing constants live here so any reimplementation reproduces the stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1].
  double uniform_open0();
  double normal();
  void fill_normal(std::span<double> out);
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Independent substream keyed by a label; does not advance this stream.
  Rng split(std::string_view label) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace rdmd
