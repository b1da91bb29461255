#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "rdmd/networks.hpp"
#include "rdmd/schedule.hpp"

namespace rdmd {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File layout: a plain-text manifest terminated by a line "payload", then the
// parameter arrays back to back as little-endian float64, in manifest order.
struct Checkpoint {
  static constexpr int format_version = 1;

  // "denoiser", "generator.mlp" or "generator.linear"
  std::string kind;
  NetConfig network{};
  NoiseSchedule schedule{};
  std::size_t iteration = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  double sigma_init = 0.0;
  // Regularization weight the generator was trained with (0 for denoisers).
  double lambda = 0.0;
  ParamSet params;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws CheckpointError on malformed files, payload corruption, or when
// `expected_hash` is given and differs from the stored config hash.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_hash = std::nullopt);

std::string checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes, std::optional<std::uint64_t> expected_hash = std::nullopt);

Checkpoint make_checkpoint(const DenoiserNet& net, std::size_t iteration, std::uint64_t seed, std::uint64_t config_hash);
Checkpoint make_checkpoint(const Generator& generator, const NoiseSchedule& schedule, std::size_t iteration,
                           std::uint64_t seed, std::uint64_t config_hash);

DenoiserNet denoiser_from(const Checkpoint& ckpt);
std::unique_ptr<Generator> generator_from(const Checkpoint& ckpt);

}  // namespace rdmd
