#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdmd/analytic.hpp"
#include "rdmd/data.hpp"
#include "rdmd/diffusion.hpp"
#include "rdmd/networks.hpp"
#include "rdmd/schedule.hpp"
#include "rdmd/trainer.hpp"

namespace rdmd {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::size_t line = 0, std::string key = {});
  std::size_t line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

enum class TargetKind { gaussian, eight_gaussians };

struct DataSection {
  TargetKind target = TargetKind::eight_gaussians;
  EightGaussians geometry{};
  double target_std = 1.5;
  std::size_t n_samples = 5000;
};

struct RdmdSection {
  RdmdConfig train{};
  std::vector<double> lambdas{0.0, 0.05, 0.2, 1.0, 10.0};
  std::string generator = "mlp";
  double init_r = 1.0;
  double init_alpha = 0.0;
};

struct EvalSection {
  std::size_t n_samples = 5000;
  std::size_t projections = 128;
  std::size_t crossing_subsample = 1000;
  std::size_t ode_steps = 64;
};

struct SurfaceSection {
  double r_min = 0.5;
  double r_max = 2.5;
  double alpha_min = -3.141592653589793;
  double alpha_max = 3.141592653589793;
  std::size_t grid = 64;
  std::vector<double> lambdas{0.0, 0.2};
  SurfaceWeight weight = SurfaceWeight::inverse_horizon;
  std::size_t intervals = 256;
};

struct OutputSection {
  std::string dir = "out";
  bool record_wallclock = false;
};

// Resolved experiment configuration. Text form:
//
//   seed = 7
//   [section]
//   key = value      # comment
//
// Unknown sections and keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  NoiseSchedule schedule{};
  NetConfig network{};
  // network.sigma_data as written; empty means "auto", the per-coordinate
  // std of the target law. resolve() stores the effective value in network.
  std::optional<double> sigma_data{};
  DataSection data{};
  DsmConfig dsm{};
  RdmdSection rdmd{};
  EvalSection eval{};
  SurfaceSection surface{};
  OutputSection output{};

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  // Canonical text; parse(to_text()) reproduces this config.
  std::string to_text() const;
  // Per-coordinate std of the configured target law.
  double data_std() const;
  // Hash of the model-defining sections (schedule + network).
  std::uint64_t model_hash() const;

  // Propagates seed and output settings into the nested trainer configs and
  // validates; call after changing fields programmatically.
  void resolve();
  void validate() const;
};

std::string format_double(double v);
std::string format_hash(std::uint64_t h);
std::string target_kind_name(TargetKind k);

}  // namespace rdmd
