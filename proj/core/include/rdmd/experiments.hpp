#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rdmd/analytic.hpp"
#include "rdmd/config.hpp"
#include "rdmd/networks.hpp"
#include "rdmd/report.hpp"
#include "rdmd/trainer.hpp"

namespace rdmd {

namespace fs = std::filesystem;

// Keeps large tensor buffers on the heap instead of a fresh mmap per
// allocation; training spends a third of its time in page faults otherwise.
// No-op outside glibc. Call once at startup.
void tune_allocator();

// Where the target score of an RDMD run comes from.
struct TargetSource {
  std::optional<fs::path> checkpoint;
  // "gaussian", "gaussian:<std>" or "8gaussians"
  std::optional<std::string> analytic;
};

struct ResolvedTarget {
  std::shared_ptr<const Denoiser> denoiser;
  // Set when the target is a trained network.
  std::shared_ptr<const DenoiserNet> net;
  std::string description;
};

ResolvedTarget resolve_target(const ExperimentConfig& config, const TargetSource& source);

// Reference samples of the configured target law.
Tensor sample_target(const ExperimentConfig& config, std::size_t n, Rng& rng);
DataSampler target_sampler(const ExperimentConfig& config);
// Closed-form denoiser of the configured target law.
std::shared_ptr<const Denoiser> target_oracle(const ExperimentConfig& config);

struct ScoreCheck {
  double sigma = 0.0;
  double denoiser_rel_l2 = 0.0;
  double score_rel_l2 = 0.0;
};

// Relative L2 errors of `model` against `oracle` on points drawn from the
// sigma-perturbed target law.
std::vector<ScoreCheck> score_check(const Denoiser& model, const Denoiser& oracle, const ExperimentConfig& config,
                                    std::span<const double> sigmas, std::size_t n, std::uint64_t seed);

struct TrainDiffusionResult {
  DenoiserNet net;
  std::vector<LossRecord> log;
  std::vector<ScoreCheck> checks;
};

// Writes config.resolved.ini, loss.csv, target.ckpt and validation.txt to `out`.
TrainDiffusionResult cmd_train_diffusion(const ExperimentConfig& config, const fs::path& out, std::ostream& log);

struct RdmdRunResult {
  std::unique_ptr<Generator> generator;
  std::vector<RdmdLogRecord> log;
  RdmdLogRecord final;
};

// Writes config.resolved.ini, training_log.csv, generator.ckpt, pairs.csv,
// pairs.svg and summary.txt to `out`.
RdmdRunResult cmd_train_rdmd(const ExperimentConfig& config, const TargetSource& target, const fs::path& out,
                             std::ostream& log);

struct SurfaceResult {
  double lambda = 0.0;
  SurfaceGrid grid;
  double r_argmin = 0.0;
  double alpha_argmin = 0.0;
  double min_total = 0.0;
};

SurfaceGrid surface_grid(const ExperimentConfig& config, double lambda);
// Writes surface_<lambda>.csv / .svg per lambda and surface_summary.csv.
std::vector<SurfaceResult> cmd_surface(const ExperimentConfig& config, const fs::path& out, std::ostream& log);

struct EvalReport {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double transport_cost_rms = 0.0;
  double energy_distance = 0.0;
  double sliced_w2 = 0.0;
  std::uint64_t crossing_count = 0;
};

EvalReport evaluate_checkpoint(const ExperimentConfig& config, const fs::path& checkpoint, std::uint64_t seed);
// Writes eval.txt and upserts the row keyed by (lambda, seed) into sweep.csv.
EvalReport cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint, std::uint64_t seed,
                    const fs::path& out, std::ostream& log);

// Renders a pair, sweep, loss, training-log or surface CSV as SVG.
std::string plot_csv(const fs::path& csv, const std::optional<Tensor>& target_reference = std::nullopt);
void cmd_plot(const fs::path& csv, const fs::path& svg, std::ostream& log);

// One train-rdmd + eval per lambda under out/lambda_<value>/, then sweep.csv
// and tradeoff.svg in out.
std::vector<EvalReport> cmd_sweep(const ExperimentConfig& config, const TargetSource& target,
                                  const std::vector<double>& lambdas, const fs::path& out, std::ostream& log);

std::string lambda_dir_name(double lambda);
std::string format_report(const EvalReport& r);

}  // namespace rdmd
