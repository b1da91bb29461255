#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rdmd/adam.hpp"
#include "rdmd/diffusion.hpp"
#include "rdmd/networks.hpp"
#include "rdmd/tensor.hpp"

namespace rdmd {

enum class OmegaMode { dmd_normalized, sigma_squared };

struct RdmdConfig {
  double lambda = 0.2;
  double sigma_init = 1.0;
  double generator_lr = 2e-5;
  double fake_lr = 1e-4;
  std::size_t fake_steps = 1;
  std::size_t batch = 1024;
  std::size_t iterations = 100000;
  // Noise levels for both updates are log-uniform on [t_min, t_max].
  double t_min = 0.1;
  double t_max = 40.0;
  OmegaMode omega = OmegaMode::dmd_normalized;
  LossWeight fake_weight = LossWeight::balanced;
  std::uint64_t seed = 0;
  std::size_t eval_every = 500;
  bool record_wallclock = false;
  // Abort when the smoothed fake loss stays above factor x its initial value
  // for `divergence_patience` consecutive iterations.
  double divergence_factor = 10.0;
  std::size_t divergence_patience = 500;

  void validate() const;
};

// Noise draws for one batch. `weights` scales each sample's contribution to
// the generator objective (empty means all ones).
struct NoiseDraws {
  std::vector<double> sigmas;
  Tensor eps;
  std::vector<double> weights;
};

NoiseDraws sample_draws(std::size_t n, std::size_t dim, double t_min, double t_max, Rng& rng);

struct RdmdLogRecord {
  std::size_t iteration = 0;
  double fake_loss = 0.0;
  double transport_cost_rms = 0.0;
  double transport_cost_sq = 0.0;
  // NaN when no target reference set is supplied.
  double energy_distance = 0.0;
  double wallclock_ms = 0.0;
};

struct TrainState {
  std::unique_ptr<Generator> generator;
  // Absent: the fake score is the exact pushforward law of a linear
  // generator applied to the N(0, I) source.
  std::optional<DenoiserNet> fake;
  std::shared_ptr<const Denoiser> target;
  AdamState generator_opt;
  AdamState fake_opt;
  std::size_t iteration = 0;
  std::vector<RdmdLogRecord> log;
};

// Generator = copy of the target at sigma_init, fake = copy of the target.
TrainState make_distillation_state(std::shared_ptr<const DenoiserNet> target, double sigma_init);
// Linear generator against any target, fake score in closed form.
TrainState make_linear_state(std::shared_ptr<const Denoiser> target, LinearGenerator generator);

double omega_weight(OmegaMode mode, double sigma, std::span<const double> d_target, std::span<const double> g_out);

// D of the current fake model (network or closed-form pushforward).
Tensor fake_denoise(const TrainState& state, const Tensor& y, std::span<const double> sigmas);

struct GeneratorStep {
  std::vector<Tensor> grads;
  double surrogate = 0.0;
  double cost_sq = 0.0;
};

// Backpropagates <stopgrad[w * omega * (s_fake - s_target)], G(x)> + lambda ||x - G(x)||^2
// averaged over the batch, with scores taken at G(x) + sigma * eps.
GeneratorStep generator_gradient(const TrainState& state, double lambda, OmegaMode omega, const Tensor& x,
                                 const NoiseDraws& draws);

// One DSM step of the fake net on current generator outputs; returns the loss.
double fake_update(TrainState& state, const Tensor& x, const NoiseDraws& draws, double lr, LossWeight weight);

struct EvalSet {
  Tensor source;
  std::optional<Tensor> target_reference;
};

RdmdLogRecord evaluate_generator(const Generator& generator, const EvalSet& eval);

void train_rdmd(const RdmdConfig& config, const DataSampler& source, TrainState& state,
                const std::optional<EvalSet>& eval = std::nullopt);

}  // namespace rdmd
