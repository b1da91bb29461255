#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdmd/adam.hpp"
#include "rdmd/autodiff.hpp"
#include "rdmd/networks.hpp"
#include "rdmd/rng.hpp"
#include "rdmd/schedule.hpp"
#include "rdmd/tensor.hpp"

namespace rdmd {

enum class SigmaLaw { log_uniform, log_normal };
// balanced = 1/sigma^2 + 1/sigma_data^2, which makes the irreducible loss of a
// N(0, sigma_data^2) law the same at every noise level.
enum class LossWeight { inverse_sigma2, uniform, balanced };

struct DsmConfig {
  SigmaLaw sigma_law = SigmaLaw::log_uniform;
  // Parameters of ln(sigma) for the log-normal law; draws are clamped to the schedule.
  double log_normal_mean = -1.2;
  double log_normal_std = 1.2;
  // balanced takes sigma_data from the network config.
  LossWeight weight = LossWeight::balanced;
  std::size_t batch = 1024;
  std::size_t iterations = 100000;
  double lr = 1e-4;
  // Polyak averaging of parameters for the returned net; 0 disables it.
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
  std::size_t log_every = 100;
  bool record_wallclock = false;

  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossRecord {
  std::size_t iteration = 0;
  double loss = 0.0;
  double wallclock_ms = 0.0;
};

using DataSampler = std::function<Tensor(std::size_t n, Rng& rng)>;

// x0 + sigma * eps, one sigma per row.
Tensor perturb(const Tensor& x0, double sigma, const Tensor& eps);
Tensor perturb(const Tensor& x0, std::span<const double> sigmas, const Tensor& eps);

double draw_sigma(SigmaLaw law, const DsmConfig& config, const NoiseSchedule& schedule, Rng& rng);
double loss_weight(LossWeight weight, double sigma, double sigma_data = 1.0);

// Weighted mean over rows of ||D(x0 + sigma eps, sigma) - x0||^2.
Var dsm_loss(Graph& g, const DenoiserNet& net, std::span<const Var> bound, const Tensor& batch,
             std::span<const double> sigmas, const Tensor& eps, LossWeight weight, double sigma_data = 1.0);
double dsm_loss(const DenoiserNet& net, const Tensor& batch, std::span<const double> sigmas, const Tensor& eps,
                LossWeight weight, double sigma_data = 1.0);

// Same loss for an arbitrary denoiser (used with closed-form posterior means).
double dsm_loss(const Denoiser& denoiser, const Tensor& batch, std::span<const double> sigmas, const Tensor& eps,
                LossWeight weight, double sigma_data = 1.0);

struct DsmResult {
  DenoiserNet net;
  std::vector<LossRecord> log;
};

DsmResult train_dsm(const DsmConfig& config, const DataSampler& sampler, DenoiserNet initial);

struct OdeOptions {
  std::size_t steps = 64;
  double rho = 7.0;
};

// Decreasing noise grid from T to sigma_min with steps + 1 points.
std::vector<double> karras_grid(const NoiseSchedule& schedule, std::size_t steps, double rho = 7.0);

// Heun integration of dx/dt = -g^2(t)/2 * score(x, t) from T down to sigma_min.
Tensor pf_ode_integrate(const Denoiser& denoiser, const NoiseSchedule& schedule, Tensor x_start,
                        const OdeOptions& options);
Tensor pf_ode_sample(const Denoiser& denoiser, const NoiseSchedule& schedule, std::size_t n,
                     const OdeOptions& options, std::uint64_t seed);

}  // namespace rdmd
