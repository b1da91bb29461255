#include "rdmd/diffusion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace rdmd {

void DsmConfig::validate() const {
  if (batch == 0) throw std::invalid_argument("DsmConfig: batch must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("DsmConfig: lr must be positive");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw std::invalid_argument("DsmConfig: ema_decay must be in [0, 1)");
  if (log_every == 0) throw std::invalid_argument("DsmConfig: log_every must be positive");
  if (sigma_law == SigmaLaw::log_normal && !(log_normal_std > 0.0)) {
    throw std::invalid_argument("DsmConfig: log_normal_std must be positive");
  }
}

Tensor perturb(const Tensor& x0, double sigma, const Tensor& eps) {
  std::vector<double> s(x0.rows(), sigma);
  return perturb(x0, s, eps);
}

Tensor perturb(const Tensor& x0, std::span<const double> sigmas, const Tensor& eps) {
  if (x0.shape() != eps.shape()) throw ShapeError("perturb", x0.shape(), eps.shape());
  if (sigmas.size() != x0.rows()) throw ShapeError("perturb(sigmas)", x0.shape(), Shape{sigmas.size()});
  Tensor out(x0.shape());
  const std::size_t c = x0.cols();
  for (std::size_t r = 0; r < x0.rows(); ++r)
    for (std::size_t k = 0; k < c; ++k) out[r * c + k] = x0[r * c + k] + sigmas[r] * eps[r * c + k];
  return out;
}

double draw_sigma(SigmaLaw law, const DsmConfig& config, const NoiseSchedule& schedule, Rng& rng) {
  const double lo = std::log(schedule.sigma_min);
  const double hi = std::log(schedule.sigma_max);
  if (law == SigmaLaw::log_uniform) return std::exp(lo + (hi - lo) * rng.uniform());
  const double u = config.log_normal_mean + config.log_normal_std * rng.normal();
  return std::exp(std::clamp(u, lo, hi));
}

double loss_weight(LossWeight weight, double sigma, double sigma_data) {
  switch (weight) {
    case LossWeight::inverse_sigma2:
      return 1.0 / (sigma * sigma);
    case LossWeight::uniform:
      return 1.0;
    case LossWeight::balanced:
      return 1.0 / (sigma * sigma) + 1.0 / (sigma_data * sigma_data);
  }
  return 1.0;
}

namespace {

void check_batch(const Tensor& batch, std::span<const double> sigmas, const Tensor& eps) {
  if (batch.rank() != 2 || batch.rows() == 0) throw std::invalid_argument("dsm_loss: empty batch");
  if (batch.shape() != eps.shape()) throw ShapeError("dsm_loss", batch.shape(), eps.shape());
  if (sigmas.size() != batch.rows()) throw ShapeError("dsm_loss(sigmas)", batch.shape(), Shape{sigmas.size()});
}

}  // namespace

Var dsm_loss(Graph& g, const DenoiserNet& net, std::span<const Var> bound, const Tensor& batch,
             std::span<const double> sigmas, const Tensor& eps, LossWeight weight, double sigma_data) {
  check_batch(batch, sigmas, eps);
  const std::size_t n = batch.rows(), d = batch.cols();
  Var x0 = g.constant(batch);
  Var xt = g.constant(perturb(batch, sigmas, eps));
  Var diff = sub(net.forward(g, xt, sigmas, bound), x0);
  Var row_sq = matmul(mul(diff, diff), g.constant(Tensor({d, 1}, 1.0)));
  Tensor w({n, 1});
  for (std::size_t r = 0; r < n; ++r) w[r] = loss_weight(weight, sigmas[r], sigma_data);
  return mean(mul(row_sq, g.constant(std::move(w))));
}

double dsm_loss(const DenoiserNet& net, const Tensor& batch, std::span<const double> sigmas, const Tensor& eps,
                LossWeight weight, double sigma_data) {
  return dsm_loss(static_cast<const Denoiser&>(net), batch, sigmas, eps, weight, sigma_data);
}

double dsm_loss(const Denoiser& denoiser, const Tensor& batch, std::span<const double> sigmas, const Tensor& eps,
                LossWeight weight, double sigma_data) {
  check_batch(batch, sigmas, eps);
  const Tensor d = denoiser.denoise(perturb(batch, sigmas, eps), sigmas);
  const std::size_t c = batch.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double e = d[r * c + k] - batch[r * c + k];
      s += e * e;
    }
    total += loss_weight(weight, sigmas[r], sigma_data) * s;
  }
  return total / static_cast<double>(batch.rows());
}

DsmResult train_dsm(const DsmConfig& config, const DataSampler& sampler, DenoiserNet initial) {
  config.validate();
  const NoiseSchedule& schedule = initial.schedule();
  DenoiserNet net = std::move(initial);
  ParamSet ema = net.params();
  AdamState opt;
  Rng root(config.seed);
  Rng data_rng = root.split("dsm.data");
  Rng noise_rng = root.split("dsm.noise");

  DsmResult result{net, {}};
  const auto start = std::chrono::steady_clock::now();
  double window = 0.0;
  std::size_t window_n = 0;
  std::vector<double> sigmas(config.batch);
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    Tensor x0 = sampler(config.batch, data_rng);
    for (auto& s : sigmas) s = draw_sigma(config.sigma_law, config, schedule, noise_rng);
    Tensor eps(x0.shape());
    noise_rng.fill_normal(eps.values());

    Graph g;
    auto bound = net.params().bind(g, true);
    Var loss = dsm_loss(g, net, bound, x0, sigmas, eps, config.weight, net.config().sigma_data);
    const double lv = loss.value().item();
    if (!std::isfinite(lv)) {
      std::ostringstream msg;
      msg << "train_dsm: non-finite loss at iteration " << it << " (sigma draws in [" 
          << *std::min_element(sigmas.begin(), sigmas.end()) << ", "
          << *std::max_element(sigmas.begin(), sigmas.end()) << "])";
      throw TrainingError(msg.str());
    }
    Gradients grads = g.backward(loss);
    std::vector<Tensor> gl;
    gl.reserve(bound.size());
    for (const auto& v : bound) gl.push_back(grads[v]);
    adam_step(net.params().tensors, gl, opt, config.lr);

    if (config.ema_decay > 0.0) {
      for (std::size_t p = 0; p < ema.tensors.size(); ++p) {
        double* e = ema.tensors[p].data();
        const double* w = net.params().tensors[p].data();
        for (std::size_t k = 0; k < ema.tensors[p].numel(); ++k) e[k] = config.ema_decay * e[k] + (1.0 - config.ema_decay) * w[k];
      }
    }

    window += lv;
    ++window_n;
    if (it % config.log_every == 0 || it == config.iterations) {
      LossRecord rec;
      rec.iteration = it;
      rec.loss = window / static_cast<double>(window_n);
      if (config.record_wallclock) {
        rec.wallclock_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
      result.log.push_back(rec);
      window = 0.0;
      window_n = 0;
    }
  }
  if (config.ema_decay > 0.0) net.params() = std::move(ema);
  result.net = std::move(net);
  return result;
}

std::vector<double> karras_grid(const NoiseSchedule& schedule, std::size_t steps, double rho) {
  if (steps < 1) throw std::invalid_argument("karras_grid: need at least one step");
  std::vector<double> grid(steps + 1);
  const double a = std::pow(schedule.sigma_max, 1.0 / rho);
  const double b = std::pow(schedule.sigma_min, 1.0 / rho);
  for (std::size_t i = 0; i <= steps; ++i) {
    grid[i] = std::pow(a + static_cast<double>(i) / static_cast<double>(steps) * (b - a), rho);
  }
  grid.front() = schedule.sigma_max;
  grid.back() = schedule.sigma_min;
  return grid;
}

Tensor pf_ode_integrate(const Denoiser& denoiser, const NoiseSchedule& schedule, Tensor x, const OdeOptions& options) {
  if (options.steps < 2) throw std::invalid_argument("pf_ode: steps must be >= 2");
  const auto grid = karras_grid(schedule, options.steps, options.rho);
  const std::size_t n = x.rows();
  std::vector<double> s(n);
  auto velocity = [&](const Tensor& state, double t) {
    std::fill(s.begin(), s.end(), t);
    const Tensor d = denoiser.denoise(state, s);
    // -g^2/2 * score = -t * (x - D) / t^2
    Tensor v(state.shape());
    for (std::size_t i = 0; i < v.numel(); ++i) v[i] = (state[i] - d[i]) / t;
    return v;
  };
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t0 = grid[i], t1 = grid[i + 1];
    const double h = t1 - t0;
    const Tensor v0 = velocity(x, t0);
    Tensor x1 = x;
    for (std::size_t k = 0; k < x1.numel(); ++k) x1[k] += h * v0[k];
    const Tensor v1 = velocity(x1, t1);
    for (std::size_t k = 0; k < x.numel(); ++k) x[k] += 0.5 * h * (v0[k] + v1[k]);
    if (!x.all_finite()) throw TrainingError("pf_ode: non-finite state at step " + std::to_string(i));
  }
  return x;
}

Tensor pf_ode_sample(const Denoiser& denoiser, const NoiseSchedule& schedule, std::size_t n, const OdeOptions& options,
                     std::uint64_t seed) {
  Rng rng = Rng(seed).split("pf_ode.prior");
  Tensor x({n, denoiser.dim()});
  rng.fill_normal(x.values());
  for (auto& v : x.values()) v *= schedule.sigma_max;
  return pf_ode_integrate(denoiser, schedule, std::move(x), options);
}

}  // namespace rdmd
