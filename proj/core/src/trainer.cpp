#include "rdmd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rdmd/analytic.hpp"
#include "rdmd/data.hpp"

namespace rdmd {

void RdmdConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("RdmdConfig: lambda must be >= 0");
  if (!(generator_lr > 0.0) || !(fake_lr > 0.0)) throw std::invalid_argument("RdmdConfig: learning rates must be positive");
  if (fake_steps == 0) throw std::invalid_argument("RdmdConfig: fake_steps must be positive");
  if (batch == 0) throw std::invalid_argument("RdmdConfig: batch must be positive");
  if (!(t_min > 0.0) || !(t_max >= t_min)) throw std::invalid_argument("RdmdConfig: need 0 < t_min <= t_max");
  if (eval_every == 0) throw std::invalid_argument("RdmdConfig: eval_every must be positive");
  if (!(divergence_factor > 1.0) || divergence_patience == 0) throw std::invalid_argument("RdmdConfig: bad divergence detector");
}

NoiseDraws sample_draws(std::size_t n, std::size_t dim, double t_min, double t_max, Rng& rng) {
  NoiseDraws d;
  d.sigmas.resize(n);
  const double lo = std::log(t_min), hi = std::log(t_max);
  for (auto& s : d.sigmas) s = std::exp(lo + (hi - lo) * rng.uniform());
  d.eps = Tensor({n, dim});
  rng.fill_normal(d.eps.values());
  return d;
}

TrainState make_distillation_state(std::shared_ptr<const DenoiserNet> target, double sigma_init) {
  if (!target) throw std::invalid_argument("make_distillation_state: null target");
  TrainState st;
  st.generator = std::make_unique<GeneratorNet>(init_generator_from(*target, sigma_init));
  st.fake.emplace(*target);
  st.target = std::move(target);
  return st;
}

TrainState make_linear_state(std::shared_ptr<const Denoiser> target, LinearGenerator generator) {
  if (!target) throw std::invalid_argument("make_linear_state: null target");
  TrainState st;
  st.generator = std::make_unique<LinearGenerator>(std::move(generator));
  st.target = std::move(target);
  return st;
}

double omega_weight(OmegaMode mode, double sigma, std::span<const double> d_target, std::span<const double> g_out) {
  const double s2 = sigma * sigma;
  if (mode == OmegaMode::sigma_squared) return s2;
  if (d_target.size() != g_out.size()) throw ShapeError("omega_weight", Shape{d_target.size()}, Shape{g_out.size()});
  double l1 = 0.0;
  for (std::size_t k = 0; k < d_target.size(); ++k) l1 += std::abs(d_target[k] - g_out[k]);
  return s2 * static_cast<double>(d_target.size()) / std::max(l1, 1e-8);
}

Tensor fake_denoise(const TrainState& state, const Tensor& y, std::span<const double> sigmas) {
  if (state.fake) return state.fake->denoise(y, sigmas);
  const auto* linear = dynamic_cast<const LinearGenerator*>(state.generator.get());
  if (!linear) throw std::logic_error("fake_denoise: closed-form fake requires a linear generator");
  const Tensor a = linear->matrix();
  const auto d = static_cast<Eigen::Index>(linear->dim());
  Eigen::MatrixXd am(d, d);
  Eigen::VectorXd b(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    b(i) = linear->offset()[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) am(i, j) = a.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  // Perturbation of the pushforward adds sigma^2 I inside the denoiser; a
  // tiny floor keeps a rank-deficient A representable.
  Eigen::MatrixXd cov = am * am.transpose() + 1e-12 * Eigen::MatrixXd::Identity(d, d);
  return GaussianDenoiser(GaussianDist(b, 0.5 * (cov + cov.transpose()))).denoise(y, sigmas);
}

GeneratorStep generator_gradient(const TrainState& state, double lambda, OmegaMode omega, const Tensor& x,
                                 const NoiseDraws& draws) {
  const std::size_t n = x.rows(), d = x.cols();
  if (draws.sigmas.size() != n || draws.eps.shape() != x.shape()) throw ShapeError("generator_gradient", x.shape(), draws.eps.shape());
  if (!draws.weights.empty() && draws.weights.size() != n) throw ShapeError("generator_gradient(weights)", x.shape(), Shape{draws.weights.size()});

  Graph g;
  auto bound = state.generator->params().bind(g, true);
  Var xin = g.constant(x);
  Var gx = state.generator->forward(g, xin, bound);
  const Tensor& gv = gx.value();
  const Tensor y = perturb(gv, draws.sigmas, draws.eps);
  const Tensor d_target = state.target->denoise(y, draws.sigmas);
  const Tensor d_fake = fake_denoise(state, y, draws.sigmas);

  // s = (D - y) / sigma^2, so s_fake - s_target = (D_fake - D_target) / sigma^2
  Tensor coeff({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    const double s = draws.sigmas[r];
    const double w = omega_weight(omega, s, std::span(d_target.data() + r * d, d), std::span(gv.data() + r * d, d)) *
                     (draws.weights.empty() ? 1.0 : draws.weights[r]);
    for (std::size_t k = 0; k < d; ++k) {
      const double c = w * (d_fake[r * d + k] - d_target[r * d + k]) / (s * s);
      if (!std::isfinite(c)) {
        std::ostringstream msg;
        msg << "generator_gradient: non-finite score difference at batch index " << r << " (sigma " << s << ")";
        throw TrainingError(msg.str());
      }
      coeff[r * d + k] = c;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  Var matching = scale(sum(mul(gx, g.constant(std::move(coeff)))), inv_n);
  Var cost = scale(sum_of_squares(sub(gx, xin)), inv_n);
  Var objective = lambda > 0.0 ? add(matching, scale(cost, lambda)) : matching;

  GeneratorStep step;
  step.surrogate = objective.value().item();
  step.cost_sq = cost.value().item();
  Gradients grads = g.backward(objective);
  for (const auto& v : bound) step.grads.push_back(grads[v]);
  return step;
}

double fake_update(TrainState& state, const Tensor& x, const NoiseDraws& draws, double lr, LossWeight weight) {
  if (!state.fake) return 0.0;
  const Tensor targets = state.generator->apply(x);
  Graph g;
  auto bound = state.fake->params().bind(g, true);
  Var loss = dsm_loss(g, *state.fake, bound, targets, draws.sigmas, draws.eps, weight, state.fake->config().sigma_data);
  const double lv = loss.value().item();
  if (!std::isfinite(lv)) throw TrainingError("fake_update: non-finite fake loss");
  Gradients grads = g.backward(loss);
  std::vector<Tensor> gl;
  gl.reserve(bound.size());
  for (const auto& v : bound) gl.push_back(grads[v]);
  adam_step(state.fake->params().tensors, gl, state.fake_opt, lr);
  return lv;
}

RdmdLogRecord evaluate_generator(const Generator& generator, const EvalSet& eval) {
  RdmdLogRecord rec;
  PairSet pairs(eval.source, generator.apply(eval.source));
  rec.transport_cost_rms = transport_cost_rms(pairs);
  rec.transport_cost_sq = transport_cost_sq(pairs);
  rec.energy_distance = eval.target_reference ? energy_distance(pairs.outputs, *eval.target_reference)
                                              : std::numeric_limits<double>::quiet_NaN();
  return rec;
}

void train_rdmd(const RdmdConfig& config, const DataSampler& source, TrainState& state,
                const std::optional<EvalSet>& eval) {
  config.validate();
  if (!state.generator || !state.target) throw std::invalid_argument("train_rdmd: incomplete state");
  const std::size_t dim = state.generator->dim();
  Rng root(config.seed);
  Rng source_rng = root.split("rdmd.source");
  Rng noise_rng = root.split("rdmd.noise");
  const auto start = std::chrono::steady_clock::now();

  double initial_fake = std::numeric_limits<double>::quiet_NaN();
  double smoothed = 0.0;
  std::size_t over = 0;
  double window = 0.0;
  std::size_t window_n = 0;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    double fake_loss = 0.0;
    for (std::size_t k = 0; k < config.fake_steps; ++k) {
      const Tensor x = source(config.batch, source_rng);
      const NoiseDraws draws = sample_draws(config.batch, dim, config.t_min, config.t_max, noise_rng);
      fake_loss = fake_update(state, x, draws, config.fake_lr, config.fake_weight);
    }
    const Tensor x = source(config.batch, source_rng);
    const NoiseDraws draws = sample_draws(config.batch, dim, config.t_min, config.t_max, noise_rng);
    GeneratorStep step = generator_gradient(state, config.lambda, config.omega, x, draws);
    adam_step(state.generator->params().tensors, step.grads, state.generator_opt, config.generator_lr);
    ++state.iteration;

    if (state.fake) {
      if (std::isnan(initial_fake)) {
        initial_fake = fake_loss;
        smoothed = fake_loss;
      }
      smoothed = 0.98 * smoothed + 0.02 * fake_loss;
      over = smoothed > config.divergence_factor * initial_fake ? over + 1 : 0;
      if (over >= config.divergence_patience) {
        std::ostringstream msg;
        msg << "train_rdmd: diverged at iteration " << it << " (smoothed fake loss " << smoothed << ", initial "
            << initial_fake << ", lambda " << config.lambda << ")";
        throw TrainingError(msg.str());
      }
    }

    window += fake_loss;
    ++window_n;
    if (it % config.eval_every == 0 || it == config.iterations) {
      RdmdLogRecord rec;
      if (eval) {
        rec = evaluate_generator(*state.generator, *eval);
      } else {
        rec.transport_cost_sq = step.cost_sq;
        rec.transport_cost_rms = std::sqrt(step.cost_sq / static_cast<double>(dim));
        rec.energy_distance = std::numeric_limits<double>::quiet_NaN();
      }
      rec.iteration = state.iteration;
      rec.fake_loss = window / static_cast<double>(window_n);
      if (config.record_wallclock) {
        rec.wallclock_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
      state.log.push_back(rec);
      window = 0.0;
      window_n = 0;
    }
  }
}

}  // namespace rdmd
