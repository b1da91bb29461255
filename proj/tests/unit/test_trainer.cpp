#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rdmd/analytic.hpp"
#include "rdmd/trainer.hpp"
#include "testing.hpp"

using namespace rdmd;

namespace {

NetConfig tiny_config() {
  NetConfig c;
  c.encoder_dims = {4, 3};
  c.decoder_dims = {5, 2};
  c.embed_dim = 4;
  return c;
}

std::shared_ptr<const DenoiserNet> tiny_target(std::uint64_t seed) {
  Rng rng(seed);
  return std::make_shared<const DenoiserNet>(tiny_config(), NoiseSchedule{}, rng);
}

std::shared_ptr<const Denoiser> gaussian_target(double std) {
  return std::make_shared<GaussianDenoiser>(GaussianDist::isotropic(2, std * std));
}

DataSampler source() {
  return [](std::size_t n, Rng& rng) { return sample_source_gaussian(n, rng); };
}

// Exact-moment design: x and eps range over (+-1, +-1), all 16 combinations.
// Each Simpson node of the surface integral gets one copy of the design with
// per-sample weights turning the batch mean into the quadrature sum.
struct Design {
  Tensor x;
  NoiseDraws draws;
};

Design surface_design(const SurfaceOptions& opt) {
  const std::size_t nodes = opt.intervals + 1;
  const std::size_t n = 16 * nodes;
  Design d{Tensor({n, 2}), {}};
  d.draws.eps = Tensor({n, 2});
  const double lo = std::log(opt.schedule.sigma_min), hi = std::log(opt.schedule.sigma_max);
  const double h = (hi - lo) / static_cast<double>(opt.intervals);
  const double signs[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  std::size_t row = 0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double t = std::exp(lo + h * static_cast<double>(k));
    const double c = (k == 0 || k == opt.intervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const double q = c * h / 3.0 * surface_weight(opt.weight, t, opt.schedule) * t;
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b, ++row) {
        d.x.at(row, 0) = signs[a][0];
        d.x.at(row, 1) = signs[a][1];
        d.draws.eps.at(row, 0) = signs[b][0];
        d.draws.eps.at(row, 1) = signs[b][1];
        d.draws.sigmas.push_back(t);
        // sigma_squared omega multiplies by t^2; undo it so only q remains.
        d.draws.weights.push_back(q * static_cast<double>(nodes) / (t * t));
      }
    }
  }
  return d;
}

}  // namespace

TEST(Trainer, OmegaWeights) {
  const std::vector<double> dt{1.0, -2.0}, g{0.5, 0.0};
  EXPECT_DOUBLE_EQ(omega_weight(OmegaMode::sigma_squared, 3.0, dt, g), 9.0);
  // sigma^2 * d / ||D_target - G||_1 = 4 * 2 / 2.5
  EXPECT_DOUBLE_EQ(omega_weight(OmegaMode::dmd_normalized, 2.0, dt, g), 3.2);
  EXPECT_DOUBLE_EQ(omega_weight(OmegaMode::dmd_normalized, 1.0, g, g), 2.0 / 1e-8);
}

TEST(Trainer, DrawsAreLogUniformInRange) {
  Rng rng(1);
  const NoiseDraws d = sample_draws(5000, 2, 0.1, 40.0, rng);
  double mean_log = 0.0;
  for (double s : d.sigmas) {
    ASSERT_GE(s, 0.1);
    ASSERT_LE(s, 40.0);
    mean_log += std::log(s) / 5000.0;
  }
  EXPECT_NEAR(mean_log, 0.5 * (std::log(0.1) + std::log(40.0)), 0.06);
  EXPECT_EQ(d.eps.shape(), (Shape{5000, 2}));
}

TEST(Trainer, FakeEqualToTargetGivesExactlyZeroStep) {
  TrainState st = make_distillation_state(tiny_target(2), 1.0);
  const ParamSet before = st.generator->params();
  Rng rng(3);
  const Tensor x = sample_source_gaussian(64, rng);
  const NoiseDraws draws = sample_draws(64, 2, 0.1, 40.0, rng);
  for (auto mode : {OmegaMode::dmd_normalized, OmegaMode::sigma_squared}) {
    const GeneratorStep step = generator_gradient(st, 0.0, mode, x, draws);
    for (const auto& g : step.grads)
      for (double v : g.values()) ASSERT_EQ(v, 0.0);
    adam_step(st.generator->params().tensors, step.grads, st.generator_opt, 2e-5);
    EXPECT_EQ(st.generator->params(), before);
  }
}

TEST(Trainer, SurrogateGradientMatchesFiniteDifferences) {
  // With the stop-gradient coefficients frozen, the surrogate is an ordinary
  // function of the generator parameters.
  TrainState st = make_distillation_state(tiny_target(4), 1.0);
  Rng init(5);
  st.fake.emplace(tiny_config(), NoiseSchedule{}, init);
  Rng rng(6);
  const Tensor x = sample_source_gaussian(5, rng);
  const NoiseDraws draws = sample_draws(5, 2, 0.1, 40.0, rng);
  const double lambda = 0.3;
  const GeneratorStep step = generator_gradient(st, lambda, OmegaMode::dmd_normalized, x, draws);

  // Recover the frozen coefficients by differentiating once with lambda = 0.
  const Tensor gx = st.generator->apply(x);
  const Tensor y = perturb(gx, draws.sigmas, draws.eps);
  const Tensor dt = st.target->denoise(y, draws.sigmas), df = st.fake->denoise(y, draws.sigmas);
  Tensor coeff({5, 2});
  for (std::size_t r = 0; r < 5; ++r) {
    const double s = draws.sigmas[r];
    const double w = omega_weight(OmegaMode::dmd_normalized, s, std::span(dt.data() + 2 * r, 2), std::span(gx.data() + 2 * r, 2));
    for (std::size_t k = 0; k < 2; ++k) coeff.at(r, k) = w * (df.at(r, k) - dt.at(r, k)) / (s * s);
  }
  auto surrogate = [&](const ParamSet& ps) {
    GeneratorNet g(DenoiserNet(tiny_config(), NoiseSchedule{}, ps), 1.0);
    const Tensor out = g.apply(x);
    double m = 0.0, c = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) {
      m += coeff[i] * out[i];
      c += (out[i] - x[i]) * (out[i] - x[i]);
    }
    return (m + lambda * c) / 5.0;
  };
  EXPECT_NEAR(step.surrogate, surrogate(st.generator->params()), 1e-12);
  for (std::size_t i = 0; i < step.grads.size(); ++i) {
    auto f = [&](const Tensor& t) {
      ParamSet ps = st.generator->params();
      ps.tensors[i] = t;
      return surrogate(ps);
    };
    const Tensor numeric = support::numeric_gradient(f, st.generator->params().tensors[i]);
    EXPECT_LE(support::relative_error(step.grads[i], numeric), 1e-5) << st.generator->params().names[i];
  }
}

TEST(Trainer, LinearGradientMatchesSurfaceDerivative) {
  // Generator gradient on an exact-moment design reproduces the derivative of
  // the closed-form surface with respect to (r, alpha).
  SurfaceOptions opt;
  const Design design = surface_design(opt);
  for (double lambda : {0.0, 0.2}) {
    for (auto [r, alpha] : {std::pair{1.2, 0.4}, std::pair{0.7, -2.0}, std::pair{2.1, 1.0}}) {
      TrainState st = make_linear_state(gaussian_target(opt.target_std), LinearGenerator::rot_scale(r, alpha));
      const GeneratorStep step = generator_gradient(st, lambda, OmegaMode::sigma_squared, design.x, design.draws);
      // grads[0] is d/dW with W = A^T.
      const Tensor& gw = step.grads[0];
      const double c = std::cos(alpha), s = std::sin(alpha);
      const double da_dr[2][2] = {{c, -s}, {s, c}};
      const double da_dalpha[2][2] = {{-r * s, -r * c}, {r * c, -r * s}};
      double gr = 0.0, galpha = 0.0;
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          gr += gw.at(j, i) * da_dr[i][j];
          galpha += gw.at(j, i) * da_dalpha[i][j];
        }
      }
      const double h = 1e-5;
      const double fr = (rdmd_surface(r + h, alpha, lambda, opt).total - rdmd_surface(r - h, alpha, lambda, opt).total) / (2 * h);
      const double fa = (rdmd_surface(r, alpha + h, lambda, opt).total - rdmd_surface(r, alpha - h, lambda, opt).total) / (2 * h);
      EXPECT_LE(std::abs(gr - fr), 1e-3 * std::max(1.0, std::abs(fr))) << "r " << r << " alpha " << alpha;
      EXPECT_LE(std::abs(galpha - fa), 1e-3 * std::max(1.0, std::abs(fa))) << "r " << r << " alpha " << alpha;
      for (double v : step.grads[1].values()) EXPECT_NEAR(v, 0.0, 1e-12);
    }
  }
}

TEST(Trainer, ClosedFormFakeIsPushforwardDenoiser) {
  TrainState st = make_linear_state(gaussian_target(1.5), LinearGenerator::rot_scale(0.8, 0.3));
  Rng rng(7);
  const Tensor y = support::random_tensor({10, 2}, rng, 3.0);
  const std::vector<double> s(10, 0.7);
  const Tensor d = fake_denoise(st, y, s);
  for (std::size_t i = 0; i < d.numel(); ++i) EXPECT_NEAR(d[i], y[i] * 0.64 / (0.64 + 0.49), 1e-11);
  EXPECT_EQ(fake_update(st, y, sample_draws(10, 2, 0.1, 1.0, rng), 1e-3, LossWeight::uniform), 0.0);
}

TEST(Trainer, FakeUpdateLowersFakeLoss) {
  TrainState st = make_distillation_state(tiny_target(8), 1.0);
  Rng rng(9);
  const Tensor x = sample_source_gaussian(128, rng);
  const NoiseDraws draws = sample_draws(128, 2, 0.1, 40.0, rng);
  const double first = fake_update(st, x, draws, 1e-2, LossWeight::inverse_sigma2);
  double last = first;
  for (int i = 0; i < 50; ++i) last = fake_update(st, x, draws, 1e-2, LossWeight::inverse_sigma2);
  EXPECT_LT(last, first);
}

TEST(Trainer, TrainingIsDeterministic) {
  RdmdConfig c;
  c.batch = 32;
  c.iterations = 12;
  c.eval_every = 5;
  c.seed = 11;
  Rng rng(1);
  const EvalSet eval{sample_source_gaussian(50, rng), sample_source_gaussian(50, rng)};
  TrainState a = make_distillation_state(tiny_target(10), 1.0);
  TrainState b = make_distillation_state(tiny_target(10), 1.0);
  train_rdmd(c, source(), a, eval);
  train_rdmd(c, source(), b, eval);
  EXPECT_EQ(a.generator->params(), b.generator->params());
  EXPECT_EQ(a.fake->params(), b.fake->params());
  ASSERT_EQ(a.log.size(), 3u);
  EXPECT_EQ(a.log.back().iteration, 12u);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].fake_loss, b.log[i].fake_loss);
    EXPECT_EQ(a.log[i].energy_distance, b.log[i].energy_distance);
  }
}

TEST(Trainer, LinearGeneratorLearnsTargetScaleWithoutRegularization) {
  RdmdConfig c;
  c.lambda = 0.0;
  c.batch = 256;
  c.iterations = 1500;
  c.generator_lr = 1e-2;
  c.omega = OmegaMode::sigma_squared;
  TrainState st = make_linear_state(gaussian_target(1.5), LinearGenerator::rot_scale(0.8, 0.0));
  train_rdmd(c, source(), st, std::nullopt);
  const Tensor a = dynamic_cast<const LinearGenerator&>(*st.generator).matrix();
  // Any orthogonal-times-1.5 matrix is optimal; A A^T = 2.25 I.
  EXPECT_NEAR(a.at(0, 0) * a.at(0, 0) + a.at(0, 1) * a.at(0, 1), 2.25, 0.1);
  EXPECT_NEAR(a.at(1, 0) * a.at(1, 0) + a.at(1, 1) * a.at(1, 1), 2.25, 0.1);
  EXPECT_NEAR(a.at(0, 0) * a.at(1, 0) + a.at(0, 1) * a.at(1, 1), 0.0, 0.1);
}

TEST(Trainer, RegularizationRemovesRotation) {
  RdmdConfig c;
  c.lambda = 0.2;
  c.batch = 256;
  c.iterations = 1500;
  c.generator_lr = 1e-2;
  c.omega = OmegaMode::sigma_squared;
  TrainState st = make_linear_state(gaussian_target(1.5), LinearGenerator::rot_scale(1.0, 1.0));
  train_rdmd(c, source(), st, std::nullopt);
  const Tensor a = dynamic_cast<const LinearGenerator&>(*st.generator).matrix();
  EXPECT_NEAR(std::atan2(a.at(1, 0), a.at(0, 0)), 0.0, 0.05);
  EXPECT_LT(a.at(0, 0), 1.5);
  EXPECT_GT(a.at(0, 0), 1.0);
}

TEST(Trainer, ExplodingGeneratorIsReported) {
  RdmdConfig c;
  c.batch = 32;
  c.iterations = 3000;
  c.generator_lr = 5.0;
  c.divergence_patience = 20;
  c.eval_every = 1000;
  TrainState st = make_distillation_state(tiny_target(12), 1.0);
  try {
    train_rdmd(c, source(), st, std::nullopt);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    SUCCEED() << e.what();
  }
}

TEST(Trainer, ConfigValidation) {
  RdmdConfig c;
  c.lambda = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = RdmdConfig{};
  c.t_min = 50.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
