#include "rdmd/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rdmd {

namespace {

constexpr double kSymmetryTol = 1e-10;

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& cov, const char* who) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument(std::string(who) + ": covariance not square");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw std::invalid_argument(std::string(who) + ": covariance not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument(std::string(who) + ": covariance not positive definite");
  return llt;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

GaussianDist::GaussianDist(Eigen::VectorXd m, Eigen::MatrixXd c) : mean(std::move(m)), cov(std::move(c)) {
  if (cov.rows() != mean.size()) throw std::invalid_argument("GaussianDist: mean/covariance dimension mismatch");
  checked_llt(cov, "GaussianDist");
}

GaussianDist GaussianDist::isotropic(std::size_t dim, double variance) {
  const auto d = static_cast<Eigen::Index>(dim);
  return GaussianDist(Eigen::VectorXd::Zero(d), variance * Eigen::MatrixXd::Identity(d, d));
}

GaussianDist GaussianDist::perturbed(double sigma) const {
  if (sigma < 0.0) throw std::domain_error("GaussianDist::perturbed: sigma must be >= 0");
  return GaussianDist(mean, cov + sigma * sigma * Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
}

GaussianMixture::GaussianMixture(std::vector<double> w, std::vector<GaussianDist> c)
    : weights(std::move(w)), components(std::move(c)) {
  if (weights.empty() || weights.size() != components.size()) throw std::invalid_argument("GaussianMixture: weights/components mismatch");
  double total = 0.0;
  for (double v : weights) {
    if (!(v > 0.0)) throw std::invalid_argument("GaussianMixture: weights must be positive");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("GaussianMixture: weights must sum to 1");
  for (const auto& comp : components) {
    if (comp.dim() != components.front().dim()) throw std::invalid_argument("GaussianMixture: component dimension mismatch");
  }
}

GaussianMixture eight_gaussians_mixture(const EightGaussians& geometry) {
  geometry.validate();
  std::vector<GaussianDist> comps;
  for (int k = 0; k < 8; ++k) {
    const double a = k * std::numbers::pi / 4.0;
    Eigen::VectorXd m(2);
    m << geometry.radius * std::cos(a), geometry.radius * std::sin(a);
    comps.emplace_back(m, geometry.std * geometry.std * Eigen::MatrixXd::Identity(2, 2));
  }
  return GaussianMixture(std::vector<double>(8, 0.125), std::move(comps));
}

double perturbed_log_density(const GaussianDist& dist, double sigma, const Eigen::VectorXd& x) {
  const GaussianDist p = dist.perturbed(sigma);
  auto llt = checked_llt(p.cov, "perturbed_log_density");
  const Eigen::VectorXd diff = x - p.mean;
  const double quad = diff.dot(llt.solve(diff));
  return -0.5 * (quad + log_det(llt) + static_cast<double>(dist.dim()) * std::log(2.0 * std::numbers::pi));
}

double perturbed_log_density(const GaussianMixture& dist, double sigma, const Eigen::VectorXd& x) {
  std::vector<double> logs;
  for (std::size_t k = 0; k < dist.weights.size(); ++k) {
    logs.push_back(std::log(dist.weights[k]) + perturbed_log_density(dist.components[k], sigma, x));
  }
  const double m = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double l : logs) s += std::exp(l - m);
  return m + std::log(s);
}

Eigen::VectorXd perturbed_score(const GaussianDist& dist, double sigma, const Eigen::VectorXd& x) {
  const GaussianDist p = dist.perturbed(sigma);
  auto llt = checked_llt(p.cov, "perturbed_score");
  return -llt.solve(x - p.mean);
}

Eigen::VectorXd perturbed_score(const GaussianMixture& dist, double sigma, const Eigen::VectorXd& x) {
  const std::size_t k_count = dist.weights.size();
  std::vector<double> logs(k_count);
  std::vector<Eigen::VectorXd> scores(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const GaussianDist p = dist.components[k].perturbed(sigma);
    auto llt = checked_llt(p.cov, "perturbed_score");
    const Eigen::VectorXd diff = x - p.mean;
    const Eigen::VectorXd sol = llt.solve(diff);
    logs[k] = std::log(dist.weights[k]) - 0.5 * (diff.dot(sol) + log_det(llt));
    scores[k] = -sol;
  }
  const double m = *std::max_element(logs.begin(), logs.end());
  double z = 0.0;
  for (auto& l : logs) {
    l = std::exp(l - m);
    z += l;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (std::size_t k = 0; k < k_count; ++k) out += (logs[k] / z) * scores[k];
  return out;
}

double kl_gaussian(const GaussianDist& p, const GaussianDist& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("kl_gaussian: dimension mismatch");
  auto lp = checked_llt(p.cov, "kl_gaussian(p)");
  auto lq = checked_llt(q.cov, "kl_gaussian(q)");
  const Eigen::VectorXd dm = q.mean - p.mean;
  const double trace = lq.solve(p.cov).trace();
  const double quad = dm.dot(lq.solve(dm));
  return 0.5 * (trace - static_cast<double>(p.dim()) + quad + log_det(lq) - log_det(lp));
}

Eigen::Matrix2d RotScaleGenerator::matrix() const {
  Eigen::Matrix2d a;
  a << std::cos(alpha), -std::sin(alpha), std::sin(alpha), std::cos(alpha);
  return r * a;
}

GaussianDist pushforward_law(const RotScaleGenerator& gen, double sigma) {
  return pushforward_law(Eigen::MatrixXd(gen.matrix()), Eigen::VectorXd::Zero(2), sigma);
}

GaussianDist pushforward_law(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double sigma) {
  const Eigen::MatrixXd cov = a * a.transpose() + sigma * sigma * Eigen::MatrixXd::Identity(a.rows(), a.rows());
  return GaussianDist(b, 0.5 * (cov + cov.transpose()));
}

double surface_weight(SurfaceWeight w, double sigma, const NoiseSchedule& schedule) {
  switch (w) {
    case SurfaceWeight::inverse_horizon:
      return 1.0 / schedule.sigma_max;
    case SurfaceWeight::sigma_squared:
      return sigma * sigma;
  }
  return 0.0;
}

SurfaceValue rdmd_surface(double r, double alpha, double lambda, const SurfaceOptions& options) {
  if (options.intervals < 16 || options.intervals % 2 != 0) {
    throw std::invalid_argument("rdmd_surface: quadrature needs an even number of intervals >= 16");
  }
  const double lo = std::log(options.schedule.sigma_min);
  const double hi = std::log(options.schedule.sigma_max);
  const double h = (hi - lo) / static_cast<double>(options.intervals);
  const double tgt2 = options.target_std * options.target_std;
  double kl = 0.0;
  for (std::size_t i = 0; i <= options.intervals; ++i) {
    const double t = std::exp(lo + h * static_cast<double>(i));
    const double s2 = t * t;
    // Isotropic 2D KL: ratio - 1 - ln(ratio) with ratio = var_p / var_q.
    const double ratio = (r * r + s2) / (tgt2 + s2);
    const double integrand = surface_weight(options.weight, t, options.schedule) * (ratio - 1.0 - std::log(ratio)) * t;
    const double c = (i == 0 || i == options.intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    kl += c * integrand;
  }
  kl *= h / 3.0;
  SurfaceValue v;
  v.kl_term = kl;
  v.cost_term = 2.0 * (1.0 + r * r - 2.0 * r * std::cos(alpha));
  v.total = v.kl_term + lambda * v.cost_term;
  return v;
}

Tensor AffineMap::apply(const Tensor& x) const {
  const auto d = static_cast<std::size_t>(matrix.rows());
  if (x.rank() != 2 || x.cols() != d) throw ShapeError("AffineMap::apply", x.shape(), Shape{x.rows(), d});
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = offset(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < d; ++j) s += matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x.at(r, j);
      out.at(r, i) = s;
    }
  }
  return out;
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
  if ((m - sym).cwiseAbs().maxCoeff() > kSymmetryTol * scale) throw std::invalid_argument("spd_sqrt: input not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw std::runtime_error("spd_sqrt: eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() < -kSymmetryTol * scale) throw std::invalid_argument("spd_sqrt: input not positive semidefinite");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

AffineMap ot_map_gaussian(const GaussianDist& source, const GaussianDist& target) {
  if (source.dim() != target.dim()) throw std::invalid_argument("ot_map_gaussian: dimension mismatch");
  checked_llt(source.cov, "ot_map_gaussian(source)");
  checked_llt(target.cov, "ot_map_gaussian(target)");
  const Eigen::MatrixXd s_half = spd_sqrt(source.cov);
  const Eigen::MatrixXd s_half_inv = s_half.inverse();
  const Eigen::MatrixXd middle = spd_sqrt(s_half * target.cov * s_half);
  Eigen::MatrixXd t = s_half_inv * middle * s_half_inv;
  t = 0.5 * (t + t.transpose());
  return AffineMap{t, target.mean - t * source.mean};
}

MixtureDenoiser::MixtureDenoiser(GaussianMixture law) : law_(std::move(law)) {}

Tensor mixture_scores(const GaussianMixture& law, const Tensor& y, std::span<const double> sigmas) {
  const std::size_t d = law.dim();
  if (y.rank() != 2 || y.cols() != d) throw ShapeError("mixture_scores", y.shape(), Shape{y.rows(), d});
  if (sigmas.size() != y.rows()) throw ShapeError("mixture_scores(sigmas)", y.shape(), Shape{sigmas.size()});
  Tensor out(y.shape());
  Eigen::VectorXd x(static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t k = 0; k < d; ++k) x(static_cast<Eigen::Index>(k)) = y.at(r, k);
    const Eigen::VectorXd s = perturbed_score(law, sigmas[r], x);
    for (std::size_t k = 0; k < d; ++k) out.at(r, k) = s(static_cast<Eigen::Index>(k));
  }
  return out;
}

Tensor MixtureDenoiser::denoise(const Tensor& y, std::span<const double> sigmas) const {
  Tensor out = mixture_scores(law_, y, sigmas);
  const std::size_t d = y.cols();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const double s2 = sigmas[r] * sigmas[r];
    for (std::size_t k = 0; k < d; ++k) out.at(r, k) = y.at(r, k) + s2 * out.at(r, k);
  }
  return out;
}

Tensor GaussianDenoiser::denoise(const Tensor& y, std::span<const double> sigmas) const {
  const std::size_t d = law_.dim();
  if (y.rank() != 2 || y.cols() != d) throw ShapeError("GaussianDenoiser", y.shape(), Shape{y.rows(), d});
  if (sigmas.size() != y.rows()) throw ShapeError("GaussianDenoiser(sigmas)", y.shape(), Shape{sigmas.size()});
  const auto di = static_cast<Eigen::Index>(d);
  Tensor out(y.shape());
  Eigen::VectorXd v(di);
  Eigen::LDLT<Eigen::MatrixXd> solver;
  double cached_sigma = -1.0;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const double s2 = sigmas[r] * sigmas[r];
    if (sigmas[r] != cached_sigma) {
      solver.compute(law_.cov + s2 * Eigen::MatrixXd::Identity(di, di));
      cached_sigma = sigmas[r];
    }
    for (std::size_t k = 0; k < d; ++k) v(static_cast<Eigen::Index>(k)) = y.at(r, k) - law_.mean(static_cast<Eigen::Index>(k));
    // D = y + s2 * score = y - s2 (cov + s2 I)^-1 (y - mean)
    const Eigen::VectorXd step = solver.solve(v);
    for (std::size_t k = 0; k < d; ++k) out.at(r, k) = y.at(r, k) - s2 * step(static_cast<Eigen::Index>(k));
  }
  return out;
}

}  // namespace rdmd
