#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "rdmd/data.hpp"
#include "rdmd/networks.hpp"
#include "rdmd/schedule.hpp"

namespace rdmd {

// Closed-form ground truth for Gaussian and Gaussian-mixture laws.

struct GaussianDist {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  GaussianDist(Eigen::VectorXd m, Eigen::MatrixXd c);
  static GaussianDist isotropic(std::size_t dim, double variance);

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  // Law of X + sigma * eps.
  GaussianDist perturbed(double sigma) const;
};

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<GaussianDist> components;

  GaussianMixture(std::vector<double> w, std::vector<GaussianDist> c);
  std::size_t dim() const { return components.front().dim(); }
};

GaussianMixture eight_gaussians_mixture(const EightGaussians& geometry);

double perturbed_log_density(const GaussianDist& dist, double sigma, const Eigen::VectorXd& x);
double perturbed_log_density(const GaussianMixture& dist, double sigma, const Eigen::VectorXd& x);
Eigen::VectorXd perturbed_score(const GaussianDist& dist, double sigma, const Eigen::VectorXd& x);
// Responsibility-weighted component scores, log-sum-exp stabilized.
Eigen::VectorXd perturbed_score(const GaussianMixture& dist, double sigma, const Eigen::VectorXd& x);

double kl_gaussian(const GaussianDist& p, const GaussianDist& q);

// A = r * C(alpha), C the 2D rotation.
struct RotScaleGenerator {
  double r = 1.0;
  double alpha = 0.0;

  Eigen::Matrix2d matrix() const;
};

// Law of G(x) + sigma * eps for x ~ N(0, I).
GaussianDist pushforward_law(const RotScaleGenerator& gen, double sigma);
GaussianDist pushforward_law(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double sigma);

enum class SurfaceWeight { inverse_horizon, sigma_squared };

struct SurfaceOptions {
  NoiseSchedule schedule{};
  double target_std = 1.5;
  SurfaceWeight weight = SurfaceWeight::inverse_horizon;
  // Composite Simpson intervals on the log-sigma grid (must be even, >= 16).
  std::size_t intervals = 256;
};

struct SurfaceValue {
  double kl_term = 0.0;
  double cost_term = 0.0;
  double total = 0.0;
};

double surface_weight(SurfaceWeight w, double sigma, const NoiseSchedule& schedule);

// Integral of w(t) KL(N(0,(r^2+s_t^2) I) || N(0,(s_tgt^2+s_t^2) I)) dt plus
// lambda * E||x - r C(alpha) x||^2 for the N(0, I) source in 2D.
SurfaceValue rdmd_surface(double r, double alpha, double lambda, const SurfaceOptions& options);

struct AffineMap {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd offset;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return matrix * x + offset; }
  Tensor apply(const Tensor& x) const;
};

// Monge map for quadratic cost between Gaussians.
AffineMap ot_map_gaussian(const GaussianDist& source, const GaussianDist& target);

// Symmetric PSD square root via eigendecomposition of the symmetrized input.
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& m);

// Exact posterior mean D(y, sigma) = y + sigma^2 * score for a mixture law.
class MixtureDenoiser final : public Denoiser {
 public:
  explicit MixtureDenoiser(GaussianMixture law);

  const GaussianMixture& law() const { return law_; }
  std::size_t dim() const override { return law_.dim(); }
  Tensor denoise(const Tensor& y, std::span<const double> sigmas) const override;

 private:
  GaussianMixture law_;
};

// Exact posterior mean for a single Gaussian law; batched closed form.
class GaussianDenoiser final : public Denoiser {
 public:
  explicit GaussianDenoiser(GaussianDist law) : law_(std::move(law)) {}

  const GaussianDist& law() const { return law_; }
  std::size_t dim() const override { return law_.dim(); }
  Tensor denoise(const Tensor& y, std::span<const double> sigmas) const override;

 private:
  GaussianDist law_;
};

Tensor mixture_scores(const GaussianMixture& law, const Tensor& y, std::span<const double> sigmas);

}  // namespace rdmd
