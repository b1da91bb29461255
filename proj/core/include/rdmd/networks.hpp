#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rdmd/autodiff.hpp"
#include "rdmd/rng.hpp"
#include "rdmd/schedule.hpp"
#include "rdmd/tensor.hpp"

namespace rdmd {

// edm wraps the MLP as D = c_skip y + c_out F(c_in y, sigma); none returns F(y, sigma).
enum class Preconditioning { none, edm };

struct NetConfig {
  std::size_t input_dim = 2;
  std::vector<std::size_t> encoder_dims{16, 32, 32, 32};
  std::vector<std::size_t> decoder_dims{128, 256, 128, 64, 2};
  std::size_t embed_dim = 64;
  double slope = 0.01;
  double max_period = 10000.0;
  // Zero the last decoder layer so a fresh net outputs 0.
  bool zero_init_output = false;
  Preconditioning preconditioning = Preconditioning::edm;
  double sigma_data = 1.0;

  void validate() const;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// Named parameter tensors in a fixed order.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  std::size_t count() const;
  std::vector<Var> bind(Graph& g, bool requires_grad) const;
  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

// Sin/cos pairs of log(sigma) at geometric frequencies 1 .. 1/max_period,
// interleaved as [sin f0, cos f0, sin f1, cos f1, ...].
std::vector<double> positional_encode(double sigma, std::size_t embed_dim, double max_period = 10000.0);

// Anything that maps noisy points to posterior-mean estimates.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::size_t dim() const = 0;
  // y is (batch, dim); one sigma per row.
  virtual Tensor denoise(const Tensor& y, std::span<const double> sigmas) const = 0;
};

// D(x, sigma): input encoder and time encoder MLPs feeding a decoder MLP on
// concat(input embedding, time embedding).
class DenoiserNet final : public Denoiser {
 public:
  DenoiserNet(NetConfig config, NoiseSchedule schedule, Rng& init_rng);
  DenoiserNet(NetConfig config, NoiseSchedule schedule, ParamSet params);

  const NetConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  Var forward(Graph& g, Var x, std::span<const double> sigmas, std::span<const Var> bound) const;

  std::size_t dim() const override { return config_.input_dim; }
  Tensor denoise(const Tensor& y, std::span<const double> sigmas) const override;

 private:
  Var mlp(Graph& g, Var h, std::size_t first_layer, std::size_t layers, bool activate_last,
          std::span<const Var> bound) const;

  NetConfig config_;
  NoiseSchedule schedule_;
  ParamSet params_;
  std::size_t encoder_layers_ = 0;
  std::size_t decoder_layers_ = 0;
};

Tensor denoise(const DenoiserNet& net, const Tensor& x, double sigma);
Var denoise(Graph& g, const DenoiserNet& net, Var x, double sigma, std::span<const Var> bound);

// (x - d) / sigma^2
Tensor score_from_denoiser(const Tensor& x, const Tensor& d, double sigma);
Tensor score_from_denoiser(const Tensor& x, const Tensor& d, std::span<const double> sigmas);

// One-step map x -> G(x) with trainable parameters.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual ParamSet& params() = 0;
  virtual const ParamSet& params() const = 0;
  virtual Var forward(Graph& g, Var x, std::span<const Var> bound) const = 0;
  virtual Tensor apply(const Tensor& x) const;
  virtual std::unique_ptr<Generator> clone() const = 0;
};

// G(x) = D(x, sigma_init) with sigma_init frozen.
class GeneratorNet final : public Generator {
 public:
  GeneratorNet(DenoiserNet net, double sigma_init);

  std::string kind() const override { return "mlp"; }
  std::size_t dim() const override { return net_.dim(); }
  double sigma_init() const { return sigma_init_; }
  const DenoiserNet& net() const { return net_; }
  ParamSet& params() override { return net_.params(); }
  const ParamSet& params() const override { return net_.params(); }
  Var forward(Graph& g, Var x, std::span<const Var> bound) const override;
  std::unique_ptr<Generator> clone() const override { return std::make_unique<GeneratorNet>(*this); }

 private:
  DenoiserNet net_;
  double sigma_init_;
};

// G(x) = A x + b, used for the closed-form Gaussian experiments. Stored in
// row convention like the MLP layers: params are {weight = A^T, bias = b}.
class LinearGenerator final : public Generator {
 public:
  LinearGenerator(const Tensor& matrix, Tensor offset);
  static LinearGenerator identity(std::size_t dim);
  static LinearGenerator rot_scale(double r, double alpha);

  std::string kind() const override { return "linear"; }
  std::size_t dim() const override { return params_.tensors[1].numel(); }
  Tensor matrix() const;
  const Tensor& offset() const { return params_.tensors[1]; }
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  Var forward(Graph& g, Var x, std::span<const Var> bound) const override;
  std::unique_ptr<Generator> clone() const override { return std::make_unique<LinearGenerator>(*this); }

 private:
  ParamSet params_;
};

GeneratorNet init_generator_from(const DenoiserNet& denoiser, double sigma_init);

}  // namespace rdmd
