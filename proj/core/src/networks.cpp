#include "rdmd/networks.hpp"

#include <cmath>
#include <stdexcept>

namespace rdmd {

namespace {

void add_linear(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng, bool zero) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w({in, out});
  Tensor b({out});
  if (!zero) {
    for (auto& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
    for (auto& v : b.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
  }
  ps.names.push_back(prefix + ".weight");
  ps.tensors.push_back(std::move(w));
  ps.names.push_back(prefix + ".bias");
  ps.tensors.push_back(std::move(b));
}

Var linear(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

}  // namespace

void NetConfig::validate() const {
  if (input_dim == 0) throw std::invalid_argument("NetConfig: input_dim must be positive");
  if (encoder_dims.empty() || decoder_dims.empty()) throw std::invalid_argument("NetConfig: empty layer list");
  if (decoder_dims.back() != input_dim) {
    throw std::invalid_argument("NetConfig: last decoder dim " + std::to_string(decoder_dims.back()) +
                                " must equal input_dim " + std::to_string(input_dim));
  }
  if (embed_dim == 0 || embed_dim % 2 != 0) throw std::invalid_argument("NetConfig: embed_dim must be even and positive");
  if (!(max_period > 1.0)) throw std::invalid_argument("NetConfig: max_period must exceed 1");
  if (!(sigma_data > 0.0) || !std::isfinite(sigma_data)) throw std::invalid_argument("NetConfig: sigma_data must be positive");
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.numel();
  return n;
}

std::vector<Var> ParamSet::bind(Graph& g, bool requires_grad) const {
  std::vector<Var> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back(g.leaf(t, requires_grad));
  return out;
}

std::vector<double> positional_encode(double sigma, std::size_t embed_dim, double max_period) {
  if (!(sigma > 0.0)) throw std::domain_error("positional_encode: sigma must be positive");
  if (embed_dim == 0 || embed_dim % 2 != 0) throw std::invalid_argument("positional_encode: embed_dim must be even");
  const std::size_t half = embed_dim / 2;
  const double u = std::log(sigma);
  const double step = half > 1 ? std::log(max_period) / static_cast<double>(half - 1) : 0.0;
  std::vector<double> out(embed_dim);
  for (std::size_t k = 0; k < half; ++k) {
    const double f = std::exp(-step * static_cast<double>(k));
    out[2 * k] = std::sin(u * f);
    out[2 * k + 1] = std::cos(u * f);
  }
  return out;
}

DenoiserNet::DenoiserNet(NetConfig config, NoiseSchedule schedule, Rng& init_rng)
    : config_(std::move(config)), schedule_(schedule) {
  config_.validate();
  schedule_.validate();
  encoder_layers_ = config_.encoder_dims.size();
  decoder_layers_ = config_.decoder_dims.size();
  std::size_t in = config_.input_dim;
  for (std::size_t i = 0; i < encoder_layers_; ++i) {
    add_linear(params_, "x_enc." + std::to_string(i), in, config_.encoder_dims[i], init_rng, false);
    in = config_.encoder_dims[i];
  }
  in = config_.embed_dim;
  for (std::size_t i = 0; i < encoder_layers_; ++i) {
    add_linear(params_, "t_enc." + std::to_string(i), in, config_.encoder_dims[i], init_rng, false);
    in = config_.encoder_dims[i];
  }
  in = 2 * config_.encoder_dims.back();
  for (std::size_t i = 0; i < decoder_layers_; ++i) {
    const bool zero = config_.zero_init_output && i + 1 == decoder_layers_;
    add_linear(params_, "dec." + std::to_string(i), in, config_.decoder_dims[i], init_rng, zero);
    in = config_.decoder_dims[i];
  }
}

DenoiserNet::DenoiserNet(NetConfig config, NoiseSchedule schedule, ParamSet params)
    : config_(std::move(config)), schedule_(schedule) {
  Rng shape_only(0);
  DenoiserNet reference(config_, schedule_, shape_only);
  if (params.names != reference.params_.names) throw std::invalid_argument("DenoiserNet: parameter names do not match config");
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (params.tensors[i].shape() != reference.params_.tensors[i].shape()) {
      throw ShapeError("DenoiserNet(" + params.names[i] + ")", params.tensors[i].shape(),
                       reference.params_.tensors[i].shape());
    }
  }
  params_ = std::move(params);
  encoder_layers_ = reference.encoder_layers_;
  decoder_layers_ = reference.decoder_layers_;
}

Var DenoiserNet::mlp(Graph& g, Var h, std::size_t first_layer, std::size_t layers, bool activate_last,
                     std::span<const Var> bound) const {
  (void)g;
  for (std::size_t i = 0; i < layers; ++i) {
    const std::size_t p = 2 * (first_layer + i);
    h = linear(h, bound[p], bound[p + 1]);
    if (i + 1 < layers || activate_last) h = leaky_relu(h, config_.slope);
  }
  return h;
}

Var DenoiserNet::forward(Graph& g, Var x, std::span<const double> sigmas, std::span<const Var> bound) const {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != config_.input_dim) {
    throw ShapeError("denoise", xv.shape(), Shape{xv.rows(), config_.input_dim});
  }
  if (sigmas.size() != xv.rows()) throw ShapeError("denoise(sigmas)", xv.shape(), Shape{sigmas.size()});
  if (bound.size() != params_.tensors.size()) throw std::invalid_argument("denoise: wrong number of bound parameters");

  const std::size_t n = xv.rows();
  const std::size_t e = config_.embed_dim;
  Tensor emb({n, e});
  for (std::size_t r = 0; r < n; ++r) {
    schedule_.require(sigmas[r], "denoise");
    if (r > 0 && sigmas[r] == sigmas[r - 1]) {
      std::copy_n(emb.data() + (r - 1) * e, e, emb.data() + r * e);
      continue;
    }
    const auto pe = positional_encode(sigmas[r], e, config_.max_period);
    std::copy(pe.begin(), pe.end(), emb.data() + r * e);
  }
  if (config_.preconditioning == Preconditioning::none) {
    Var xh = mlp(g, x, 0, encoder_layers_, false, bound);
    Var th = mlp(g, g.constant(std::move(emb)), encoder_layers_, encoder_layers_, false, bound);
    return mlp(g, concat(xh, th), 2 * encoder_layers_, decoder_layers_, false, bound);
  }

  const std::size_t d = config_.input_dim;
  const double sd2 = config_.sigma_data * config_.sigma_data;
  Tensor c_in({n, d}), c_skip({n, d}), c_out({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    const double s2 = sigmas[r] * sigmas[r];
    const double root = std::sqrt(s2 + sd2);
    for (std::size_t k = 0; k < d; ++k) {
      c_in[r * d + k] = 1.0 / root;
      c_skip[r * d + k] = sd2 / (s2 + sd2);
      c_out[r * d + k] = sigmas[r] * config_.sigma_data / root;
    }
  }
  Var xh = mlp(g, mul(x, g.constant(std::move(c_in))), 0, encoder_layers_, false, bound);
  Var th = mlp(g, g.constant(std::move(emb)), encoder_layers_, encoder_layers_, false, bound);
  Var f = mlp(g, concat(xh, th), 2 * encoder_layers_, decoder_layers_, false, bound);
  return add(mul(x, g.constant(std::move(c_skip))), mul(f, g.constant(std::move(c_out))));
}

Tensor DenoiserNet::denoise(const Tensor& y, std::span<const double> sigmas) const {
  Graph g;
  auto bound = params_.bind(g, false);
  return forward(g, g.constant(y), sigmas, bound).value();
}

Tensor denoise(const DenoiserNet& net, const Tensor& x, double sigma) {
  std::vector<double> s(x.rows(), sigma);
  return net.denoise(x, s);
}

Var denoise(Graph& g, const DenoiserNet& net, Var x, double sigma, std::span<const Var> bound) {
  std::vector<double> s(x.value().rows(), sigma);
  return net.forward(g, x, s, bound);
}

Tensor score_from_denoiser(const Tensor& x, const Tensor& d, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("score_from_denoiser: sigma must be positive");
  std::vector<double> s(x.rows(), sigma);
  return score_from_denoiser(x, d, s);
}

Tensor score_from_denoiser(const Tensor& x, const Tensor& d, std::span<const double> sigmas) {
  if (x.shape() != d.shape()) throw ShapeError("score_from_denoiser", x.shape(), d.shape());
  if (sigmas.size() != x.rows()) throw ShapeError("score_from_denoiser(sigmas)", x.shape(), Shape{sigmas.size()});
  Tensor out(x.shape());
  const std::size_t c = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (!(sigmas[r] > 0.0)) throw std::domain_error("score_from_denoiser: sigma must be positive");
    const double inv = 1.0 / (sigmas[r] * sigmas[r]);
    for (std::size_t k = 0; k < c; ++k) out[r * c + k] = (x[r * c + k] - d[r * c + k]) * inv;
  }
  return out;
}

Tensor Generator::apply(const Tensor& x) const {
  Graph g;
  auto bound = params().bind(g, false);
  return forward(g, g.constant(x), bound).value();
}

GeneratorNet::GeneratorNet(DenoiserNet net, double sigma_init) : net_(std::move(net)), sigma_init_(sigma_init) {
  net_.schedule().require(sigma_init_, "GeneratorNet");
}

Var GeneratorNet::forward(Graph& g, Var x, std::span<const Var> bound) const {
  return denoise(g, net_, x, sigma_init_, bound);
}

LinearGenerator::LinearGenerator(const Tensor& matrix, Tensor offset) {
  if (matrix.rank() != 2 || matrix.rows() != matrix.cols() || offset.rank() != 1 || offset.dim(0) != matrix.rows()) {
    throw ShapeError("LinearGenerator", matrix.shape(), offset.shape());
  }
  const std::size_t d = matrix.rows();
  Tensor wt({d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) wt.at(j, i) = matrix.at(i, j);
  params_.names = {"weight", "bias"};
  params_.tensors = {std::move(wt), std::move(offset)};
}

LinearGenerator LinearGenerator::identity(std::size_t dim) {
  Tensor a({dim, dim});
  for (std::size_t i = 0; i < dim; ++i) a.at(i, i) = 1.0;
  return LinearGenerator(a, Tensor({dim}));
}

LinearGenerator LinearGenerator::rot_scale(double r, double alpha) {
  const double c = std::cos(alpha), s = std::sin(alpha);
  return LinearGenerator(Tensor::matrix({{r * c, -r * s}, {r * s, r * c}}), Tensor({2}));
}

Tensor LinearGenerator::matrix() const {
  const Tensor& wt = params_.tensors[0];
  const std::size_t d = wt.rows();
  Tensor a({d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a.at(i, j) = wt.at(j, i);
  return a;
}

Var LinearGenerator::forward(Graph& g, Var x, std::span<const Var> bound) const {
  (void)g;
  if (bound.size() != 2) throw std::invalid_argument("LinearGenerator: expected 2 bound parameters");
  return add_bias(matmul(x, bound[0]), bound[1]);
}

GeneratorNet init_generator_from(const DenoiserNet& denoiser, double sigma_init) {
  return GeneratorNet(denoiser, sigma_init);
}

}  // namespace rdmd
