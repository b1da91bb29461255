#include "rdmd/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>

#include "rdmd/checkpoint.hpp"
#include "rdmd/data.hpp"
#include "rdmd/report.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace rdmd {

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

namespace {

void prepare_out(const fs::path& out, const ExperimentConfig& config) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw std::runtime_error("cannot create output directory " + out.string());
  write_text(out / "config.resolved.ini", config.to_text());
}

std::string key_values(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

DataSampler source_sampler(std::size_t dim) {
  return [dim](std::size_t n, Rng& rng) { return sample_source_gaussian(n, rng, dim); };
}

double parse_std(const std::string& text, const std::string& spec) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !(v > 0.0)) {
    throw std::invalid_argument("analytic target '" + spec + "': bad standard deviation");
  }
  return v;
}

void upsert_sweep_row(const fs::path& path, const EvalReport& r) {
  const std::vector<std::string> header{"lambda", "seed", "transport_cost_rms", "energy_distance", "sliced_w2",
                                        "crossing_count"};
  CsvTable table{header, {}};
  if (fs::exists(path)) {
    table = read_csv(path);
    if (table.header != header) throw CsvError(path.string() + ": not a sweep table");
  }
  const std::vector<double> row{r.lambda, static_cast<double>(r.seed), r.transport_cost_rms, r.energy_distance,
                                r.sliced_w2, static_cast<double>(r.crossing_count)};
  std::erase_if(table.rows, [&](const auto& old) { return old[0] == row[0] && old[1] == row[1]; });
  table.rows.push_back(row);
  std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a[0], a[1]) < std::tie(b[0], b[1]);
  });
  write_csv(path, table);
}

}  // namespace

std::string lambda_dir_name(double lambda) { return "lambda_" + format_double(lambda); }

Tensor sample_target(const ExperimentConfig& config, std::size_t n, Rng& rng) {
  if (config.data.target == TargetKind::eight_gaussians) return sample_8gaussians(n, rng, config.data.geometry);
  Tensor x = sample_source_gaussian(n, rng, config.network.input_dim);
  for (double& v : x.values()) v *= config.data.target_std;
  return x;
}

DataSampler target_sampler(const ExperimentConfig& config) {
  return [config](std::size_t n, Rng& rng) { return sample_target(config, n, rng); };
}

std::shared_ptr<const Denoiser> target_oracle(const ExperimentConfig& config) {
  if (config.data.target == TargetKind::eight_gaussians) {
    return std::make_shared<MixtureDenoiser>(eight_gaussians_mixture(config.data.geometry));
  }
  const double s = config.data.target_std;
  return std::make_shared<GaussianDenoiser>(GaussianDist::isotropic(config.network.input_dim, s * s));
}

ResolvedTarget resolve_target(const ExperimentConfig& config, const TargetSource& source) {
  if (source.checkpoint && source.analytic) throw std::invalid_argument("give either a target checkpoint or an analytic target, not both");
  ResolvedTarget out;
  if (source.checkpoint) {
    const Checkpoint ckpt = load_checkpoint(*source.checkpoint);
    if (!(ckpt.schedule == config.schedule)) {
      throw CheckpointError("schedule mismatch: checkpoint has sigma in [" + format_double(ckpt.schedule.sigma_min) +
                            ", " + format_double(ckpt.schedule.sigma_max) + "], config has [" +
                            format_double(config.schedule.sigma_min) + ", " + format_double(config.schedule.sigma_max) +
                            "]");
    }
    if (ckpt.config_hash != config.model_hash()) {
      throw CheckpointError("target checkpoint config hash " + format_hash(ckpt.config_hash) +
                            " does not match this config (" + format_hash(config.model_hash()) + ")");
    }
    out.net = std::make_shared<const DenoiserNet>(denoiser_from(ckpt));
    out.denoiser = out.net;
    out.description = "checkpoint " + source.checkpoint->string();
    return out;
  }
  if (source.analytic) {
    const std::string& spec = *source.analytic;
    const std::size_t dim = config.network.input_dim;
    if (spec == "8gaussians") {
      if (dim != 2) throw std::invalid_argument("8gaussians target needs network.input_dim = 2");
      out.denoiser = std::make_shared<MixtureDenoiser>(eight_gaussians_mixture(config.data.geometry));
    } else if (spec == "gaussian" || spec.rfind("gaussian:", 0) == 0) {
      const double s = spec == "gaussian" ? config.data.target_std : parse_std(spec.substr(9), spec);
      out.denoiser = std::make_shared<GaussianDenoiser>(GaussianDist::isotropic(dim, s * s));
    } else {
      throw std::invalid_argument("unknown analytic target '" + spec + "' (expected gaussian, gaussian:<std> or 8gaussians)");
    }
    out.description = "analytic " + spec;
    return out;
  }
  throw std::invalid_argument("no target given");
}

std::vector<ScoreCheck> score_check(const Denoiser& model, const Denoiser& oracle, const ExperimentConfig& config,
                                    std::span<const double> sigmas, std::size_t n, std::uint64_t seed) {
  std::vector<ScoreCheck> out;
  Rng rng = Rng(seed).split("score_check");
  for (double sigma : sigmas) {
    const Tensor x0 = sample_target(config, n, rng);
    Tensor eps(x0.shape());
    rng.fill_normal(eps.values());
    const Tensor y = perturb(x0, sigma, eps);
    const std::vector<double> sig(n, sigma);
    const Tensor d = model.denoise(y, sig);
    const Tensor d_ref = oracle.denoise(y, sig);
    double dn = 0, dd = 0, sn = 0, sd = 0;
    for (std::size_t i = 0; i < d.numel(); ++i) {
      const double e = d[i] - d_ref[i];
      const double s_ref = (y[i] - d_ref[i]) / (sigma * sigma);
      dn += e * e;
      dd += d_ref[i] * d_ref[i];
      sn += e * e / (sigma * sigma * sigma * sigma);
      sd += s_ref * s_ref;
    }
    out.push_back({sigma, std::sqrt(dn / dd), std::sqrt(sn / sd)});
  }
  return out;
}

TrainDiffusionResult cmd_train_diffusion(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  prepare_out(out, config);
  log << "train-diffusion: " << target_kind_name(config.data.target) << " target, " << config.dsm.iterations
      << " iterations, batch " << config.dsm.batch << "\n";
  Rng init = Rng(config.seed).split("dsm.init");
  DenoiserNet initial(config.network, config.schedule, init);
  DsmResult res = train_dsm(config.dsm, target_sampler(config), std::move(initial));

  CsvTable loss{{"iteration", "loss", "wallclock_ms"}, {}};
  for (const auto& r : res.log) loss.rows.push_back({static_cast<double>(r.iteration), r.loss, r.wallclock_ms});
  write_csv(out / "loss.csv", loss);
  save_checkpoint(out / "target.ckpt", make_checkpoint(res.net, config.dsm.iterations, config.seed, config.model_hash()));

  const std::vector<double> sigmas{0.1, 1.0, 10.0};
  auto checks = score_check(res.net, *target_oracle(config), config, sigmas, config.eval.n_samples, config.seed);
  std::vector<std::pair<std::string, std::string>> kv{{"target", target_kind_name(config.data.target)},
                                                      {"iterations", std::to_string(config.dsm.iterations)},
                                                      {"final_loss", format_double(res.log.back().loss)}};
  for (const auto& c : checks) {
    kv.emplace_back("denoiser_rel_l2@" + format_double(c.sigma), format_double(c.denoiser_rel_l2));
    kv.emplace_back("score_rel_l2@" + format_double(c.sigma), format_double(c.score_rel_l2));
  }
  if (config.data.target == TargetKind::eight_gaussians && config.network.input_dim == 2) {
    const Tensor gen = pf_ode_sample(res.net, config.schedule, config.eval.n_samples, OdeOptions{config.eval.ode_steps},
                                     Rng(config.seed).split("validation.ode").next_u64());
    Rng ref_rng = Rng(config.seed).split("validation.reference");
    kv.emplace_back("pf_ode_energy_distance", format_double(energy_distance(gen, sample_target(config, config.eval.n_samples, ref_rng))));
  }
  const std::string report = key_values(kv);
  write_text(out / "validation.txt", report);
  log << report;
  return {std::move(res.net), std::move(res.log), std::move(checks)};
}

RdmdRunResult cmd_train_rdmd(const ExperimentConfig& config, const TargetSource& source, const fs::path& out,
                             std::ostream& log) {
  const ResolvedTarget target = resolve_target(config, source);
  prepare_out(out, config);
  const RdmdConfig& rc = config.rdmd.train;
  log << "train-rdmd: lambda " << format_double(rc.lambda) << ", " << config.rdmd.generator << " generator, target "
      << target.description << ", " << rc.iterations << " iterations\n";

  TrainState state;
  if (config.rdmd.generator == "linear") {
    if (config.network.input_dim != 2) throw std::invalid_argument("linear generator runs are 2D");
    state = make_linear_state(target.denoiser, LinearGenerator::rot_scale(config.rdmd.init_r, config.rdmd.init_alpha));
  } else if (target.net) {
    state = make_distillation_state(target.net, rc.sigma_init);
  } else {
    // No trained network to copy: generator and fake start from a fresh init.
    Rng init = Rng(config.seed).split("rdmd.init");
    DenoiserNet fresh(config.network, config.schedule, init);
    state.generator = std::make_unique<GeneratorNet>(fresh, rc.sigma_init);
    state.fake.emplace(std::move(fresh));
    state.target = target.denoiser;
  }

  Rng held = Rng(config.seed).split("heldout");
  Rng held_source = held.split("source");
  Rng held_target = held.split("target");
  EvalSet eval{sample_source_gaussian(config.data.n_samples, held_source, config.network.input_dim),
               sample_target(config, config.data.n_samples, held_target)};
  train_rdmd(rc, source_sampler(config.network.input_dim), state, eval);

  CsvTable tlog{{"iteration", "fake_loss", "transport_cost_rms", "energy_distance", "wallclock_ms"}, {}};
  for (const auto& r : state.log) {
    tlog.rows.push_back({static_cast<double>(r.iteration), r.fake_loss, r.transport_cost_rms, r.energy_distance,
                         r.wallclock_ms});
  }
  write_csv(out / "training_log.csv", tlog);
  Checkpoint ckpt = make_checkpoint(*state.generator, config.schedule, state.iteration, config.seed, config.model_hash());
  ckpt.lambda = rc.lambda;
  save_checkpoint(out / "generator.ckpt", ckpt);

  const PairSet pairs(eval.source, state.generator->apply(eval.source));
  write_csv(out / "pairs.csv", pairs_table(pairs));
  write_text(out / "pairs.svg", pairs_svg(pairs, eval.target_reference, "lambda = " + format_double(rc.lambda)));

  RdmdLogRecord final = evaluate_generator(*state.generator, eval);
  final.iteration = state.iteration;
  final.fake_loss = state.log.empty() ? 0.0 : state.log.back().fake_loss;
  std::vector<std::pair<std::string, std::string>> kv{{"lambda", format_double(rc.lambda)},
                                                      {"iterations", std::to_string(state.iteration)},
                                                      {"fake_loss", format_double(final.fake_loss)},
                                                      {"transport_cost_rms", format_double(final.transport_cost_rms)},
                                                      {"energy_distance", format_double(final.energy_distance)}};
  if (config.network.input_dim == 2) {
    Rng cross = Rng(config.seed).split("heldout.crossings");
    kv.emplace_back("crossing_count",
                    std::to_string(crossing_count(pairs, std::min(config.eval.crossing_subsample, pairs.size()), cross)));
  }
  const std::string summary = key_values(kv);
  write_text(out / "summary.txt", summary);
  log << summary;
  return {std::move(state.generator), std::move(state.log), final};
}

SurfaceGrid surface_grid(const ExperimentConfig& config, double lambda) {
  const auto& s = config.surface;
  if (s.grid < 8) throw std::invalid_argument("surface grid must be at least 8 points per axis");
  if (!(s.r_max > s.r_min) || !(s.alpha_max > s.alpha_min)) throw std::invalid_argument("surface ranges are empty");
  if (!(s.r_min >= 0.0)) throw std::invalid_argument("surface r range must be non-negative");
  SurfaceOptions opt;
  opt.schedule = config.schedule;
  opt.target_std = config.data.target_std;
  opt.weight = s.weight;
  opt.intervals = s.intervals;
  SurfaceGrid grid;
  grid.lambda = lambda;
  for (std::size_t i = 0; i < s.grid; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(s.grid - 1);
    grid.r.push_back(s.r_min + u * (s.r_max - s.r_min));
    grid.alpha.push_back(s.alpha_min + u * (s.alpha_max - s.alpha_min));
  }
  for (double r : grid.r)
    for (double a : grid.alpha) grid.values.push_back(rdmd_surface(r, a, lambda, opt).total);
  return grid;
}

std::vector<SurfaceResult> cmd_surface(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  if (config.surface.lambdas.empty()) throw std::invalid_argument("surface: no lambda values");
  prepare_out(out, config);
  SurfaceOptions opt;
  opt.schedule = config.schedule;
  opt.target_std = config.data.target_std;
  opt.weight = config.surface.weight;
  opt.intervals = config.surface.intervals;
  std::vector<SurfaceResult> results;
  CsvTable summary{{"lambda", "r_argmin", "alpha_argmin", "min_total"}, {}};
  for (double lambda : config.surface.lambdas) {
    SurfaceResult res;
    res.lambda = lambda;
    res.grid = surface_grid(config, lambda);
    CsvTable table{{"r", "alpha", "kl_term", "cost_term", "total"}, {}};
    for (double r : res.grid.r) {
      for (double a : res.grid.alpha) {
        const SurfaceValue v = rdmd_surface(r, a, lambda, opt);
        table.rows.push_back({r, a, v.kl_term, v.cost_term, v.total});
      }
    }
    const auto best = static_cast<std::size_t>(
        std::min_element(res.grid.values.begin(), res.grid.values.end()) - res.grid.values.begin());
    const std::size_t na = res.grid.alpha.size();
    res.r_argmin = res.grid.r[best / na];
    res.alpha_argmin = res.grid.alpha[best % na];
    res.min_total = res.grid.values[best];
    const std::string stem = "surface_" + format_double(lambda);
    write_csv(out / (stem + ".csv"), table);
    write_text(out / (stem + ".svg"), surface_svg(res.grid));
    summary.rows.push_back({lambda, res.r_argmin, res.alpha_argmin, res.min_total});
    log << "surface lambda " << format_double(lambda) << ": argmin r " << format_double(res.r_argmin) << ", alpha "
        << format_double(res.alpha_argmin) << "\n";
    results.push_back(std::move(res));
  }
  write_csv(out / "surface_summary.csv", summary);
  return results;
}

EvalReport evaluate_checkpoint(const ExperimentConfig& config, const fs::path& checkpoint, std::uint64_t seed) {
  const Checkpoint ckpt = load_checkpoint(checkpoint, config.model_hash());
  const auto generator = generator_from(ckpt);
  Rng root = Rng(seed).split("eval");
  Rng source_rng = root.split("source");
  Rng target_rng = root.split("target");
  Rng sliced_rng = root.split("sliced");
  Rng cross_rng = root.split("crossings");
  const Tensor source = sample_source_gaussian(config.eval.n_samples, source_rng, generator->dim());
  const Tensor reference = sample_target(config, config.eval.n_samples, target_rng);
  const PairSet pairs(source, generator->apply(source));
  EvalReport r;
  r.lambda = ckpt.lambda;
  r.seed = seed;
  r.transport_cost_rms = transport_cost_rms(pairs);
  r.energy_distance = energy_distance(pairs.outputs, reference);
  r.sliced_w2 = sliced_w2(pairs.outputs, reference, config.eval.projections, sliced_rng);
  if (generator->dim() == 2) {
    r.crossing_count = crossing_count(pairs, std::min(config.eval.crossing_subsample, pairs.size()), cross_rng);
  }
  return r;
}

std::string format_report(const EvalReport& r) {
  return key_values({{"lambda", format_double(r.lambda)},
                     {"seed", std::to_string(r.seed)},
                     {"transport_cost_rms", format_double(r.transport_cost_rms)},
                     {"energy_distance", format_double(r.energy_distance)},
                     {"sliced_w2", format_double(r.sliced_w2)},
                     {"crossing_count", std::to_string(r.crossing_count)}});
}

EvalReport cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint, std::uint64_t seed,
                    const fs::path& out, std::ostream& log) {
  const EvalReport r = evaluate_checkpoint(config, checkpoint, seed);
  std::error_code ec;
  fs::create_directories(out, ec);
  write_text(out / "eval.txt", format_report(r));
  upsert_sweep_row(out / "sweep.csv", r);
  log << format_report(r);
  return r;
}

std::string plot_csv(const fs::path& csv, const std::optional<Tensor>& target_reference) {
  const CsvTable t = read_csv(csv);
  const auto& h = t.header;
  auto column = [&](const std::string& name) {
    const auto it = std::find(h.begin(), h.end(), name);
    if (it == h.end()) throw CsvError(csv.string() + ": missing column '" + name + "'");
    const auto k = static_cast<std::size_t>(it - h.begin());
    std::vector<double> out;
    for (const auto& row : t.rows) out.push_back(row[k]);
    return out;
  };
  const std::string title = csv.stem().string();
  if (!h.empty() && h[0] == "x0") {
    if (t.rows.empty()) return pairs_svg(std::nullopt, target_reference, title);
    return pairs_svg(pairs_from_table(t), target_reference, title);
  }
  if (h.size() >= 2 && h[0] == "lambda" && h[1] == "seed") {
    return line_svg(column("lambda"), {column("transport_cost_rms"), column("energy_distance")},
                    {"transport_cost_rms", "energy_distance"}, "lambda", title);
  }
  if (h.size() >= 2 && h[0] == "r" && h[1] == "alpha") {
    SurfaceGrid grid;
    std::set<double> rs, as;
    for (const auto& row : t.rows) {
      rs.insert(row[0]);
      as.insert(row[1]);
    }
    grid.r.assign(rs.begin(), rs.end());
    grid.alpha.assign(as.begin(), as.end());
    if (t.rows.size() != grid.r.size() * grid.alpha.size()) throw CsvError(csv.string() + ": surface is not a full grid");
    grid.values.assign(t.rows.size(), 0.0);
    const auto total = column("total");
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
      const auto i = static_cast<std::size_t>(std::lower_bound(grid.r.begin(), grid.r.end(), t.rows[k][0]) - grid.r.begin());
      const auto j = static_cast<std::size_t>(std::lower_bound(grid.alpha.begin(), grid.alpha.end(), t.rows[k][1]) - grid.alpha.begin());
      grid.values[i * grid.alpha.size() + j] = total[k];
    }
    return surface_svg(grid, title);
  }
  if (h.size() >= 2 && h[0] == "iteration" && h[1] == "loss") {
    return line_svg(column("iteration"), {column("loss")}, {"loss"}, "iteration", title);
  }
  if (h.size() >= 2 && h[0] == "iteration" && h[1] == "fake_loss") {
    return line_svg(column("iteration"), {column("transport_cost_rms"), column("energy_distance")},
                    {"transport_cost_rms", "energy_distance"}, "iteration", title);
  }
  throw CsvError(csv.string() + ": unrecognized table header");
}

void cmd_plot(const fs::path& csv, const fs::path& svg, std::ostream& log) {
  write_text(svg, plot_csv(csv));
  log << "wrote " << svg.string() << "\n";
}

std::vector<EvalReport> cmd_sweep(const ExperimentConfig& config, const TargetSource& target,
                                  const std::vector<double>& lambdas, const fs::path& out, std::ostream& log) {
  if (lambdas.empty()) throw std::invalid_argument("sweep: no lambda values");
  std::set<std::string> dirs;
  for (double l : lambdas) {
    if (!dirs.insert(lambda_dir_name(l)).second) throw std::invalid_argument("sweep: duplicate lambda " + format_double(l));
  }
  prepare_out(out, config);
  if (fs::exists(out / "sweep.csv")) fs::remove(out / "sweep.csv");
  std::vector<EvalReport> reports;
  for (double lambda : lambdas) {
    ExperimentConfig run = config;
    run.rdmd.train.lambda = lambda;
    const fs::path dir = out / lambda_dir_name(lambda);
    cmd_train_rdmd(run, target, dir, log);
    const EvalReport r = evaluate_checkpoint(run, dir / "generator.ckpt", config.seed);
    write_text(dir / "eval.txt", format_report(r));
    upsert_sweep_row(out / "sweep.csv", r);
    reports.push_back(r);
  }
  write_text(out / "tradeoff.svg", plot_csv(out / "sweep.csv"));
  return reports;
}

}  // namespace rdmd
