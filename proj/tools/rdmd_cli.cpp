// rdmd: command-line driver for the diffusion / RDMD experiments.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rdmd/config.hpp"
#include "rdmd/experiments.hpp"

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<double> lambdas;
  std::string target;
  std::string analytic_target;
};

void add_common(CLI::App* cmd, Common& c, bool with_lambda, bool with_target) {
  cmd->add_option("--config", c.config_path, "experiment config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--out", c.out, "output directory (default: output.dir from the config)");
  if (with_lambda) cmd->add_option("--lambda", c.lambdas, "regularization weight (repeatable)");
  if (with_target) {
    auto* t = cmd->add_option("--target", c.target, "pretrained target denoiser checkpoint");
    auto* a = cmd->add_option("--analytic-target", c.analytic_target, "closed-form target: gaussian[:std] or 8gaussians");
    t->excludes(a);
    a->excludes(t);
  }
}

rdmd::ExperimentConfig load(const Common& c) {
  rdmd::ExperimentConfig cfg = c.config_path.empty() ? rdmd::ExperimentConfig{} : rdmd::ExperimentConfig::load(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output.dir = c.out;
  cfg.resolve();
  return cfg;
}

rdmd::TargetSource target_of(const Common& c) {
  rdmd::TargetSource t;
  if (!c.target.empty()) t.checkpoint = c.target;
  if (!c.analytic_target.empty()) t.analytic = c.analytic_target;
  if (!t.checkpoint && !t.analytic) throw std::invalid_argument("one of --target or --analytic-target is required");
  return t;
}

void echo(const rdmd::ExperimentConfig& cfg) {
  std::cout << "# resolved config\n" << cfg.to_text() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  rdmd::tune_allocator();
  CLI::App app{"Regularized distribution matching distillation experiments"};
  app.require_subcommand(1);

  Common diffusion, rdmd_run, surface, eval, sweep;
  std::string eval_ckpt, plot_csv, plot_out;

  auto* c_diff = app.add_subcommand("train-diffusion", "train a target denoiser with denoising score matching");
  add_common(c_diff, diffusion, false, false);
  auto* c_rdmd = app.add_subcommand("train-rdmd", "distill a one-step generator with transport regularization");
  add_common(c_rdmd, rdmd_run, true, true);
  auto* c_surf = app.add_subcommand("surface", "closed-form objective surface over (r, alpha)");
  add_common(c_surf, surface, true, false);
  auto* c_eval = app.add_subcommand("eval", "evaluate a generator checkpoint on fresh seeded data");
  add_common(c_eval, eval, false, false);
  c_eval->add_option("checkpoint", eval_ckpt, "generator checkpoint")->required()->check(CLI::ExistingFile);
  auto* c_plot = app.add_subcommand("plot", "render a pair, sweep, loss or surface CSV as SVG");
  c_plot->add_option("csv", plot_csv, "input CSV")->required()->check(CLI::ExistingFile);
  c_plot->add_option("--out", plot_out, "output SVG (default: CSV path with .svg)");
  auto* c_sweep = app.add_subcommand("sweep", "train-rdmd + eval for each lambda");
  add_common(c_sweep, sweep, true, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_diff->parsed()) {
      const auto cfg = load(diffusion);
      echo(cfg);
      rdmd::cmd_train_diffusion(cfg, cfg.output.dir, std::cout);
    } else if (c_rdmd->parsed()) {
      auto cfg = load(rdmd_run);
      if (rdmd_run.lambdas.size() > 1) throw std::invalid_argument("train-rdmd takes one --lambda; use sweep for several");
      if (!rdmd_run.lambdas.empty()) cfg.rdmd.train.lambda = rdmd_run.lambdas.front();
      cfg.resolve();
      echo(cfg);
      rdmd::cmd_train_rdmd(cfg, target_of(rdmd_run), cfg.output.dir, std::cout);
    } else if (c_surf->parsed()) {
      auto cfg = load(surface);
      if (!surface.lambdas.empty()) cfg.surface.lambdas = surface.lambdas;
      echo(cfg);
      rdmd::cmd_surface(cfg, cfg.output.dir, std::cout);
    } else if (c_eval->parsed()) {
      const auto cfg = load(eval);
      rdmd::cmd_eval(cfg, eval_ckpt, cfg.seed, cfg.output.dir, std::cout);
    } else if (c_plot->parsed()) {
      std::filesystem::path out = plot_out.empty() ? std::filesystem::path(plot_csv).replace_extension(".svg")
                                                   : std::filesystem::path(plot_out);
      rdmd::cmd_plot(plot_csv, out, std::cout);
    } else if (c_sweep->parsed()) {
      auto cfg = load(sweep);
      if (!sweep.lambdas.empty()) cfg.rdmd.lambdas = sweep.lambdas;
      echo(cfg);
      rdmd::cmd_sweep(cfg, target_of(sweep), cfg.rdmd.lambdas, cfg.output.dir, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
