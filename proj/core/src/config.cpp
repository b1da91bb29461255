#include "rdmd/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "rdmd/rng.hpp"

namespace rdmd {

ConfigError::ConfigError(const std::string& message, std::size_t line, std::string key)
    : std::runtime_error(line ? "config line " + std::to_string(line) + ": " + message : message),
      line_(line),
      key_(std::move(key)) {}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_hash(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string target_kind_name(TargetKind k) { return k == TargetKind::gaussian ? "gaussian" : "8gaussians"; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, std::size_t line, const std::string& key) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) throw ConfigError("'" + key + "' expects a number, got '" + v + "'", line, key);
  return out;
}

std::uint64_t parse_u64(const std::string& v, std::size_t line, const std::string& key) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'", line, key);
  return out;
}

bool parse_bool(const std::string& v, std::size_t line, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'", line, key);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, double>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& value, std::size_t line, const std::string& key)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
  std::string section;
  std::string key;
  Setter set;
  Getter get;
};


template <typename Ref>
Field number(std::string section, std::string key, Ref ref) {
  return Field{section, key,
               [ref](ExperimentConfig& c, const std::string& v, std::size_t line, const std::string& k) {
                 ref(c) = parse_double(v, line, k);
               },
               [ref](const ExperimentConfig& c) { return format_double(ref(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Ref>
Field count(std::string section, std::string key, Ref ref) {
  return Field{section, key,
               [ref](ExperimentConfig& c, const std::string& v, std::size_t line, const std::string& k) {
                 ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(parse_u64(v, line, k));
               },
               [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Ref>
Field flag(std::string section, std::string key, Ref ref) {
  return Field{section, key,
               [ref](ExperimentConfig& c, const std::string& v, std::size_t line, const std::string& k) {
                 ref(c) = parse_bool(v, line, k);
               },
               [ref](const ExperimentConfig& c) { return ref(const_cast<ExperimentConfig&>(c)) ? std::string("true") : std::string("false"); }};
}

template <typename Ref>
Field doubles(std::string section, std::string key, Ref ref) {
  return Field{section, key,
               [ref](ExperimentConfig& c, const std::string& v, std::size_t line, const std::string& k) {
                 std::vector<double> out;
                 for (const auto& item : split_list(v)) out.push_back(parse_double(item, line, k));
                 ref(c) = std::move(out);
               },
               [ref](const ExperimentConfig& c) { return join(ref(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Ref>
Field sizes(std::string section, std::string key, Ref ref) {
  return Field{section, key,
               [ref](ExperimentConfig& c, const std::string& v, std::size_t line, const std::string& k) {
                 std::vector<std::size_t> out;
                 for (const auto& item : split_list(v)) out.push_back(parse_u64(item, line, k));
                 ref(c) = std::move(out);
               },
               [ref](const ExperimentConfig& c) { return join(ref(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Enum, typename Ref>
Field choice(std::string section, std::string key, Ref ref, std::vector<std::pair<std::string, Enum>> options) {
  return Field{section, key,
               [ref, options](ExperimentConfig& c, const std::string& v, std::size_t line, const std::string& k) {
                 for (const auto& [name, value] : options) {
                   if (name == v) {
                     ref(c) = value;
                     return;
                   }
                 }
                 std::string allowed;
                 for (const auto& [name, value] : options) allowed += (allowed.empty() ? "" : "|") + name;
                 throw ConfigError("'" + k + "' expects one of " + allowed + ", got '" + v + "'", line, k);
               },
               [ref, options](const ExperimentConfig& c) {
                 for (const auto& [name, value] : options)
                   if (ref(const_cast<ExperimentConfig&>(c)) == value) return name;
                 return std::string("?");
               }};
}

template <typename Ref>
Field text(std::string section, std::string key, Ref ref) {
  return Field{section, key,
               [ref](ExperimentConfig& c, const std::string& v, std::size_t, const std::string&) { ref(c) = v; },
               [ref](const ExperimentConfig& c) { return ref(const_cast<ExperimentConfig&>(c)); }};
}

#define REF(expr) [](ExperimentConfig& c) -> auto& { return c.expr; }

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      count("", "seed", REF(seed)),

      number("schedule", "sigma_min", REF(schedule.sigma_min)),
      number("schedule", "sigma_max", REF(schedule.sigma_max)),

      count("network", "input_dim", REF(network.input_dim)),
      sizes("network", "encoder_dims", REF(network.encoder_dims)),
      sizes("network", "decoder_dims", REF(network.decoder_dims)),
      count("network", "embed_dim", REF(network.embed_dim)),
      number("network", "slope", REF(network.slope)),
      number("network", "max_period", REF(network.max_period)),
      flag("network", "zero_init_output", REF(network.zero_init_output)),
      choice<Preconditioning>("network", "preconditioning", REF(network.preconditioning),
                              {{"edm", Preconditioning::edm}, {"none", Preconditioning::none}}),
      Field{"network", "sigma_data",
            [](ExperimentConfig& c, const std::string& v, std::size_t line, const std::string& k) {
              if (v == "auto") {
                c.sigma_data.reset();
              } else {
                c.sigma_data = parse_double(v, line, k);
              }
            },
            [](const ExperimentConfig& c) { return c.sigma_data ? format_double(*c.sigma_data) : std::string("auto"); }},

      choice<TargetKind>("data", "target", REF(data.target),
                         {{"gaussian", TargetKind::gaussian}, {"8gaussians", TargetKind::eight_gaussians}}),
      number("data", "radius", REF(data.geometry.radius)),
      number("data", "std", REF(data.geometry.std)),
      number("data", "target_std", REF(data.target_std)),
      count("data", "n_samples", REF(data.n_samples)),

      choice<SigmaLaw>("dsm", "sigma_law", REF(dsm.sigma_law),
                       {{"log_uniform", SigmaLaw::log_uniform}, {"log_normal", SigmaLaw::log_normal}}),
      number("dsm", "log_normal_mean", REF(dsm.log_normal_mean)),
      number("dsm", "log_normal_std", REF(dsm.log_normal_std)),
      choice<LossWeight>("dsm", "weight", REF(dsm.weight),
                         {{"inverse_sigma2", LossWeight::inverse_sigma2},
                          {"uniform", LossWeight::uniform},
                          {"balanced", LossWeight::balanced}}),
      count("dsm", "batch", REF(dsm.batch)),
      count("dsm", "iterations", REF(dsm.iterations)),
      number("dsm", "lr", REF(dsm.lr)),
      number("dsm", "ema_decay", REF(dsm.ema_decay)),
      count("dsm", "log_every", REF(dsm.log_every)),

      number("rdmd", "lambda", REF(rdmd.train.lambda)),
      doubles("rdmd", "lambdas", REF(rdmd.lambdas)),
      text("rdmd", "generator", REF(rdmd.generator)),
      number("rdmd", "sigma_init", REF(rdmd.train.sigma_init)),
      number("rdmd", "init_r", REF(rdmd.init_r)),
      number("rdmd", "init_alpha", REF(rdmd.init_alpha)),
      number("rdmd", "generator_lr", REF(rdmd.train.generator_lr)),
      number("rdmd", "fake_lr", REF(rdmd.train.fake_lr)),
      count("rdmd", "fake_steps", REF(rdmd.train.fake_steps)),
      count("rdmd", "batch", REF(rdmd.train.batch)),
      count("rdmd", "iterations", REF(rdmd.train.iterations)),
      number("rdmd", "t_min", REF(rdmd.train.t_min)),
      number("rdmd", "t_max", REF(rdmd.train.t_max)),
      choice<OmegaMode>("rdmd", "omega", REF(rdmd.train.omega),
                        {{"dmd_normalized", OmegaMode::dmd_normalized}, {"sigma_squared", OmegaMode::sigma_squared}}),
      choice<LossWeight>("rdmd", "fake_weight", REF(rdmd.train.fake_weight),
                         {{"inverse_sigma2", LossWeight::inverse_sigma2},
                          {"uniform", LossWeight::uniform},
                          {"balanced", LossWeight::balanced}}),
      count("rdmd", "eval_every", REF(rdmd.train.eval_every)),
      number("rdmd", "divergence_factor", REF(rdmd.train.divergence_factor)),
      count("rdmd", "divergence_patience", REF(rdmd.train.divergence_patience)),

      count("eval", "n_samples", REF(eval.n_samples)),
      count("eval", "projections", REF(eval.projections)),
      count("eval", "crossing_subsample", REF(eval.crossing_subsample)),
      count("eval", "ode_steps", REF(eval.ode_steps)),

      number("surface", "r_min", REF(surface.r_min)),
      number("surface", "r_max", REF(surface.r_max)),
      number("surface", "alpha_min", REF(surface.alpha_min)),
      number("surface", "alpha_max", REF(surface.alpha_max)),
      count("surface", "grid", REF(surface.grid)),
      doubles("surface", "lambdas", REF(surface.lambdas)),
      choice<SurfaceWeight>("surface", "weight", REF(surface.weight),
                            {{"inverse_horizon", SurfaceWeight::inverse_horizon},
                             {"sigma_squared", SurfaceWeight::sigma_squared}}),
      count("surface", "intervals", REF(surface.intervals)),

      text("output", "dir", REF(output.dir)),
      flag("output", "record_wallclock", REF(output.record_wallclock)),
  };
  return fields;
}

#undef REF

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& input) {
  ExperimentConfig cfg;
  std::map<std::string, bool> known_sections;
  for (const auto& f : schema()) known_sections[f.section] = true;

  std::istringstream in(input);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header '" + line + "'", line_no);
      section = trim(line.substr(1, line.size() - 2));
      if (!known_sections.contains(section) || section.empty()) throw ConfigError("unknown section [" + section + "]", line_no, section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + line + "'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const Field* field = nullptr;
    for (const auto& f : schema()) {
      if (f.section == section && f.key == key) field = &f;
    }
    if (!field) throw ConfigError("unknown key '" + full + "'", line_no, full);
    if (auto it = seen.find(full); it != seen.end()) {
      throw ConfigError("duplicate key '" + full + "' (first set on line " + std::to_string(it->second) + ")", line_no, full);
    }
    seen[full] = line_no;
    field->set(cfg, value, line_no, full);
  }
  cfg.resolve();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what(), 0, e.key());
  }
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream out;
  std::string section = "\x01";
  for (const auto& f : schema()) {
    if (f.section != section) {
      section = f.section;
      if (!section.empty()) out << "\n[" << section << "]\n";
    }
    out << f.key << " = " << f.get(*this) << "\n";
  }
  return out.str();
}

std::uint64_t ExperimentConfig::model_hash() const {
  std::string canon;
  for (const auto& f : schema()) {
    if (f.section == "schedule" || f.section == "network") canon += f.section + "." + f.key + "=" + f.get(*this) + "\n";
  }
  // "auto" alone does not pin the function; the resolved scale does.
  canon += "network.sigma_data.effective=" + format_double(network.sigma_data) + "\n";
  return fnv1a64(canon);
}

double ExperimentConfig::data_std() const {
  if (data.target == TargetKind::gaussian) return data.target_std;
  // Equal-weight means on a circle contribute radius^2 / 2 per coordinate.
  const auto& g = data.geometry;
  return std::sqrt(0.5 * g.radius * g.radius + g.std * g.std);
}

void ExperimentConfig::resolve() {
  network.sigma_data = sigma_data.value_or(data_std());
  dsm.seed = seed;
  rdmd.train.seed = seed;
  dsm.record_wallclock = output.record_wallclock;
  rdmd.train.record_wallclock = output.record_wallclock;
  validate();
}

void ExperimentConfig::validate() const {
  try {
    schedule.validate();
    network.validate();
    data.geometry.validate();
    dsm.validate();
    rdmd.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(data.target_std > 0.0)) throw ConfigError("data.target_std must be positive", 0, "data.target_std");
  if (data.n_samples == 0 || eval.n_samples == 0) throw ConfigError("sample counts must be positive");
  if (rdmd.generator != "mlp" && rdmd.generator != "linear") {
    throw ConfigError("rdmd.generator expects mlp or linear, got '" + rdmd.generator + "'", 0, "rdmd.generator");
  }
  if (!schedule.contains(rdmd.train.sigma_init)) throw ConfigError("rdmd.sigma_init outside the schedule", 0, "rdmd.sigma_init");
  if (eval.crossing_subsample < 2) throw ConfigError("eval.crossing_subsample must be >= 2", 0, "eval.crossing_subsample");
  if (eval.ode_steps < 2) throw ConfigError("eval.ode_steps must be >= 2", 0, "eval.ode_steps");
}

}  // namespace rdmd
