#include "rdmd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "rdmd/config.hpp"
#include "rdmd/rng.hpp"

namespace rdmd {
namespace {

constexpr const char* magic = "rdmd-checkpoint";

std::string dims_text(const std::vector<std::size_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) out += (i ? "," : "") + std::to_string(dims[i]);
  return out;
}

std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stoull(item));
  return out;
}

void append_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::uint64_t parse_hex(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used, 16);
  if (used != s.size()) throw CheckpointError("bad hex value '" + s + "'");
  return v;
}

}  // namespace

std::string checkpoint_bytes(const Checkpoint& ckpt) {
  if (ckpt.params.names.size() != ckpt.params.tensors.size()) throw CheckpointError("checkpoint: names/tensors mismatch");
  std::string payload;
  for (const auto& t : ckpt.params.tensors) {
    for (double v : t.values()) append_le(payload, v);
  }
  std::ostringstream m;
  m << magic << " " << Checkpoint::format_version << "\n";
  m << "kind = " << ckpt.kind << "\n";
  m << "iteration = " << ckpt.iteration << "\n";
  m << "seed = " << ckpt.seed << "\n";
  m << "config_hash = " << format_hash(ckpt.config_hash) << "\n";
  m << "schedule.sigma_min = " << format_double(ckpt.schedule.sigma_min) << "\n";
  m << "schedule.sigma_max = " << format_double(ckpt.schedule.sigma_max) << "\n";
  m << "network.input_dim = " << ckpt.network.input_dim << "\n";
  m << "network.encoder_dims = " << dims_text(ckpt.network.encoder_dims) << "\n";
  m << "network.decoder_dims = " << dims_text(ckpt.network.decoder_dims) << "\n";
  m << "network.embed_dim = " << ckpt.network.embed_dim << "\n";
  m << "network.slope = " << format_double(ckpt.network.slope) << "\n";
  m << "network.max_period = " << format_double(ckpt.network.max_period) << "\n";
  m << "network.zero_init_output = " << (ckpt.network.zero_init_output ? "true" : "false") << "\n";
  m << "network.preconditioning = " << (ckpt.network.preconditioning == Preconditioning::edm ? "edm" : "none") << "\n";
  m << "network.sigma_data = " << format_double(ckpt.network.sigma_data) << "\n";
  m << "sigma_init = " << format_double(ckpt.sigma_init) << "\n";
  m << "lambda = " << format_double(ckpt.lambda) << "\n";
  m << "arrays = " << ckpt.params.names.size() << "\n";
  for (std::size_t i = 0; i < ckpt.params.names.size(); ++i) {
    m << "array " << ckpt.params.names[i] << " " << dims_text(ckpt.params.tensors[i].shape()) << "\n";
  }
  m << "payload_bytes = " << payload.size() << "\n";
  m << "payload_hash = " << format_hash(fnv1a64(payload)) << "\n";
  m << "payload\n";
  return m.str() + payload;
}

Checkpoint parse_checkpoint(const std::string& bytes, std::optional<std::uint64_t> expected_hash) {
  const std::string marker = "\npayload\n";
  const auto split = bytes.find(marker);
  if (split == std::string::npos) throw CheckpointError("checkpoint: missing payload marker");
  std::istringstream in(bytes.substr(0, split + 1));
  const std::string payload = bytes.substr(split + marker.size());

  std::string line;
  std::getline(in, line);
  if (line != std::string(magic) + " " + std::to_string(Checkpoint::format_version)) {
    throw CheckpointError("checkpoint: unsupported header '" + line + "'");
  }
  Checkpoint c;
  std::map<std::string, std::string> kv;
  std::vector<std::pair<std::string, Shape>> arrays;
  while (std::getline(in, line)) {
    if (line.rfind("array ", 0) == 0) {
      std::istringstream a(line.substr(6));
      std::string name, dims;
      if (!(a >> name >> dims)) throw CheckpointError("checkpoint: bad array line '" + line + "'");
      arrays.emplace_back(name, parse_dims(dims));
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw CheckpointError("checkpoint: bad manifest line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto get = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw CheckpointError("checkpoint: manifest lacks '" + key + "'");
    return it->second;
  };
  try {
    c.kind = get("kind");
    c.iteration = std::stoull(get("iteration"));
    c.seed = std::stoull(get("seed"));
    c.config_hash = parse_hex(get("config_hash"));
    c.schedule.sigma_min = std::stod(get("schedule.sigma_min"));
    c.schedule.sigma_max = std::stod(get("schedule.sigma_max"));
    c.network.input_dim = std::stoull(get("network.input_dim"));
    c.network.encoder_dims = parse_dims(get("network.encoder_dims"));
    c.network.decoder_dims = parse_dims(get("network.decoder_dims"));
    c.network.embed_dim = std::stoull(get("network.embed_dim"));
    c.network.slope = std::stod(get("network.slope"));
    c.network.max_period = std::stod(get("network.max_period"));
    c.network.zero_init_output = get("network.zero_init_output") == "true";
    const std::string pre = get("network.preconditioning");
    if (pre != "edm" && pre != "none") throw CheckpointError("checkpoint: unknown preconditioning '" + pre + "'");
    c.network.preconditioning = pre == "edm" ? Preconditioning::edm : Preconditioning::none;
    c.network.sigma_data = std::stod(get("network.sigma_data"));
    c.sigma_init = std::stod(get("sigma_init"));
    c.lambda = std::stod(get("lambda"));
    if (std::stoull(get("arrays")) != arrays.size()) throw CheckpointError("checkpoint: array count mismatch");
    if (std::stoull(get("payload_bytes")) != payload.size()) {
      throw CheckpointError("checkpoint: payload is " + std::to_string(payload.size()) + " bytes, manifest says " +
                            get("payload_bytes"));
    }
    if (parse_hex(get("payload_hash")) != fnv1a64(payload)) throw CheckpointError("checkpoint: payload hash mismatch (corrupted file)");
  } catch (const std::logic_error& e) {
    throw CheckpointError(std::string("checkpoint: malformed manifest value (") + e.what() + ")");
  }
  if (expected_hash && *expected_hash != c.config_hash) {
    throw CheckpointError("checkpoint: config hash " + format_hash(c.config_hash) + " does not match expected " +
                          format_hash(*expected_hash));
  }
  std::size_t offset = 0;
  for (const auto& [name, shape] : arrays) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    if (offset + 8 * n > payload.size()) throw CheckpointError("checkpoint: payload too short for '" + name + "'");
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) values[k] = read_le(payload.data() + offset + 8 * k);
    offset += 8 * n;
    c.params.names.push_back(name);
    c.params.tensors.push_back(Tensor::from_values(shape, std::move(values)));
  }
  if (offset != payload.size()) throw CheckpointError("checkpoint: trailing payload bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = checkpoint_bytes(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_checkpoint(buf.str(), expected_hash);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

Checkpoint make_checkpoint(const DenoiserNet& net, std::size_t iteration, std::uint64_t seed, std::uint64_t config_hash) {
  Checkpoint c;
  c.kind = "denoiser";
  c.network = net.config();
  c.schedule = net.schedule();
  c.iteration = iteration;
  c.seed = seed;
  c.config_hash = config_hash;
  c.params = net.params();
  return c;
}

Checkpoint make_checkpoint(const Generator& generator, const NoiseSchedule& schedule, std::size_t iteration,
                           std::uint64_t seed, std::uint64_t config_hash) {
  Checkpoint c;
  c.kind = "generator." + generator.kind();
  c.schedule = schedule;
  c.iteration = iteration;
  c.seed = seed;
  c.config_hash = config_hash;
  c.params = generator.params();
  if (const auto* mlp = dynamic_cast<const GeneratorNet*>(&generator)) {
    c.network = mlp->net().config();
    c.sigma_init = mlp->sigma_init();
  } else {
    c.network.input_dim = generator.dim();
  }
  return c;
}

DenoiserNet denoiser_from(const Checkpoint& ckpt) {
  if (ckpt.kind != "denoiser") throw CheckpointError("checkpoint holds '" + ckpt.kind + "', expected a denoiser");
  try {
    return DenoiserNet(ckpt.network, ckpt.schedule, ckpt.params);
  } catch (const std::logic_error& e) {
    throw CheckpointError(std::string("checkpoint parameters do not fit the network: ") + e.what());
  }
}

std::unique_ptr<Generator> generator_from(const Checkpoint& ckpt) {
  try {
    if (ckpt.kind == "generator.mlp") {
      return std::make_unique<GeneratorNet>(DenoiserNet(ckpt.network, ckpt.schedule, ckpt.params), ckpt.sigma_init);
    }
    if (ckpt.kind == "generator.linear") {
      if (ckpt.params.tensors.size() != 2) throw CheckpointError("linear generator checkpoint needs weight and bias");
      const Tensor& w = ckpt.params.tensors[0];
      if (w.rank() != 2 || w.rows() != w.cols()) throw CheckpointError("linear generator weight must be square");
      Tensor a({w.rows(), w.cols()});
      for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) a.at(i, j) = w.at(j, i);
      return std::make_unique<LinearGenerator>(a, ckpt.params.tensors[1]);
    }
  } catch (const std::logic_error& e) {
    throw CheckpointError(std::string("checkpoint parameters are inconsistent: ") + e.what());
  }
  throw CheckpointError("checkpoint holds '" + ckpt.kind + "', expected a generator");
}

}  // namespace rdmd
