#include "g2t/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace g2t {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

const std::set<std::string> kKnownKeys = {
    "vocab_size", "model_dim", "enc_layers", "dec_layers", "heads",
    "ffn_dim", "adapter_dim", "reenc_dim", "reenc_layers", "max_positions",
    "use_struct_adapter", "use_graph_context", "use_node_gates", "gate_floor",
    "lambda", "batch_size", "lr", "weight_decay", "max_steps", "eval_every",
    "seed", "beam_size", "max_len"};

int geti(const KvMap& kv, const std::string& k, int dflt) {
  auto it = kv.find(k);
  return it == kv.end() ? dflt : std::stoi(it->second);
}
double getd(const KvMap& kv, const std::string& k, double dflt) {
  auto it = kv.find(k);
  return it == kv.end() ? dflt : std::stod(it->second);
}
bool getb(const KvMap& kv, const std::string& k, bool dflt) {
  auto it = kv.find(k);
  if (it == kv.end()) return dflt;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config: bad boolean for " + k + ": " + it->second);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

KvMap read_kv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  KvMap kv;
  std::string line;
  long long lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!kKnownKeys.count(key))
      throw std::runtime_error("config: unknown key '" + key + "' at line " +
                               std::to_string(lineno));
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_kv_file(const std::string& path, const KvMap& kv) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  for (const auto& [k, v] : kv) f << k << " = " << v << '\n';
}

ModelConfig model_config_from_kv(const KvMap& kv) {
  ModelConfig c;
  c.vocab_size = geti(kv, "vocab_size", c.vocab_size);
  c.model_dim = geti(kv, "model_dim", c.model_dim);
  c.enc_layers = geti(kv, "enc_layers", c.enc_layers);
  c.dec_layers = geti(kv, "dec_layers", c.dec_layers);
  c.heads = geti(kv, "heads", c.heads);
  c.ffn_dim = geti(kv, "ffn_dim", c.ffn_dim);
  c.adapter_dim = geti(kv, "adapter_dim", c.adapter_dim);
  c.reenc_dim = geti(kv, "reenc_dim", c.reenc_dim);
  c.reenc_layers = geti(kv, "reenc_layers", c.reenc_layers);
  c.max_positions = geti(kv, "max_positions", c.max_positions);
  c.use_struct_adapter = getb(kv, "use_struct_adapter", c.use_struct_adapter);
  c.use_graph_context = getb(kv, "use_graph_context", c.use_graph_context);
  c.use_node_gates = getb(kv, "use_node_gates", c.use_node_gates);
  c.gate_floor = getd(kv, "gate_floor", c.gate_floor);
  return c;
}

TrainConfig train_config_from_kv(const KvMap& kv) {
  TrainConfig c;
  c.lambda = getd(kv, "lambda", c.lambda);
  c.batch_size = geti(kv, "batch_size", c.batch_size);
  c.lr = getd(kv, "lr", c.lr);
  c.weight_decay = getd(kv, "weight_decay", c.weight_decay);
  c.max_steps = geti(kv, "max_steps", c.max_steps);
  c.eval_every = geti(kv, "eval_every", c.eval_every);
  c.seed = (std::uint64_t)std::stoull(
      kv.count("seed") ? kv.at("seed") : "0");
  return c;
}

KvMap to_kv(const ModelConfig& mc, const TrainConfig& tc) {
  KvMap kv;
  kv["vocab_size"] = std::to_string(mc.vocab_size);
  kv["model_dim"] = std::to_string(mc.model_dim);
  kv["enc_layers"] = std::to_string(mc.enc_layers);
  kv["dec_layers"] = std::to_string(mc.dec_layers);
  kv["heads"] = std::to_string(mc.heads);
  kv["ffn_dim"] = std::to_string(mc.ffn_dim);
  kv["adapter_dim"] = std::to_string(mc.adapter_dim);
  kv["reenc_dim"] = std::to_string(mc.reenc_dim);
  kv["reenc_layers"] = std::to_string(mc.reenc_layers);
  kv["max_positions"] = std::to_string(mc.max_positions);
  kv["use_struct_adapter"] = mc.use_struct_adapter ? "true" : "false";
  kv["use_graph_context"] = mc.use_graph_context ? "true" : "false";
  kv["use_node_gates"] = mc.use_node_gates ? "true" : "false";
  kv["gate_floor"] = fmt(mc.gate_floor);
  kv["lambda"] = fmt(tc.lambda);
  kv["batch_size"] = std::to_string(tc.batch_size);
  kv["lr"] = fmt(tc.lr);
  kv["weight_decay"] = fmt(tc.weight_decay);
  kv["max_steps"] = std::to_string(tc.max_steps);
  kv["eval_every"] = std::to_string(tc.eval_every);
  kv["seed"] = std::to_string(tc.seed);
  return kv;
}

std::uint64_t config_hash(const KvMap& kv) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto& [k, v] : kv) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  return h;
}

std::uint64_t config_hash(const ModelConfig& mc) {
  KvMap kv = to_kv(mc, TrainConfig{});
  for (const char* k : {"lambda", "batch_size", "lr", "weight_decay",
                        "max_steps", "eval_every", "seed"})
    kv.erase(k);
  return config_hash(kv);
}

}  // namespace g2t
