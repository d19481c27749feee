#include "diver/config.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace diver {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw InvalidConfig("bad integer for " + key + ": '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t out = std::stoull(v, &pos, 0);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw InvalidConfig("bad seed for " + key + ": '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw InvalidConfig("bad number for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidConfig("bad bool for " + key + ": '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},
      {"num_scenes", [](RunConfig& c, const std::string& k, const std::string& v) { c.num_scenes = parse_int(k, v); }},
      {"horizon", [](RunConfig& c, const std::string& k, const std::string& v) { c.horizon = parse_int(k, v); }},
      {"horizon_dt", [](RunConfig& c, const std::string& k, const std::string& v) { c.horizon_dt = parse_double(k, v); }},
      {"modes", [](RunConfig& c, const std::string& k, const std::string& v) { c.modes = parse_int(k, v); }},
      {"k_ref", [](RunConfig& c, const std::string& k, const std::string& v) { c.k_ref = parse_int(k, v); }},
      {"k_ref_train", [](RunConfig& c, const std::string& k, const std::string& v) { c.k_ref_train = parse_int(k, v); }},
      {"templates", [](RunConfig& c, const std::string&, const std::string& v) { c.templates = v; }},
      {"corridor_half_width", [](RunConfig& c, const std::string& k, const std::string& v) { c.corridor_half_width = parse_double(k, v); }},
      {"cell_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.cell_size = parse_double(k, v); }},
      {"min_x", [](RunConfig& c, const std::string& k, const std::string& v) { c.min_x = parse_double(k, v); }},
      {"max_x", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_x = parse_double(k, v); }},
      {"min_y", [](RunConfig& c, const std::string& k, const std::string& v) { c.min_y = parse_double(k, v); }},
      {"max_y", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_y = parse_double(k, v); }},
      {"embed_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.embed_dim = parse_int(k, v); }},
      {"heads", [](RunConfig& c, const std::string& k, const std::string& v) { c.heads = parse_int(k, v); }},
      {"norm_scale", [](RunConfig& c, const std::string& k, const std::string& v) { c.norm_scale = parse_double(k, v); }},
      {"feature_cell", [](RunConfig& c, const std::string& k, const std::string& v) { c.feature_cell = parse_double(k, v); }},
      {"num_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.num_steps = parse_int(k, v); }},
      {"denoise_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.denoise_steps = parse_int(k, v); }},
      {"schedule", [](RunConfig& c, const std::string&, const std::string& v) {
         if (v != "linear" && v != "cosine")
           throw InvalidConfig("unknown schedule '" + v + "'");
         c.schedule = v;
       }},
      {"loss_variant", [](RunConfig& c, const std::string&, const std::string& v) {
         loss_variant_from_name(v);  // value check only
         c.loss_variant = v;
       }},
      {"lambda_match", [](RunConfig& c, const std::string& k, const std::string& v) { c.lambda_match = parse_double(k, v); }},
      {"lambda_rl", [](RunConfig& c, const std::string& k, const std::string& v) { c.lambda_rl = parse_double(k, v); }},
      {"lambda_safe", [](RunConfig& c, const std::string& k, const std::string& v) { c.lambda_safe = parse_double(k, v); }},
      {"d_thresh", [](RunConfig& c, const std::string& k, const std::string& v) { c.d_thresh = parse_double(k, v); }},
      {"sigma", [](RunConfig& c, const std::string& k, const std::string& v) { c.sigma = parse_double(k, v); }},
      {"clip_eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.clip_eps = parse_double(k, v); }},
      {"grpo_clip", [](RunConfig& c, const std::string& k, const std::string& v) { c.grpo_clip = parse_bool(k, v); }},
      {"adv_scale", [](RunConfig& c, const std::string& k, const std::string& v) { c.adv_scale = parse_bool(k, v); }},
      {"lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr = parse_double(k, v); }},
      {"grad_clip", [](RunConfig& c, const std::string& k, const std::string& v) { c.grad_clip = parse_double(k, v); }},
      {"epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.epochs = parse_int(k, v); }},
      {"batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.batch_size = parse_int(k, v); }},
  };
  return table;
}

void hash_bytes(uint64_t& h, const void* data, size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
}

void hash_u64(uint64_t& h, uint64_t v) { hash_bytes(h, &v, 8); }

void hash_i(uint64_t& h, int v) { hash_u64(h, static_cast<uint64_t>(static_cast<int64_t>(v))); }

void hash_d(uint64_t& h, double v) {
  uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, 8);
  hash_u64(h, bits);
}

void hash_s(uint64_t& h, const std::string& s) {
  hash_u64(h, s.size());
  hash_bytes(h, s.data(), s.size());
}

}  // namespace

const char* loss_variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::L1: return "l1";
    case LossVariant::L1Ppo: return "l1_ppo";
    case LossVariant::Match: return "match";
    case LossVariant::MatchPpo: return "match_ppo";
    case LossVariant::MatchGrpo: return "match_grpo";
  }
  return "?";
}

LossVariant loss_variant_from_name(const std::string& name) {
  if (name == "l1") return LossVariant::L1;
  if (name == "l1_ppo") return LossVariant::L1Ppo;
  if (name == "match") return LossVariant::Match;
  if (name == "match_ppo") return LossVariant::MatchPpo;
  if (name == "match_grpo") return LossVariant::MatchGrpo;
  throw InvalidConfig("unknown loss_variant '" + name + "'");
}

ScheduleKind RunConfig::schedule_kind() const {
  if (schedule == "linear") return ScheduleKind::Linear;
  if (schedule == "cosine") return ScheduleKind::Cosine;
  throw InvalidConfig("unknown schedule '" + schedule + "'");
}

LossVariant RunConfig::variant() const { return loss_variant_from_name(loss_variant); }

void RunConfig::validate() const {
  if (num_scenes < 0) throw InvalidConfig("num_scenes must be >= 0");
  if (horizon < 2) throw InvalidConfig("horizon must be >= 2");
  if (!(horizon_dt > 0)) throw InvalidConfig("horizon_dt must be > 0");
  if (modes < 1) throw InvalidConfig("modes must be >= 1");
  if (k_ref < 1 || k_ref > 8) throw InvalidConfig("k_ref must be in [1, 8]");
  if (k_ref_train < -1 || k_ref_train > k_ref)
    throw InvalidConfig("k_ref_train must be -1 or in [0, k_ref]");
  if (templates.empty()) throw InvalidConfig("templates must not be empty");
  if (!(corridor_half_width > 0)) throw InvalidConfig("corridor_half_width must be > 0");
  if (!(cell_size > 0)) throw InvalidConfig("cell_size must be > 0");
  if (!(min_x < max_x) || !(min_y < max_y)) throw InvalidConfig("field bounds are inverted");
  if (embed_dim < 8 || embed_dim % 8 != 0) throw InvalidConfig("embed_dim must be a positive multiple of 8");
  if (heads < 1 || embed_dim % heads != 0) throw InvalidConfig("heads must divide embed_dim");
  if (!(norm_scale > 0)) throw InvalidConfig("norm_scale must be > 0");
  if (!(feature_cell > 0)) throw InvalidConfig("feature_cell must be > 0");
  if (num_steps < 2) throw InvalidConfig("num_steps must be >= 2");
  if (denoise_steps < 0 || denoise_steps > num_steps)
    throw InvalidConfig("denoise_steps must be in [0, num_steps]");
  schedule_kind();
  variant();
  if (!(lambda_match >= 0)) throw InvalidConfig("lambda_match must be >= 0");
  if (!(lambda_rl >= 0)) throw InvalidConfig("lambda_rl must be >= 0");
  if (!(lambda_safe >= 0)) throw InvalidConfig("lambda_safe must be >= 0");
  if (!(d_thresh > 0)) throw InvalidConfig("d_thresh must be > 0");
  if (!(sigma > 0)) throw InvalidConfig("sigma must be > 0");
  if (!(clip_eps > 0 && clip_eps < 1)) throw InvalidConfig("clip_eps must be in (0, 1)");
  if (!(lr > 0)) throw InvalidConfig("lr must be > 0");
  if (!(grad_clip > 0)) throw InvalidConfig("grad_clip must be > 0");
  if (epochs < 0) throw InvalidConfig("epochs must be >= 0");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
}

uint64_t RunConfig::compat_hash() const {
  // Order matters; appending new fields at the end keeps old hashes stable.
  uint64_t h = 0xcbf29ce484222325ull;
  hash_u64(h, seed);
  hash_i(h, modes);
  hash_i(h, horizon);
  hash_d(h, horizon_dt);
  hash_i(h, k_ref);
  hash_i(h, num_scenes);
  hash_s(h, templates);
  hash_d(h, corridor_half_width);
  hash_d(h, cell_size);
  hash_d(h, min_x);
  hash_d(h, max_x);
  hash_d(h, min_y);
  hash_d(h, max_y);
  hash_d(h, d_thresh);
  hash_i(h, embed_dim);
  hash_i(h, heads);
  hash_d(h, norm_scale);
  hash_d(h, feature_cell);
  return h;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidConfig("line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end())
      throw InvalidConfig("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second(cfg, key, val);
  }
  if (const char* env = std::getenv("DIVER_SEED")) cfg.seed = parse_u64("DIVER_SEED", env);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_text(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "seed = " << c.seed << "\n";
  out << "num_scenes = " << c.num_scenes << "\n";
  out << "horizon = " << c.horizon << "\n";
  out << "horizon_dt = " << c.horizon_dt << "\n";
  out << "modes = " << c.modes << "\n";
  out << "k_ref = " << c.k_ref << "\n";
  out << "k_ref_train = " << c.k_ref_train << "\n";
  out << "templates = " << c.templates << "\n";
  out << "corridor_half_width = " << c.corridor_half_width << "\n";
  out << "cell_size = " << c.cell_size << "\n";
  out << "min_x = " << c.min_x << "\n";
  out << "max_x = " << c.max_x << "\n";
  out << "min_y = " << c.min_y << "\n";
  out << "max_y = " << c.max_y << "\n";
  out << "embed_dim = " << c.embed_dim << "\n";
  out << "heads = " << c.heads << "\n";
  out << "norm_scale = " << c.norm_scale << "\n";
  out << "feature_cell = " << c.feature_cell << "\n";
  out << "num_steps = " << c.num_steps << "\n";
  out << "denoise_steps = " << c.denoise_steps << "\n";
  out << "schedule = " << c.schedule << "\n";
  out << "loss_variant = " << c.loss_variant << "\n";
  out << "lambda_match = " << c.lambda_match << "\n";
  out << "lambda_rl = " << c.lambda_rl << "\n";
  out << "lambda_safe = " << c.lambda_safe << "\n";
  out << "d_thresh = " << c.d_thresh << "\n";
  out << "sigma = " << c.sigma << "\n";
  out << "clip_eps = " << c.clip_eps << "\n";
  out << "grpo_clip = " << (c.grpo_clip ? "true" : "false") << "\n";
  out << "adv_scale = " << (c.adv_scale ? "true" : "false") << "\n";
  out << "lr = " << c.lr << "\n";
  out << "grad_clip = " << c.grad_clip << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  return out.str();
}

}  // namespace diver
