#include "diver/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "diver/checkpoint.hpp"
#include "diver/plot.hpp"
#include "diver/train.hpp"
#include "diver/trajio.hpp"
#include "json.hpp"

namespace diver {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Stream tags keeping the seed-derived rng families apart.
constexpr uint64_t kInitStream = 0x1117;
constexpr uint64_t kAnchorStream = 0xa2c40;
constexpr uint64_t kRetryStride = 0x10000;

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != ' ' && ch != '\t') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string scene_filename(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04zu.json", i);
  return buf;
}

void load_weights_or_mismatch(const std::string& path, DenoiserParams& params,
                              uint64_t expected, TrainState* state) {
  try {
    load_checkpoint(path, params, expected, state);
  } catch (const InvalidDim& e) {
    throw ConfigMismatch(std::string("checkpoint does not fit the configured "
                                     "network: ") + e.what());
  }
}

}  // namespace

std::vector<Scene> generate_corpus(const RunConfig& cfg) {
  cfg.validate();
  std::vector<SceneTemplate> tmpl;
  for (const std::string& name : split_csv(cfg.templates))
    tmpl.push_back(template_from_name(name));

  SceneGenParams sp = to_scene_params(cfg);
  std::vector<Scene> scenes;
  scenes.reserve(size_t(cfg.num_scenes));
  for (int i = 0; i < cfg.num_scenes; ++i) {
    SceneTemplate t = tmpl[size_t(i) % tmpl.size()];
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%04d", i);
    // A seed whose reference search stalls is skipped deterministically.
    for (int attempt = 0;; ++attempt) {
      try {
        scenes.push_back(generate_scene(
            derive_seed(cfg.seed, uint64_t(i) + uint64_t(attempt) * kRetryStride),
            t, sp, id));
        break;
      } catch (const InsufficientDiversity&) {
        if (attempt >= 19) throw;
      }
    }
  }

  if (int(scenes.size()) >= cfg.modes && !scenes.empty()) {
    std::vector<Trajectory> anchors =
        generate_anchors(scenes, cfg.modes, derive_seed(cfg.seed, kAnchorStream));
    for (Scene& s : scenes) s.anchors = anchors;
  }
  return scenes;
}

void save_corpus(const RunConfig& cfg, const std::vector<Scene>& scenes,
                 const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  json manifest;
  manifest["config_hash"] = hash_hex(cfg.compat_hash());
  manifest["seed"] = cfg.seed;
  manifest["num_scenes"] = scenes.size();
  json files = json::array();
  for (size_t i = 0; i < scenes.size(); ++i) {
    std::string name = scene_filename(i);
    save_scene(scenes[i], (fs::path(out_dir) / name).string());
    files.push_back(name);
  }
  manifest["scenes"] = files;
  write_file((fs::path(out_dir) / "manifest.json").string(),
             manifest.dump(2) + "\n");
}

std::vector<Scene> load_corpus(const RunConfig& cfg, const std::string& dir,
                               bool force) {
  json manifest;
  try {
    manifest = json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad manifest: ") + e.what());
  }
  if (!force) {
    std::string stored = manifest.value("config_hash", std::string());
    if (stored != hash_hex(cfg.compat_hash()))
      throw ConfigMismatch("scene corpus was generated under a different "
                           "configuration");
  }
  std::vector<Scene> scenes;
  for (const auto& name : manifest["scenes"])
    scenes.push_back(load_scene((fs::path(dir) / name.get<std::string>()).string()));
  return scenes;
}

void cmd_scene_gen(const RunConfig& cfg, const std::string& out_dir) {
  save_corpus(cfg, generate_corpus(cfg), out_dir);
}

void cmd_train(const RunConfig& cfg, const std::string& scenes_dir,
               const std::string& out_weights, const std::string& resume_path) {
  cfg.validate();
  std::vector<Scene> scenes = load_corpus(cfg, scenes_dir);
  uint64_t hash = cfg.compat_hash();

  DenoiserParams params =
      init_denoiser(to_denoiser_config(cfg), derive_seed(cfg.seed, kInitStream));
  TrainState state;
  bool resuming = !resume_path.empty();
  if (resuming) load_weights_or_mismatch(resume_path, params, hash, &state);

  std::string csv_path = out_weights + ".csv";
  std::ofstream csv(csv_path, resuming ? std::ios::app : std::ios::trunc);
  if (!csv) throw IoError("cannot write '" + csv_path + "'");
  csv.precision(17);
  if (!resuming) {
    csv << "# config " << hash_hex(hash) << "\n";
    csv << "step,epoch,l_match,l_rl,r_div,r_safe,grad_norm,total\n";
  }
  StepObserver log = [&](const StepLog& s) {
    csv << s.step << "," << s.epoch << "," << s.l_match << "," << s.l_rl << ","
        << s.r_div << "," << s.r_safe << "," << s.grad_norm << "," << s.total
        << "\n";
  };

  train_model(cfg, scenes, params, state, log, out_weights + ".nan.json");
  save_checkpoint(out_weights, params, hash, state.step, &state);
}

void cmd_eval(const RunConfig& cfg, const std::string& weights,
              const std::string& scenes_dir, const std::string& out_dir,
              bool force) {
  cfg.validate();
  std::vector<Scene> scenes = load_corpus(cfg, scenes_dir, force);
  uint64_t hash = cfg.compat_hash();
  uint64_t expected = force ? checkpoint_config_hash(weights) : hash;

  DenoiserParams params =
      init_denoiser(to_denoiser_config(cfg), derive_seed(cfg.seed, kInitStream));
  load_weights_or_mismatch(weights, params, expected, nullptr);

  EvalOutput out = evaluate_model(cfg, scenes, params);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_file((fs::path(out_dir) / "trajectories.jsonl").string(),
             "{\"config_hash\":\"" + hash_hex(hash) + "\"}\n" +
                 trajectory_sets_to_jsonl(out.sets));
  write_file((fs::path(out_dir) / "metrics.csv").string(),
             eval_metrics_csv(out, hash));
  write_file((fs::path(out_dir) / "summary.json").string(),
             eval_summary_json(out, hash));
}

void cmd_sample(const RunConfig& cfg, const std::string& weights,
                const std::string& scenes_dir, const std::string& out_jsonl,
                bool force) {
  cfg.validate();
  std::vector<Scene> scenes = load_corpus(cfg, scenes_dir, force);
  uint64_t hash = cfg.compat_hash();
  uint64_t expected = force ? checkpoint_config_hash(weights) : hash;

  DenoiserParams params =
      init_denoiser(to_denoiser_config(cfg), derive_seed(cfg.seed, kInitStream));
  load_weights_or_mismatch(weights, params, expected, nullptr);

  EvalOutput out = evaluate_model(cfg, scenes, params);
  write_file(out_jsonl, "{\"config_hash\":\"" + hash_hex(hash) + "\"}\n" +
                            trajectory_sets_to_jsonl(out.sets));
}

EvalOutput train_and_eval(const RunConfig& cfg, const std::vector<Scene>& scenes,
                          DenoiserParams* trained_out) {
  DenoiserParams params =
      init_denoiser(to_denoiser_config(cfg), derive_seed(cfg.seed, kInitStream));
  TrainState state;
  train_model(cfg, scenes, params, state);
  EvalOutput out = evaluate_model(cfg, scenes, params);
  if (trained_out) *trained_out = std::move(params);
  return out;
}

AblationAxis ablation_axis_from_name(const std::string& name) {
  if (name == "kref") return AblationAxis::KRef;
  if (name == "loss") return AblationAxis::Loss;
  if (name == "lambda-safe") return AblationAxis::LambdaSafe;
  throw InvalidConfig("unknown ablation axis '" + name + "'");
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, AblationAxis axis,
                                      const std::vector<Scene>& scenes) {
  struct Variant {
    std::string label;
    RunConfig cfg;
  };
  std::vector<Variant> grid;
  if (axis == AblationAxis::Loss) {
    for (LossVariant v : {LossVariant::L1, LossVariant::L1Ppo, LossVariant::Match,
                          LossVariant::MatchPpo, LossVariant::MatchGrpo}) {
      RunConfig c = cfg;
      c.loss_variant = loss_variant_name(v);
      grid.push_back({c.loss_variant, c});
    }
  } else if (axis == AblationAxis::KRef) {
    for (int k = 0; k <= cfg.k_ref; ++k) {
      RunConfig c = cfg;
      c.k_ref_train = k;
      grid.push_back({std::to_string(k), c});
    }
  } else {
    for (double lam : {0.0, 0.5, 1.0, 2.0, 4.0}) {
      RunConfig c = cfg;
      c.lambda_safe = lam;
      char label[32];
      std::snprintf(label, sizeof(label), "%g", lam);
      grid.push_back({label, c});
    }
  }

  std::vector<AblationRow> rows;
  for (const Variant& v : grid) {
    EvalOutput out = train_and_eval(v.cfg, scenes);
    std::vector<double> marks;
    for (int s = 1; s <= 3; ++s) {
      int idx = int(std::lround(double(s) / out.dt)) - 1;
      marks.push_back(idx >= 0 && idx < int(out.div_at.size())
                          ? out.div_at[size_t(idx)]
                          : 0.0);
    }
    AblationRow row;
    row.label = v.label;
    row.div_1s = marks[0];
    row.div_2s = marks[1];
    row.div_3s = marks[2];
    row.div_avg = headline_div(out);
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows,
                         uint64_t config_hash) {
  std::ostringstream csv;
  csv.precision(17);
  csv << "# config " << hash_hex(config_hash) << "\n";
  csv << "variant,div_1s,div_2s,div_3s,div_avg\n";
  for (const AblationRow& r : rows)
    csv << r.label << "," << r.div_1s << "," << r.div_2s << "," << r.div_3s
        << "," << r.div_avg << "\n";
  return csv.str();
}

void cmd_ablate(const RunConfig& cfg, AblationAxis axis,
                const std::string& out_csv) {
  cfg.validate();
  std::vector<Scene> scenes = generate_corpus(cfg);
  std::vector<AblationRow> rows = run_ablation(cfg, axis, scenes);
  write_file(out_csv, ablation_csv(rows, cfg.compat_hash()));
}

void cmd_plot(const std::string& traj_jsonl, const std::string& scene_path,
              const std::string& out_svg, double d_thresh) {
  Scene scene = load_scene(scene_path);
  std::vector<TrajectorySet> sets = load_trajectory_sets(traj_jsonl);
  std::vector<Trajectory> modes;
  for (const TrajectorySet& s : sets)
    if (s.scene_id == scene.scene_id) {
      modes = s.modes;
      break;
    }
  write_file(out_svg, render_scene_svg(scene, modes, d_thresh));
}

}  // namespace diver
