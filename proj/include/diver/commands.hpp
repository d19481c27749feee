#pragma once
#include <string>
#include <vector>

#include "diver/config.hpp"
#include "diver/denoiser.hpp"
#include "diver/eval.hpp"
#include "diver/scene.hpp"

namespace diver {

// Deterministic corpus: templates cycle in the configured order, per-scene
// seeds derive from the config seed, and the anchor vocabulary is clustered
// over the finished corpus (kept per-scene when the corpus is smaller than
// the mode count).
std::vector<Scene> generate_corpus(const RunConfig& cfg);

// Corpus directory helpers. The manifest records the compat hash; loading
// verifies it unless force is set.
void save_corpus(const RunConfig& cfg, const std::vector<Scene>& scenes,
                 const std::string& out_dir);
std::vector<Scene> load_corpus(const RunConfig& cfg, const std::string& dir,
                               bool force = false);

// Train one variant on an in-memory corpus and evaluate it on the same
// scenes. The trained weights are handed back when a sink is given.
EvalOutput train_and_eval(const RunConfig& cfg, const std::vector<Scene>& scenes,
                          DenoiserParams* trained_out = nullptr);

enum class AblationAxis { KRef, Loss, LambdaSafe };
AblationAxis ablation_axis_from_name(const std::string& name);  // InvalidConfig

struct AblationRow {
  std::string label;
  double div_1s = 0.0, div_2s = 0.0, div_3s = 0.0, div_avg = 0.0;
};

std::vector<AblationRow> run_ablation(const RunConfig& cfg, AblationAxis axis,
                                      const std::vector<Scene>& scenes);
std::string ablation_csv(const std::vector<AblationRow>& rows,
                         uint64_t config_hash);

// CLI entry points. All throw on failure; the binary maps exception classes
// to exit codes.
void cmd_scene_gen(const RunConfig& cfg, const std::string& out_dir);
void cmd_train(const RunConfig& cfg, const std::string& scenes_dir,
               const std::string& out_weights, const std::string& resume_path = "");
void cmd_eval(const RunConfig& cfg, const std::string& weights,
              const std::string& scenes_dir, const std::string& out_dir,
              bool force = false);
void cmd_sample(const RunConfig& cfg, const std::string& weights,
                const std::string& scenes_dir, const std::string& out_jsonl,
                bool force = false);
void cmd_ablate(const RunConfig& cfg, AblationAxis axis,
                const std::string& out_csv);
void cmd_plot(const std::string& traj_jsonl, const std::string& scene_path,
              const std::string& out_svg, double d_thresh = 0.5);

}  // namespace diver
