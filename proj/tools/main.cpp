#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "diver/commands.hpp"
#include "diver/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-mode trajectory generator on synthetic driving scenes: "
               "corpus generation, diffusion training, evaluation, ablations"};
  app.require_subcommand(1);

  std::string config_path, out, scenes_dir, weights, resume, traj_path,
      scene_path, axis = "loss";
  bool force = false;
  double d_thresh = 0.5;

  CLI::App* gen = app.add_subcommand("scene-gen", "Generate a scene corpus");
  gen->add_option("--config", config_path, "key=value config file")->required();
  gen->add_option("--out", out, "output directory")->required();

  CLI::App* train = app.add_subcommand("train", "Train a model on a corpus");
  train->add_option("--config", config_path, "key=value config file")->required();
  train->add_option("--scenes", scenes_dir, "corpus directory")->required();
  train->add_option("--out", out, "checkpoint to write")->required();
  train->add_option("--resume", resume, "checkpoint to continue from");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--config", config_path, "key=value config file")->required();
  eval->add_option("--weights", weights, "checkpoint to evaluate")->required();
  eval->add_option("--scenes", scenes_dir, "corpus directory")->required();
  eval->add_option("--out", out, "output directory")->required();
  eval->add_flag("--force", force, "skip config hash checks");

  CLI::App* sample = app.add_subcommand("sample", "Write sampled trajectories");
  sample->add_option("--config", config_path, "key=value config file")->required();
  sample->add_option("--weights", weights, "checkpoint to sample")->required();
  sample->add_option("--scenes", scenes_dir, "corpus directory")->required();
  sample->add_option("--out", out, "JSONL file to write")->required();
  sample->add_flag("--force", force, "skip config hash checks");

  CLI::App* ablate = app.add_subcommand("ablate", "Run an ablation sweep");
  ablate->add_option("--config", config_path, "key=value config file")->required();
  ablate->add_option("--axis", axis, "kref | loss | lambda-safe");
  ablate->add_option("--out", out, "CSV file to write")->required();

  CLI::App* plot = app.add_subcommand("plot", "Render one scene to SVG");
  plot->add_option("--trajectories", traj_path, "trajectory JSONL")->required();
  plot->add_option("--scene", scene_path, "scene JSON file")->required();
  plot->add_option("--out", out, "SVG file to write")->required();
  plot->add_option("--d-thresh", d_thresh, "clearance contour level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (plot->parsed()) {
      diver::cmd_plot(traj_path, scene_path, out, d_thresh);
      return 0;
    }
    diver::RunConfig cfg = diver::load_config(config_path);
    cfg.validate();
    if (gen->parsed()) {
      diver::cmd_scene_gen(cfg, out);
    } else if (train->parsed()) {
      diver::cmd_train(cfg, scenes_dir, out, resume);
    } else if (eval->parsed()) {
      diver::cmd_eval(cfg, weights, scenes_dir, out, force);
    } else if (sample->parsed()) {
      diver::cmd_sample(cfg, weights, scenes_dir, out, force);
    } else if (ablate->parsed()) {
      diver::cmd_ablate(cfg, diver::ablation_axis_from_name(axis), out);
    }
    return 0;
  } catch (const diver::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << "\n"
              << "run '" << argv[0] << " --help' for usage\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
