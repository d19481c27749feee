#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

// Spawns the real binary (path injected by the build) and checks the
// documented exit-code contract: 0 ok, 1 runtime failure, 2 bad usage.

namespace {

namespace fs = std::filesystem;

struct Workdir {
  fs::path root;
  Workdir() {
    root = fs::temp_directory_path() / ("cli_test_" + std::to_string(::getpid()));
    fs::create_directories(root);
  }
  ~Workdir() { fs::remove_all(root); }
  std::string operator/(const char* name) const { return (root / name).string(); }
};

int run(const std::string& args) {
  std::string cmd = std::string(DIVER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* kTinyConfig =
    "seed = 7\n"
    "num_scenes = 10\n"
    "embed_dim = 8\n"
    "heads = 2\n"
    "num_steps = 12\n"
    "denoise_steps = 4\n"
    "epochs = 1\n";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("scene-gen --no-such-flag x") == 2);
  CHECK(run("scene-gen") == 2);  // --config and --out are required
}

TEST_CASE("bad configs exit with 2, bad files with 1") {
  Workdir dir;
  write_text(dir / "bad_key.txt", "volume = 11\n");
  CHECK(run("scene-gen --config " + (dir / "bad_key.txt") + " --out " +
            (dir / "scenes")) == 2);

  write_text(dir / "bad_tpl.txt", "templates = Straight,Zigzag\n");
  CHECK(run("scene-gen --config " + (dir / "bad_tpl.txt") + " --out " +
            (dir / "scenes")) == 2);

  CHECK(run("scene-gen --config " + (dir / "absent.txt") + " --out " +
            (dir / "scenes")) == 1);
}

TEST_CASE("corpus generation is complete and repeatable") {
  Workdir dir;
  write_text(dir / "cfg.txt", kTinyConfig);
  REQUIRE(run("scene-gen --config " + (dir / "cfg.txt") + " --out " +
              (dir / "scenes")) == 0);

  size_t scene_files = 0;
  for (const auto& ent : fs::directory_iterator(dir / "scenes"))
    if (ent.path().filename().string().rfind("scene_", 0) == 0) ++scene_files;
  CHECK(scene_files == 10);
  CHECK(fs::exists(fs::path(dir / "scenes") / "manifest.json"));

  REQUIRE(run("scene-gen --config " + (dir / "cfg.txt") + " --out " +
              (dir / "scenes_again")) == 0);
  CHECK(read_text((fs::path(dir / "scenes") / "manifest.json").string()) ==
        read_text((fs::path(dir / "scenes_again") / "manifest.json").string()));
  CHECK(read_text((fs::path(dir / "scenes") / "scene_0003.json").string()) ==
        read_text((fs::path(dir / "scenes_again") / "scene_0003.json").string()));
}

TEST_CASE("an empty corpus is legal") {
  Workdir dir;
  write_text(dir / "cfg.txt", "num_scenes = 0\n");
  CHECK(run("scene-gen --config " + (dir / "cfg.txt") + " --out " +
            (dir / "scenes")) == 0);
  std::string manifest =
      read_text((fs::path(dir / "scenes") / "manifest.json").string());
  CHECK(manifest.find("\"num_scenes\": 0") != std::string::npos);
}

TEST_CASE("train, eval, and sample chain together") {
  Workdir dir;
  write_text(dir / "cfg.txt", kTinyConfig);
  REQUIRE(run("scene-gen --config " + (dir / "cfg.txt") + " --out " +
              (dir / "scenes")) == 0);
  REQUIRE(run("train --config " + (dir / "cfg.txt") + " --scenes " +
              (dir / "scenes") + " --out " + (dir / "model.ckpt")) == 0);
  CHECK(fs::exists(dir / "model.ckpt"));
  CHECK(fs::exists(dir / "model.ckpt.csv"));

  std::string train_log = read_text(dir / "model.ckpt.csv");
  CHECK(train_log.find("step,epoch,l_match") != std::string::npos);

  REQUIRE(run("eval --config " + (dir / "cfg.txt") + " --weights " +
              (dir / "model.ckpt") + " --scenes " + (dir / "scenes") +
              " --out " + (dir / "report")) == 0);
  CHECK(fs::exists(fs::path(dir / "report") / "trajectories.jsonl"));
  CHECK(fs::exists(fs::path(dir / "report") / "metrics.csv"));
  CHECK(fs::exists(fs::path(dir / "report") / "summary.json"));

  REQUIRE(run("sample --config " + (dir / "cfg.txt") + " --weights " +
              (dir / "model.ckpt") + " --scenes " + (dir / "scenes") +
              " --out " + (dir / "samples.jsonl")) == 0);
  CHECK(read_text(dir / "samples.jsonl") ==
        read_text((fs::path(dir / "report") / "trajectories.jsonl").string()));

  // a corpus built from a different seed no longer matches the weights
  write_text(dir / "other.txt", std::string(kTinyConfig) + "seed = 8\n");
  REQUIRE(run("scene-gen --config " + (dir / "other.txt") + " --out " +
              (dir / "scenes8")) == 0);
  CHECK(run("eval --config " + (dir / "other.txt") + " --weights " +
            (dir / "model.ckpt") + " --scenes " + (dir / "scenes8") +
            " --out " + (dir / "report8")) == 1);
  CHECK(run("eval --config " + (dir / "other.txt") + " --weights " +
            (dir / "model.ckpt") + " --scenes " + (dir / "scenes8") +
            " --out " + (dir / "report8") + " --force") == 0);
}

TEST_CASE("scene drawings are valid and stable") {
  Workdir dir;
  write_text(dir / "cfg.txt", kTinyConfig);
  REQUIRE(run("scene-gen --config " + (dir / "cfg.txt") + " --out " +
              (dir / "scenes")) == 0);

  std::string scene = (fs::path(dir / "scenes") / "scene_0000.json").string();
  write_text(dir / "empty.jsonl", "");
  REQUIRE(run("plot --trajectories " + (dir / "empty.jsonl") + " --scene " +
              scene + " --out " + (dir / "bare.svg")) == 0);
  std::string bare = read_text(dir / "bare.svg");
  CHECK(bare.rfind("<svg", 0) == 0);
  CHECK(bare.find("</svg>") != std::string::npos);

  write_text(dir / "one.jsonl",
             "{\"scene_id\":\"scene_0000\",\"mode\":0,\"dt\":0.5,"
             "\"points\":[[5,0],[10,1],[15,3]]}\n");
  REQUIRE(run("plot --trajectories " + (dir / "one.jsonl") + " --scene " +
              scene + " --out " + (dir / "a.svg")) == 0);
  REQUIRE(run("plot --trajectories " + (dir / "one.jsonl") + " --scene " +
              scene + " --out " + (dir / "b.svg")) == 0);
  std::string a = read_text(dir / "a.svg");
  CHECK(a == read_text(dir / "b.svg"));
  CHECK(a.size() > bare.size());  // the polyline actually landed

  write_text(dir / "broken.jsonl", "{nope\n");
  CHECK(run("plot --trajectories " + (dir / "broken.jsonl") + " --scene " +
            scene + " --out " + (dir / "c.svg")) == 1);
}
