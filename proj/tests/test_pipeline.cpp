#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "trajlab/pipeline.hpp"

using namespace trajlab;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.corpus_size = 60;
  cfg.n_sample = 15;
  cfg.pool = 60;
  cfg.repeats = 2;
  cfg.seed = 42;
  cfg.max_tokens = 512;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

const std::vector<std::string> kArtifacts = {
    "bfs.jsonl",        "dfs.jsonl",        "mixed.jsonl",
    "features_bfs.csv", "features_dfs.csv", "features_mixed.csv",
    "w1_bfs_bfs.json",  "w1_bfs_mixed.json", "w1_bfs_dfs.json",
    "dyck_dfs.csv",     "bounds.json"};

int run_cli(const std::string& args) {
  const char* cli = std::getenv("TRAJLAB_CLI");
  REQUIRE(cli != nullptr);
  const int status = std::system((std::string(cli) + " " + args).c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("run_pipeline produces every artifact with matching digests") {
  TempDir dir("trajlab_pipe1");
  const RunManifest manifest = run_pipeline(small_config(), dir.str());

  for (const auto& name : kArtifacts) {
    CAPTURE(name);
    REQUIRE(fs::exists(dir.path / name));
  }
  REQUIRE(fs::exists(dir.path / "manifest.json"));

  std::size_t outputs = 0;
  for (const StageRecord& stage : manifest.stages)
    for (const auto& [path, digest] : stage.outputs) {
      ++outputs;
      REQUIRE(digest == digest_hex(read_file(path)));
    }
  REQUIRE(outputs == kArtifacts.size());

  SECTION("every artifact validates cleanly") {
    for (const auto& name : kArtifacts) {
      CAPTURE(name);
      REQUIRE(validate_file((dir.path / name).string()).empty());
    }
    REQUIRE(validate_file((dir.path / "manifest.json").string()).empty());
  }
}

TEST_CASE("pipeline reruns are byte-identical") {
  TempDir a("trajlab_pipe_a"), b("trajlab_pipe_b");
  run_pipeline(small_config(), a.str());
  run_pipeline(small_config(), b.str());
  for (const auto& name : kArtifacts) {
    CAPTURE(name);
    REQUIRE(read_file((a.path / name).string()) ==
            read_file((b.path / name).string()));
  }
}

TEST_CASE("partial output directories are refused without force") {
  TempDir dir("trajlab_pipe2");
  fs::create_directories(dir.path);
  write_file((dir.path / "bfs.jsonl").string(), "stale\n");
  REQUIRE_THROWS_AS(run_pipeline(small_config(), dir.str()), Error);
  run_pipeline(small_config(), dir.str(), /*force=*/true);
  REQUIRE(validate_file((dir.path / "bfs.jsonl").string()).empty());
}

TEST_CASE("a missing corpus aborts with the stage name, keeping prior artifacts") {
  TempDir dir("trajlab_pipe3");
  PipelineConfig cfg = small_config();
  cfg.mixed_path = (dir.path / "no_such_corpus.jsonl").string();
  try {
    run_pipeline(cfg, dir.str());
    FAIL("expected stage failure");
  } catch (const Error& e) {
    REQUIRE(std::string(e.what()).find("stage project_mixed") != std::string::npos);
  }
  REQUIRE(fs::exists(dir.path / "bfs.jsonl"));
  REQUIRE(fs::exists(dir.path / "features_dfs.csv"));
  REQUIRE(!fs::exists(dir.path / "bounds.json"));
}

TEST_CASE("a failing w1 stage is named") {
  TempDir dir("trajlab_pipe4");
  PipelineConfig cfg = small_config();
  cfg.n_sample = 50;  // disjoint halves need 2n <= pool = 60
  try {
    run_pipeline(cfg, dir.str());
    FAIL("expected stage failure");
  } catch (const Error& e) {
    REQUIRE(std::string(e.what()).find("stage w1_bfs_bfs") != std::string::npos);
  }
}

TEST_CASE("validator flags corrupted artifacts") {
  TempDir dir("trajlab_val");
  run_pipeline(small_config(), dir.str());

  SECTION("feature matrix with a broken partition row") {
    const std::string path = (dir.path / "features_bfs.csv").string();
    auto rows = from_csv(read_file(path));
    rows[3][4] += 0.25;  // chi5 no longer partitions
    write_file(path, to_csv(rows));
    const auto diags = validate_file(path);
    REQUIRE(!diags.empty());
    bool named = false;
    for (const auto& d : diags)
      named = named || d.find("row 4") != std::string::npos;
    REQUIRE(named);
  }

  SECTION("corpus with a node depth mismatch") {
    const std::string path = (dir.path / "bfs.jsonl").string();
    auto corpus = read_corpus(path);
    corpus[2].nodes[0].depth = 7;
    write_corpus(path, corpus);
    const auto diags = validate_file(path);
    REQUIRE(!diags.empty());
  }

  SECTION("unreadable file yields an io diagnostic") {
    const auto diags = validate_file((dir.path / "missing.json").string());
    REQUIRE(diags.size() == 1);
    REQUIRE(diags[0].rfind("io:", 0) == 0);
  }
}

TEST_CASE("cli round trip") {
  TempDir dir("trajlab_cli_rt");
  fs::create_directories(dir.path);
  const std::string corpus = (dir.path / "c.jsonl").string();
  const std::string features = (dir.path / "f.csv").string();
  const std::string report = (dir.path / "w.json").string();
  const std::string plan = (dir.path / "p.json").string();

  REQUIRE(run_cli("gen --strategy dfs --n 40 --seed 9 --out " + corpus +
                  " --t-max 512 > /dev/null") == 0);
  REQUIRE(run_cli("project --in " + corpus + " --out " + features +
                  " > /dev/null") == 0);
  REQUIRE(run_cli("w1 --a " + corpus + " --b " + corpus +
                  " --n 10 --pool 40 --repeats 2 --seed 3 --out " + report +
                  " --dump-plan " + plan + " > /dev/null") == 0);
  REQUIRE(run_cli("validate " + corpus + " " + features + " " + report + " " +
                  plan + " > /dev/null") == 0);

  SECTION("validation failures exit 1") {
    auto rows = from_csv(read_file(features));
    rows[0][3] = -2.0;
    write_file(features, to_csv(rows));
    REQUIRE(run_cli("validate " + features + " > /dev/null") == 1);
  }

  SECTION("perturbed couplings are caught") {
    ojson j = ojson::parse(read_file(plan));
    auto coupling = j["coupling"].get<std::vector<double>>();
    coupling[0] += 1e-3;
    j["coupling"] = coupling;
    write_file(plan, j.dump() + "\n");
    REQUIRE(run_cli("validate " + plan + " > /dev/null") == 1);
  }

  SECTION("usage errors exit 2") {
    REQUIRE(run_cli("gen --strategy dfs --n 5 --out x.jsonl 2>/dev/null") == 2);
    REQUIRE(run_cli("no-such-command 2>/dev/null") == 2);
    REQUIRE(run_cli("gen --strategy quux --n 5 --seed 1 --out x.jsonl 2>/dev/null") == 2);
  }

  SECTION("exact oracle route with the cap enforced") {
    const std::string exact_report = (dir.path / "we.json").string();
    REQUIRE(run_cli("w1 --a " + corpus + " --b " + corpus +
                    " --n 30 --seed 3 --exact --out " + exact_report +
                    " > /dev/null") == 0);
    const ojson j = ojson::parse(read_file(exact_report));
    REQUIRE(j["exact"].get<bool>());
    REQUIRE(j["normalized"].get<bool>() == false);
    // above the oracle cap: 101 * 101 > 10000
    const std::string big = (dir.path / "big.jsonl").string();
    REQUIRE(run_cli("gen --strategy bfs --n 101 --seed 4 --out " + big +
                    " > /dev/null") == 0);
    REQUIRE(run_cli("w1 --a " + big + " --b " + big +
                    " --n 101 --seed 3 --exact --out " + exact_report +
                    " 2>/dev/null") == 2);
  }

  SECTION("kernel sweep, bounds, and calibrate subcommands") {
    const std::string sweep = (dir.path / "s.json").string();
    REQUIRE(run_cli("kernel-sweep --encoding rope --dim 16 --probes 50 "
                    "--shifts 1,4 --seed 5 --out " + sweep + " > /dev/null") == 0);
    REQUIRE(run_cli("validate " + sweep + " > /dev/null") == 0);

    const std::string inputs = (dir.path / "in.json").string();
    write_file(inputs, R"({"m":256,"L":6,"epsilon":0.01,"source_risk":0.2,)"
                       R"("K_f":0.5,"W1":0.4})");
    const std::string bound_report = (dir.path / "b.json").string();
    REQUIRE(run_cli("bounds --inputs " + inputs + " --chi1 " + features +
                    " --out " + bound_report + " > /dev/null") == 0);
    REQUIRE(run_cli("validate " + bound_report + " > /dev/null") == 0);

    const std::string points = (dir.path / "pts.csv").string();
    write_file(points, "L,accuracy\n2,0.41\n6,0.47\n12,0.505\n24,0.52\n48,0.53\n");
    const std::string fit = (dir.path / "fit.json").string();
    REQUIRE(run_cli("calibrate --points " + points + " --out " + fit +
                    " > /dev/null") == 0);
    REQUIRE(run_cli("validate " + fit + " > /dev/null") == 0);
  }
}
