// Command-line front end: generate/project/w1/dyck/kernel-sweep/bounds/
// calibrate subcommands plus an end-to-end pipeline and an artifact validator.
//
// Exit codes: 0 success, 1 validation failure, 2 usage error, 3 internal error.

#include <cstdio>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trajlab/bounds.hpp"
#include "trajlab/corpus_io.hpp"
#include "trajlab/dyck.hpp"
#include "trajlab/kernel.hpp"
#include "trajlab/pipeline.hpp"
#include "trajlab/projection.hpp"
#include "trajlab/transport.hpp"
#include "trajlab/version.hpp"

namespace {

using namespace trajlab;

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    const std::string item = csv.substr(pos, comma - pos);
    if (!item.empty()) out.push_back(std::stoi(item));
    pos = comma + 1;
  }
  if (out.empty()) throw DomainError("empty integer list");
  return out;
}

std::vector<CeilingPoint> read_points_csv(const std::string& path) {
  const std::string content = read_file(path);
  std::vector<CeilingPoint> pts;
  std::size_t pos = 0;
  bool first = true;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    const std::string line = content.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == "L,accuracy") continue;
    }
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw IoError(path + ": expected `L,accuracy` rows");
    pts.push_back({std::stod(line.substr(0, comma)),
                   std::stod(line.substr(comma + 1))});
  }
  return pts;
}

int run(int argc, char** argv) {
  CLI::App app{"structural analysis of combinatorial search trajectories"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a trajectory corpus");
  std::string gen_strategy = "bfs", gen_out;
  int gen_n = 1, gen_tmax = 1024, gen_branching = 4;
  std::uint64_t gen_seed = 0;
  gen->add_option("--strategy", gen_strategy, "bfs|dfs|mixed")->required();
  gen->add_option("--n", gen_n, "corpus size")->required();
  gen->add_option("--seed", gen_seed, "generation seed")->required();
  gen->add_option("--out", gen_out, "output corpus (.jsonl)")->required();
  gen->add_option("--t-max", gen_tmax, "token budget per trajectory");
  gen->add_option("--branching", gen_branching, "children kept per node (1..9)");

  // ---- project ----
  auto* project_cmd = app.add_subcommand("project", "project a corpus to chi features");
  std::string project_in, project_out;
  project_cmd->add_option("--in", project_in, "corpus (.jsonl)")->required();
  project_cmd->add_option("--out", project_out, "feature CSV")->required();

  // ---- w1 ----
  auto* w1 = app.add_subcommand("w1", "pairwise structural W1 estimate");
  std::string w1_a, w1_b, w1_out, w1_dump_plan;
  int w1_n = 2000, w1_pool = 20000, w1_repeats = 5;
  double w1_lambda = 0.1;
  std::uint64_t w1_seed = 0;
  bool w1_exact = false;
  w1->add_option("--a", w1_a, "first corpus (.jsonl)")->required();
  w1->add_option("--b", w1_b, "second corpus (.jsonl)")->required();
  w1->add_option("--n", w1_n, "sample size per side");
  w1->add_option("--pool", w1_pool, "candidate pool size per side");
  w1->add_option("--lambda", w1_lambda, "entropic regularization");
  w1->add_option("--repeats", w1_repeats, "independent subsample repeats");
  w1->add_option("--seed", w1_seed, "sampling seed")->required();
  w1->add_option("--out", w1_out, "report JSON")->required();
  w1->add_flag("--exact", w1_exact,
               "exact solver on raw standardized costs (n*m <= 10000)");
  w1->add_option("--dump-plan", w1_dump_plan,
                 "also write the final repeat's coupling JSON here");

  // ---- dyck ----
  auto* dyck_cmd = app.add_subcommand("dyck", "per-trajectory Dyck depth report");
  std::string dyck_in, dyck_report;
  dyck_cmd->add_option("--in", dyck_in, "corpus (.jsonl)")->required();
  dyck_cmd->add_option("--report", dyck_report, "output CSV")->required();

  // ---- kernel-sweep ----
  auto* sweep = app.add_subcommand("kernel-sweep", "shift sensitivity sweep");
  std::string sweep_encoding = "rope", sweep_shifts = "1,4,16,64,256", sweep_out;
  int sweep_dim = 64, sweep_probes = 1000, sweep_maxpos = 2048;
  double sweep_threshold = 1e-9;
  std::uint64_t sweep_seed = 0;
  sweep->add_option("--encoding", sweep_encoding, "ape|ape-sin|rope")->required();
  sweep->add_option("--dim", sweep_dim, "head dimension (even)");
  sweep->add_option("--probes", sweep_probes, "probes per shift value");
  sweep->add_option("--shifts", sweep_shifts, "comma-separated shift list");
  sweep->add_option("--seed", sweep_seed, "probe seed")->required();
  sweep->add_option("--max-position", sweep_maxpos, "position table size");
  sweep->add_option("--positive-threshold", sweep_threshold,
                    "delta treated as positive above this");
  sweep->add_option("--out", sweep_out, "sweep report JSON")->required();

  // ---- bounds ----
  auto* bounds_cmd = app.add_subcommand("bounds", "evaluate the generalization bounds");
  std::string bounds_inputs, bounds_chi1, bounds_out;
  bounds_cmd->add_option("--inputs", bounds_inputs, "BoundInputs JSON")->required();
  bounds_cmd->add_option("--chi1", bounds_chi1,
                         "feature CSV supplying the chi1 samples");
  bounds_cmd->add_option("--out", bounds_out, "report JSON")->required();

  // ---- calibrate ----
  auto* calibrate = app.add_subcommand("calibrate", "fit the accuracy ceiling");
  std::string cal_points, cal_out;
  calibrate->add_option("--points", cal_points, "CSV of L,accuracy rows")->required();
  calibrate->add_option("--out", cal_out, "fit JSON")->required();

  // ---- pipeline ----
  auto* pipe = app.add_subcommand("pipeline", "run the full analysis");
  std::string pipe_config, pipe_out;
  bool pipe_force = false;
  std::uint64_t pipe_seed = 0;
  int pipe_corpus_size = -1, pipe_n_sample = -1, pipe_repeats = -1;
  pipe->add_option("--config", pipe_config, "pipeline config JSON");
  pipe->add_option("--out", pipe_out, "output directory")->required();
  pipe->add_flag("--force", pipe_force, "overwrite existing artifacts");
  auto* pipe_seed_opt = pipe->add_option("--seed", pipe_seed, "master seed");
  pipe->add_option("--corpus-size", pipe_corpus_size, "trajectories per measure");
  pipe->add_option("--n-sample", pipe_n_sample, "W1 sample size");
  pipe->add_option("--repeats", pipe_repeats, "W1 repeats");

  // ---- validate ----
  auto* validate = app.add_subcommand("validate", "check artifact files");
  std::vector<std::string> validate_paths;
  validate->add_option("files", validate_paths, "artifacts to check")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  if (*gen) {
    GenerationConfig cfg;
    cfg.strategy = strategy_from_string(gen_strategy);
    cfg.corpus_size = gen_n;
    cfg.seed = gen_seed;
    cfg.max_tokens = gen_tmax;
    cfg.max_branching = gen_branching;
    cfg.validate();
    std::string body;
    for (int i = 0; i < cfg.corpus_size; ++i) {
      body += corpus_line(generate_one(cfg, static_cast<std::uint64_t>(i)));
      body += '\n';
    }
    write_file(gen_out, body);
    std::printf("wrote %d trajectories to %s\n", gen_n, gen_out.c_str());
    return 0;
  }

  if (*project_cmd) {
    const auto rows = project_corpus(read_corpus(project_in));
    write_file(project_out, to_csv(rows));
    std::printf("wrote %zu feature rows to %s\n", rows.size(), project_out.c_str());
    return 0;
  }

  if (*w1) {
    if (w1_exact) {
      const auto corpus_a = read_corpus(w1_a);
      const auto corpus_b = read_corpus(w1_b);
      const auto take = [&](const std::vector<Trajectory>& corpus,
                            std::uint64_t tag) {
        std::vector<std::size_t> ids(corpus.size());
        std::iota(ids.begin(), ids.end(), std::size_t{0});
        Rng rng = Rng::stream(w1_seed, tag);
        rng.shuffle(ids);
        const std::size_t n =
            std::min<std::size_t>(static_cast<std::size_t>(w1_n), ids.size());
        std::vector<std::array<double, 12>> pts;
        for (std::size_t i = 0; i < n; ++i)
          pts.push_back(project(corpus[ids[i]]).chi);
        return EmpiricalMeasure::uniform(std::move(pts));
      };
      auto [std_measures, stats] = standardize({take(corpus_a, 0xA), take(corpus_b, 0xB)});
      (void)stats;
      const ExactPlan plan = exact_w1(std_measures[0], std_measures[1]);
      W1Report report;
      report.pair_name = w1_a + "|" + w1_b;
      report.lambda = 0.0;
      report.n_sample = static_cast<int>(std_measures[0].size());
      report.pool = w1_pool;
      report.repeats = 1;
      report.seed = w1_seed;
      report.values = {plan.value};
      report.mean = plan.value;
      report.stddev = 0.0;
      report.normalized = false;
      report.exact = true;
      write_file(w1_out, w1_report_to_json(report).dump(2) + "\n");
      std::printf("exact W1 = %.6f -> %s\n", plan.value, w1_out.c_str());
      return 0;
    }
    TransportPlan plan;
    const W1Report report =
        pipeline_w1(w1_a, w1_b, w1_n, w1_pool, w1_repeats, w1_seed, w1_lambda,
                    10000, 1e-9, w1_dump_plan.empty() ? nullptr : &plan);
    write_file(w1_out, w1_report_to_json(report).dump(2) + "\n");
    if (!w1_dump_plan.empty()) {
      const std::vector<double> marg(static_cast<std::size_t>(w1_n),
                                     1.0 / static_cast<double>(w1_n));
      write_file(w1_dump_plan, plan_to_json(plan, marg, marg).dump() + "\n");
    }
    std::printf("W1[%s] mean=%.6f std=%.6f -> %s\n", report.pair_name.c_str(),
                report.mean, report.stddev, w1_out.c_str());
    return 0;
  }

  if (*dyck_cmd) {
    const auto corpus = read_corpus(dyck_in);
    write_file(dyck_report, dyck_report_csv(corpus));
    std::printf("wrote %zu dyck rows to %s\n", corpus.size(), dyck_report.c_str());
    return 0;
  }

  if (*sweep) {
    KernelConfig cfg;
    cfg.encoding = encoding_from_string(sweep_encoding);
    cfg.head_dim = sweep_dim;
    cfg.max_position = sweep_maxpos;
    cfg.seed = sweep_seed;
    cfg.validate();
    const KernelState state = KernelState::init(cfg);
    const SweepReport report =
        shift_sweep(state, cfg, sweep_probes, parse_int_list(sweep_shifts),
                    sweep_seed, sweep_threshold);
    write_file(sweep_out,
               sweep_report_to_json(report, cfg, sweep_probes, sweep_seed).dump(2) +
                   "\n");
    std::printf("wrote %zu sweep rows to %s\n", report.rows.size(), sweep_out.c_str());
    return 0;
  }

  if (*bounds_cmd) {
    BoundInputs in = bound_inputs_from_json(ojson::parse(read_file(bounds_inputs)));
    if (!bounds_chi1.empty()) {
      in.target_chi1_samples.clear();
      for (const auto& row : from_csv(read_file(bounds_chi1)))
        in.target_chi1_samples.push_back(row[0]);
    }
    const BoundReport report = unified_bound(in);
    write_file(bounds_out, bound_report_to_json(report, in).dump(2) + "\n");
    std::printf("lower=%.6f upper=%.6f active=%s -> %s\n", report.lower_bound,
                report.upper_bound, to_string(report.active_term),
                bounds_out.c_str());
    return 0;
  }

  if (*calibrate) {
    const CeilingFit fit = ceiling_fit(read_points_csv(cal_points));
    write_file(cal_out, ceiling_fit_to_json(fit).dump(2) + "\n");
    std::printf("a_max=%.6f beta=%.6f alpha=%.6f violations=%d -> %s\n",
                fit.a_max, fit.beta, fit.alpha, fit.violations, cal_out.c_str());
    return 0;
  }

  if (*pipe) {
    PipelineConfig cfg;
    if (!pipe_config.empty())
      cfg = PipelineConfig::from_json(ojson::parse(read_file(pipe_config)));
    else if (pipe_seed_opt->count() == 0)
      throw DomainError("pipeline needs --seed when no --config is given");
    if (pipe_seed_opt->count() > 0) cfg.seed = pipe_seed;
    if (pipe_corpus_size > 0) cfg.corpus_size = pipe_corpus_size;
    if (pipe_n_sample > 0) cfg.n_sample = pipe_n_sample;
    if (pipe_repeats > 0) cfg.repeats = pipe_repeats;
    run_pipeline(cfg, pipe_out, pipe_force);
    std::printf("pipeline complete -> %s/manifest.json\n", pipe_out.c_str());
    return 0;
  }

  if (*validate) {
    bool any = false;
    for (const std::string& path : validate_paths) {
      const auto diagnostics = validate_file(path);
      for (const std::string& d : diagnostics) {
        std::printf("%s: %s\n", path.c_str(), d.c_str());
        any = true;
      }
      if (diagnostics.empty()) std::printf("%s: ok\n", path.c_str());
    }
    return any ? 1 : 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const trajlab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
}
