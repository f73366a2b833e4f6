#pragma once

/**
 * End-to-end orchestration and artifact validation.
 *
 * run_pipeline executes generate (BFS/DFS/MIXED) -> project -> pairwise W1 ->
 * dyck report -> bounds report into an output directory and writes a manifest
 * with a digest per artifact. Identical seeds reproduce byte-identical
 * artifacts; wall-clock timings live only in the manifest.
 *
 * validate_file schema- and invariant-checks any artifact this toolkit emits
 * and returns one diagnostic string per violation.
 */

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajlab/bounds.hpp"
#include "trajlab/corpus_io.hpp"
#include "trajlab/dyck.hpp"
#include "trajlab/kernel.hpp"
#include "trajlab/projection.hpp"
#include "trajlab/transport.hpp"
#include "trajlab/version.hpp"

namespace trajlab {

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string digest_hex(std::string_view data) {
  static const char* hex = "0123456789abcdef";
  const std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[15 - i] = hex[(h >> (4 * i)) & 0xF];
  return out;
}

// ============================================================================
// Report serialization
// ============================================================================

inline ojson w1_report_to_json(const W1Report& r) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["pair"] = r.pair_name;
  j["lambda"] = r.lambda;
  j["n_sample"] = r.n_sample;
  j["pool"] = r.pool;
  j["repeats"] = r.repeats;
  j["seed"] = r.seed;
  j["values"] = r.values;
  j["mean"] = r.mean;
  j["std"] = r.stddev;
  j["normalized"] = r.normalized;
  j["exact"] = r.exact;
  j["warnings"] = r.warnings;
  return j;
}

inline ojson sweep_report_to_json(const SweepReport& r, const KernelConfig& cfg,
                                  int probes, std::uint64_t seed) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["encoding"] = to_string(cfg.encoding);
  j["dim"] = cfg.head_dim;
  j["max_position"] = cfg.max_position;
  j["probes"] = probes;
  j["positive_threshold"] = r.positive_threshold;
  j["seed"] = seed;
  ojson rows = ojson::array();
  for (const SweepRow& row : r.rows)
    rows.push_back({{"encoding", row.encoding},
                    {"k", row.k},
                    {"mean_dA", row.mean_da},
                    {"max_dA", row.max_da},
                    {"frac_positive", row.frac_positive},
                    {"probes_used", row.probes_used},
                    {"skipped", row.skipped}});
  j["rows"] = std::move(rows);
  j["lipschitz_proxy"] = r.lipschitz_proxy;
  return j;
}

inline ojson bound_inputs_to_json(const BoundInputs& in) {
  ojson j;
  j["m"] = in.m;
  j["L"] = in.L;
  j["alpha_circ"] = in.alpha_circ;
  j["epsilon"] = in.epsilon;
  j["C_width"] = in.C_width;
  j["vocab_size"] = in.vocab_size;
  j["K_f"] = in.K_f;
  j["W1"] = in.W1;
  j["source_risk"] = in.source_risk;
  j["target_chi1_samples"] = in.target_chi1_samples;
  return j;
}

inline BoundInputs bound_inputs_from_json(const ojson& j) {
  BoundInputs in;
  if (j.contains("m")) in.m = j.at("m").get<int>();
  if (j.contains("L")) in.L = j.at("L").get<int>();
  if (j.contains("alpha_circ")) in.alpha_circ = j.at("alpha_circ").get<double>();
  if (j.contains("epsilon")) in.epsilon = j.at("epsilon").get<double>();
  if (j.contains("C_width")) in.C_width = j.at("C_width").get<double>();
  if (j.contains("vocab_size")) in.vocab_size = j.at("vocab_size").get<long long>();
  if (j.contains("K_f")) in.K_f = j.at("K_f").get<double>();
  if (j.contains("W1")) in.W1 = j.at("W1").get<double>();
  if (j.contains("source_risk")) in.source_risk = j.at("source_risk").get<double>();
  if (j.contains("target_chi1_samples"))
    in.target_chi1_samples =
        j.at("target_chi1_samples").get<std::vector<double>>();
  return in;
}

inline ojson bound_report_to_json(const BoundReport& r, const BoundInputs& in) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  ojson echo = bound_inputs_to_json(in);
  echo.erase("target_chi1_samples");
  echo["n_chi1_samples"] = in.target_chi1_samples.size();
  j["inputs"] = std::move(echo);
  j["lb_width"] = r.lb_width;
  j["lb_depth"] = r.lb_depth;
  j["lb_transport"] = r.lb_transport;
  j["lower_bound"] = r.lower_bound;
  j["upper_bound"] = r.upper_bound;
  j["active_term"] = to_string(r.active_term);
  j["p_deep"] = r.p_deep;
  j["c_depth"] = r.c_depth;
  j["consistent"] = r.consistent;
  return j;
}

inline ojson ceiling_fit_to_json(const CeilingFit& f) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["a_max"] = f.a_max;
  j["beta"] = f.beta;
  j["alpha"] = f.alpha;
  j["violations"] = f.violations;
  return j;
}

inline ojson plan_to_json(const TransportPlan& plan, const std::vector<double>& p,
                          const std::vector<double>& q) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["rows"] = plan.rows;
  j["cols"] = plan.cols;
  j["lambda"] = plan.lambda;
  j["p"] = p;
  j["q"] = q;
  j["coupling"] = plan.coupling;
  j["transport_cost"] = plan.transport_cost;
  j["regularized_objective"] = plan.regularized_objective;
  j["marginal_error"] = plan.marginal_error;
  j["iterations_used"] = plan.iterations_used;
  j["converged"] = plan.converged;
  return j;
}

// Per-trajectory dyck report rows: chi1, Dyck nesting depth, prefix validity.
inline std::string dyck_report_csv(const std::vector<Trajectory>& corpus) {
  std::string out = "chi1,nesting_depth,valid\n";
  for (const Trajectory& t : corpus) {
    const StructuralVector v = project(t);
    const DyckString d = psi(to_transitions(t));
    const BalanceCheck check = check_balanced_prefix(d);
    const int nest = check.valid ? nesting_depth(d) : -1;
    out += render_double_17(v[0]);
    out += ',';
    out += std::to_string(nest);
    out += ',';
    out += check.valid ? '1' : '0';
    out += '\n';
  }
  return out;
}

// ============================================================================
// Pipeline
// ============================================================================

struct PipelineConfig {
  int corpus_size = 2000;
  int n_sample = 200;
  int pool = 2000;
  double lambda = 0.1;
  int repeats = 5;
  std::uint64_t seed = 42;
  int max_tokens = 1024;
  int max_branching = 4;
  // When set, the named corpus is not regenerated; the path is used as-is.
  std::string bfs_path, dfs_path, mixed_path;
  BoundInputs bounds;  // target_chi1_samples and W1 are filled by the run

  static PipelineConfig from_json(const ojson& j) {
    PipelineConfig c;
    if (j.contains("corpus_size")) c.corpus_size = j.at("corpus_size").get<int>();
    if (j.contains("n_sample")) c.n_sample = j.at("n_sample").get<int>();
    if (j.contains("pool")) c.pool = j.at("pool").get<int>();
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("repeats")) c.repeats = j.at("repeats").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("max_tokens")) c.max_tokens = j.at("max_tokens").get<int>();
    if (j.contains("max_branching"))
      c.max_branching = j.at("max_branching").get<int>();
    if (j.contains("corpus_paths")) {
      const auto& p = j.at("corpus_paths");
      if (p.contains("bfs")) c.bfs_path = p.at("bfs").get<std::string>();
      if (p.contains("dfs")) c.dfs_path = p.at("dfs").get<std::string>();
      if (p.contains("mixed")) c.mixed_path = p.at("mixed").get<std::string>();
    }
    if (j.contains("bounds")) c.bounds = bound_inputs_from_json(j.at("bounds"));
    return c;
  }

  ojson to_json() const {
    ojson j;
    j["corpus_size"] = corpus_size;
    j["n_sample"] = n_sample;
    j["pool"] = pool;
    j["lambda"] = lambda;
    j["repeats"] = repeats;
    j["seed"] = seed;
    j["max_tokens"] = max_tokens;
    j["max_branching"] = max_branching;
    j["corpus_paths"] = {{"bfs", bfs_path}, {"dfs", dfs_path}, {"mixed", mixed_path}};
    ojson b = bound_inputs_to_json(bounds);
    b.erase("target_chi1_samples");
    j["bounds"] = std::move(b);
    return j;
  }
};

struct StageRecord {
  std::string name;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
  double wall_ms = 0.0;
};

struct RunManifest {
  std::string tool_version = kVersion;
  PipelineConfig config;
  std::vector<StageRecord> stages;

  ojson to_json() const {
    ojson j;
    j["schema_version"] = kSchemaVersion;
    j["tool_version"] = tool_version;
    j["config"] = config.to_json();
    ojson stages_j = ojson::array();
    for (const StageRecord& s : stages) {
      ojson outputs = ojson::array();
      for (const auto& [path, digest] : s.outputs)
        outputs.push_back({{"path", path}, {"digest", digest}});
      stages_j.push_back(
          {{"name", s.name}, {"outputs", outputs}, {"wall_ms", s.wall_ms}});
    }
    j["stages"] = std::move(stages_j);
    return j;
  }
};

inline RunManifest run_pipeline(const PipelineConfig& cfg,
                                const std::string& out_dir, bool force = false) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const auto at = [&](const std::string& name) { return out_dir + "/" + name; };
  const std::vector<std::string> artifacts = {
      "bfs.jsonl",       "dfs.jsonl",        "mixed.jsonl",
      "features_bfs.csv", "features_dfs.csv", "features_mixed.csv",
      "w1_bfs_bfs.json", "w1_bfs_mixed.json", "w1_bfs_dfs.json",
      "dyck_dfs.csv",    "bounds.json",       "manifest.json"};
  if (!force) {
    for (const auto& a : artifacts)
      if (fs::exists(at(a)))
        throw Error("output directory already holds " + a +
                    " (pass force to overwrite)");
  }

  RunManifest manifest;
  manifest.config = cfg;

  const auto run_stage = [&](const std::string& name, auto&& body) {
    const auto start = std::chrono::steady_clock::now();
    StageRecord rec;
    rec.name = name;
    try {
      rec.outputs = body();
    } catch (const std::exception& e) {
      throw Error("stage " + name + ": " + e.what());
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    manifest.stages.push_back(std::move(rec));
  };
  const auto emit = [&](const std::string& path, const std::string& content)
      -> std::pair<std::string, std::string> {
    write_file(path, content);
    return {path, digest_hex(content)};
  };

  // generation
  std::string bfs_path = cfg.bfs_path, dfs_path = cfg.dfs_path,
              mixed_path = cfg.mixed_path;
  const auto gen_stage = [&](const std::string& name, Strategy strat,
                             std::string& path) {
    run_stage(name, [&]() -> std::vector<std::pair<std::string, std::string>> {
      if (!path.empty()) return {};  // caller-supplied corpus, used as-is
      GenerationConfig gc;
      gc.strategy = strat;
      gc.corpus_size = cfg.corpus_size;
      gc.max_tokens = cfg.max_tokens;
      gc.max_branching = cfg.max_branching;
      gc.seed = cfg.seed + static_cast<std::uint64_t>(strat);
      path = at(name + ".jsonl");
      std::string body;
      for (int i = 0; i < gc.corpus_size; ++i) {
        body += corpus_line(generate_one(gc, static_cast<std::uint64_t>(i)));
        body += '\n';
      }
      return {emit(path, body)};
    });
  };
  gen_stage("bfs", Strategy::BFS, bfs_path);
  gen_stage("dfs", Strategy::DFS, dfs_path);
  gen_stage("mixed", Strategy::MIXED, mixed_path);

  // projection
  const auto project_stage = [&](const std::string& name, const std::string& in) {
    run_stage("project_" + name,
              [&]() -> std::vector<std::pair<std::string, std::string>> {
                if (!fs::exists(in)) throw IoError("corpus file missing: " + in);
                const auto rows = project_corpus(read_corpus(in));
                return {emit(at("features_" + name + ".csv"), to_csv(rows))};
              });
  };
  project_stage("bfs", bfs_path);
  project_stage("dfs", dfs_path);
  project_stage("mixed", mixed_path);

  // pairwise W1
  double w1_bfs_dfs_mean = 0.0;
  const auto w1_stage = [&](const std::string& name, const std::string& a,
                            const std::string& b, double* mean_out) {
    run_stage("w1_" + name,
              [&]() -> std::vector<std::pair<std::string, std::string>> {
                if (!fs::exists(a)) throw IoError("corpus file missing: " + a);
                if (!fs::exists(b)) throw IoError("corpus file missing: " + b);
                const W1Report r = pipeline_w1(a, b, cfg.n_sample, cfg.pool,
                                               cfg.repeats, cfg.seed, cfg.lambda);
                if (mean_out) *mean_out = r.mean;
                return {emit(at("w1_" + name + ".json"),
                             w1_report_to_json(r).dump(2) + "\n")};
              });
  };
  w1_stage("bfs_bfs", bfs_path, bfs_path, nullptr);
  w1_stage("bfs_mixed", bfs_path, mixed_path, nullptr);
  w1_stage("bfs_dfs", bfs_path, dfs_path, &w1_bfs_dfs_mean);

  // dyck report over the deep-recursion corpus
  run_stage("dyck", [&]() -> std::vector<std::pair<std::string, std::string>> {
    if (!fs::exists(dfs_path)) throw IoError("corpus file missing: " + dfs_path);
    return {emit(at("dyck_dfs.csv"), dyck_report_csv(read_corpus(dfs_path)))};
  });

  // bounds over the DFS target measure, W1 wired from the bfs/dfs estimate
  run_stage("bounds", [&]() -> std::vector<std::pair<std::string, std::string>> {
    BoundInputs in = cfg.bounds;
    in.W1 = w1_bfs_dfs_mean;
    const auto rows = from_csv(read_file(at("features_dfs.csv")));
    in.target_chi1_samples.clear();
    for (const auto& r : rows) in.target_chi1_samples.push_back(r[0]);
    const BoundReport rep = unified_bound(in);
    return {emit(at("bounds.json"), bound_report_to_json(rep, in).dump(2) + "\n")};
  });

  write_file(at("manifest.json"), manifest.to_json().dump(2) + "\n");
  return manifest;
}

// ============================================================================
// Artifact validation
// ============================================================================

namespace detail {

inline bool near_integer(double x) { return std::abs(x - std::round(x)) < 1e-9; }

inline void validate_feature_row(const StructuralVector& v, std::size_t row,
                                 std::vector<std::string>& out) {
  const auto fail = [&](const std::string& msg) {
    out.push_back("row " + std::to_string(row + 1) + ": " + msg);
  };
  if (!(v[0] >= v[1] && v[1] >= 1.0)) fail("chi1 >= chi2 >= 1 violated");
  if (v[2] < 0.0) fail("chi3 negative");
  if (v[3] < 1.0 || !near_integer(v[3])) fail("chi4 must be a positive integer");
  const double partition = v[4] + v[5] + v[6];
  if (v[3] >= 2.0) {
    if (std::abs(partition - 1.0) > 1e-9)
      fail("chi5+chi6+chi7 = " + std::to_string(partition) + ", expected 1");
  } else if (partition != 0.0) {
    fail("chi5+chi6+chi7 must be 0 for single-node trajectories");
  }
  if (std::abs(v[8] * v[3] - v[7]) > 1e-9) fail("chi9 != chi8/chi4");
  if (v[9] != 0.0 && v[9] != 1.0) fail("chi10 must be 0 or 1");
  for (std::size_t c : {std::size_t{7}, std::size_t{10}, std::size_t{11}})
    if (v[c] < 0.0 || !near_integer(v[c]))
      fail("chi" + std::to_string(c + 1) + " must be a non-negative integer");
}

}  // namespace detail

// Returns one diagnostic per violation; empty means the file is clean.
inline std::vector<std::string> validate_file(const std::string& path,
                                              double marginal_tol = 1e-6) {
  std::vector<std::string> out;
  const auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           std::string_view(path).substr(path.size() - suffix.size()) == suffix;
  };

  std::string content;
  try {
    content = read_file(path);
  } catch (const std::exception& e) {
    return {std::string("io: ") + e.what()};
  }

  try {
    if (ends_with(".jsonl")) {
      std::size_t line_no = 0, pos = 0;
      while (pos < content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        const std::string line = content.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        ++line_no;
        try {
          const Trajectory t = trajectory_from_json(ojson::parse(line));
          for (const NodeRecord& n : t.nodes)
            if (n.depth != static_cast<int>(n.identifier.size()))
              out.push_back("line " + std::to_string(line_no) +
                            ": node depth != identifier length");
          const std::string text = serialize(t);
          const Trajectory reparsed = parse_trajectory(text);  // grammar check
          if (!same_text_content(reparsed, t))
            out.push_back("line " + std::to_string(line_no) +
                          ": tokens/nodes do not match their serialization");
        } catch (const std::exception& e) {
          out.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
      }
      return out;
    }

    if (ends_with(".csv")) {
      const std::size_t eol = content.find('\n');
      const std::string header =
          content.substr(0, eol == std::string::npos ? content.size() : eol);
      if (header == feature_csv_header()) {
        const auto rows = from_csv(content);
        for (std::size_t i = 0; i < rows.size(); ++i)
          detail::validate_feature_row(rows[i], i, out);
        return out;
      }
      if (header == "chi1,nesting_depth,valid" || header == "L,accuracy")
        return out;  // schema recognized; nothing further to cross-check
      return {"csv: unrecognized header `" + header + "`"};
    }

    if (ends_with(".json")) {
      const ojson j = ojson::parse(content);
      if (!j.contains("schema_version")) {
        out.push_back("json: missing schema_version");
        return out;
      }
      if (j.contains("coupling")) {
        const auto p = j.at("p").get<std::vector<double>>();
        const auto q = j.at("q").get<std::vector<double>>();
        const auto coupling = j.at("coupling").get<std::vector<double>>();
        const std::size_t rows = j.at("rows").get<std::size_t>();
        const std::size_t cols = j.at("cols").get<std::size_t>();
        if (coupling.size() != rows * cols || p.size() != rows || q.size() != cols)
          return {"plan: shape mismatch"};
        for (std::size_t i = 0; i < rows; ++i) {
          double s = 0.0;
          for (std::size_t c = 0; c < cols; ++c) s += coupling[i * cols + c];
          if (std::abs(s - p[i]) > marginal_tol)
            out.push_back("plan: row " + std::to_string(i) +
                          " marginal error " + std::to_string(std::abs(s - p[i])));
        }
        for (std::size_t c = 0; c < cols; ++c) {
          double s = 0.0;
          for (std::size_t i = 0; i < rows; ++i) s += coupling[i * cols + c];
          if (std::abs(s - q[c]) > marginal_tol)
            out.push_back("plan: column " + std::to_string(c) +
                          " marginal error " + std::to_string(std::abs(s - q[c])));
        }
        return out;
      }
      if (j.contains("pair")) {
        const auto values = j.at("values").get<std::vector<double>>();
        if (values.size() != j.at("repeats").get<std::size_t>())
          out.push_back("w1 report: values length != repeats");
        double mean = 0.0;
        for (double v : values) mean += v;
        if (!values.empty()) mean /= static_cast<double>(values.size());
        if (std::abs(mean - j.at("mean").get<double>()) > 1e-9)
          out.push_back("w1 report: mean does not match values");
        return out;
      }
      if (j.contains("lower_bound")) {
        const double lb = j.at("lower_bound").get<double>();
        const double expect = std::max({j.at("lb_width").get<double>(),
                                        j.at("lb_depth").get<double>(),
                                        j.at("lb_transport").get<double>()});
        if (std::abs(lb - expect) > 1e-12)
          out.push_back("bound report: lower_bound is not the max of the terms");
        return out;
      }
      if (j.contains("a_max")) {
        if (j.at("violations").get<int>() != 0)
          out.push_back("ceiling fit: violations must be 0");
        return out;
      }
      if (j.contains("rows") || j.contains("stages")) return out;
      out.push_back("json: unrecognized artifact shape");
      return out;
    }
  } catch (const std::exception& e) {
    out.push_back(std::string("invalid: ") + e.what());
    return out;
  }
  return {"unrecognized file type (expected .jsonl, .csv, or .json)"};
}

}  // namespace trajlab
