#pragma once

/**
 * Corpus files: JSON-lines, one trajectory per line, UTF-8, fixed field order
 * so reruns are byte-identical:
 *
 *   {"instance":{"target":..,"operands":[..],"seed":..},
 *    "strategy":"BFS|DFS","truncated":bool,
 *    "nodes":[{"id":"..","depth":..,"text":"..","flags":["prune"|"goal"...]}],
 *    "tokens":["..",..]}
 */

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajlab/error.hpp"
#include "trajlab/trajectory.hpp"

namespace trajlab {

using ojson = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

inline ojson trajectory_to_json(const Trajectory& t) {
  ojson j;
  j["instance"] = {{"target", t.instance.target},
                   {"operands", t.instance.operands},
                   {"seed", t.instance.seed}};
  j["strategy"] = to_string(t.strategy);
  j["truncated"] = t.truncated;
  ojson nodes = ojson::array();
  for (const NodeRecord& n : t.nodes) {
    ojson flags = ojson::array();
    if (n.prune) flags.push_back("prune");
    if (n.goal) flags.push_back("goal");
    nodes.push_back({{"id", n.identifier},
                     {"depth", n.depth},
                     {"text", n.text},
                     {"flags", flags}});
  }
  j["nodes"] = std::move(nodes);
  j["tokens"] = t.tokens;
  return j;
}

inline Trajectory trajectory_from_json(const ojson& j) {
  Trajectory t;
  const auto& inst = j.at("instance");
  t.instance.target = inst.at("target").get<long long>();
  t.instance.operands = inst.at("operands").get<std::vector<long long>>();
  t.instance.seed = inst.at("seed").get<std::uint64_t>();
  t.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  t.truncated = j.at("truncated").get<bool>();
  for (const auto& nj : j.at("nodes")) {
    NodeRecord n;
    n.identifier = nj.at("id").get<std::string>();
    n.depth = nj.at("depth").get<int>();
    n.text = nj.at("text").get<std::string>();
    for (const auto& f : nj.at("flags")) {
      const std::string flag = f.get<std::string>();
      if (flag == "prune") n.prune = true;
      else if (flag == "goal") n.goal = true;
      else throw IoError("unknown node flag: " + flag);
    }
    t.nodes.push_back(std::move(n));
  }
  t.tokens = j.at("tokens").get<std::vector<std::string>>();
  return t;
}

inline std::string corpus_line(const Trajectory& t) {
  return trajectory_to_json(t).dump();
}

inline void write_corpus(const std::string& path,
                         const std::vector<Trajectory>& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const Trajectory& t : corpus) out << corpus_line(t) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

inline std::vector<Trajectory> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(trajectory_from_json(ojson::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace trajlab
