#pragma once

/**
 * Formal search trajectories for the Countdown combinatorial task.
 *
 * A trajectory is a token sequence decomposing as prompt ⊕ search trace:
 *
 *   Current State: 24:[3,5,8,2], Operations:[]
 *   Node 1: Current State: 24:[3,5,8,2], Operations:[]
 *   Node 11: Current State: 24:[8,8,2], Operations:[3+5=8]
 *   ...
 *   Node 112: Current State: 24:[24], Operations:[3+5=8,8*2=16,16+8=24]
 *   Goal Reached
 *
 * Node identifiers are digit strings encoding the tree path: the root is "1"
 * and the c-th child of a node appends the digit c (branching factor <= 9).
 * A node's depth equals its identifier length. Terminal markers `No Solution`
 * (dead end) and `Goal Reached` (target derived) follow the node line they
 * belong to.
 *
 * Tokenization rule: maximal runs of [A-Za-z0-9] are single tokens; every
 * other non-whitespace character is its own token; whitespace (including
 * newlines) only separates. Token count, not character count, enforces the
 * budget `max_tokens`.
 *
 * Generation is deterministic: trajectory i of a run draws every random
 * choice from a stream derived from (seed, i), so parallel and serial runs
 * emit identical corpora.
 */

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "trajlab/error.hpp"
#include "trajlab/random.hpp"

namespace trajlab {

enum class Strategy { BFS, DFS, MIXED };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::BFS: return "BFS";
    case Strategy::DFS: return "DFS";
    case Strategy::MIXED: return "MIXED";
  }
  return "?";
}

inline Strategy strategy_from_string(std::string_view s) {
  if (s == "BFS" || s == "bfs") return Strategy::BFS;
  if (s == "DFS" || s == "dfs") return Strategy::DFS;
  if (s == "MIXED" || s == "mixed") return Strategy::MIXED;
  throw DomainError("unknown strategy: " + std::string(s));
}

struct ProblemInstance {
  long long target = 0;
  std::vector<long long> operands;  // 3..5 positive integers
  std::uint64_t seed = 0;           // per-trajectory stream seed

  bool operator==(const ProblemInstance&) const = default;
};

struct NodeRecord {
  std::string identifier;  // digits '1'..'9'; tree path from the root "1"
  int depth = 0;           // == identifier.size()
  std::string text;        // rendered state line, without the "Node <id>: " prefix
  bool prune = false;      // followed by `No Solution`
  bool goal = false;       // followed by `Goal Reached`

  bool operator==(const NodeRecord&) const = default;
};

struct Trajectory {
  ProblemInstance instance;
  Strategy strategy = Strategy::BFS;  // actual strategy (BFS or DFS per item)
  bool truncated = false;             // token budget cut the search short
  std::vector<NodeRecord> nodes;      // generation order
  std::vector<std::string> tokens;    // tokenize(serialize(*this))

  bool operator==(const Trajectory&) const = default;
};

// Text-level identity: the serialized grammar carries the instance content and
// the node structure; seed/strategy/truncated ride only in the corpus format.
inline bool same_text_content(const Trajectory& a, const Trajectory& b) {
  return a.instance.target == b.instance.target &&
         a.instance.operands == b.instance.operands && a.nodes == b.nodes &&
         a.tokens == b.tokens;
}

struct GenerationConfig {
  Strategy strategy = Strategy::BFS;
  int max_branching = 4;   // k, children kept per node, 1..9
  int max_tokens = 1024;   // T_max, >= 64
  int corpus_size = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_branching < 1 || max_branching > 9)
      throw DomainError("max_branching must be in [1, 9] (identifiers are digit strings)");
    if (max_tokens < 64) throw DomainError("max_tokens must be >= 64");
    if (corpus_size < 1) throw DomainError("corpus_size must be >= 1");
  }
};

// ============================================================================
// Tokenization and rendering
// ============================================================================

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (is_word_char(c)) {
      std::size_t j = i + 1;
      while (j < text.size() && is_word_char(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      out.emplace_back(1, c);
      ++i;
    }
  }
  return out;
}

inline std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0, i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (is_word_char(c)) {
      while (i < text.size() && is_word_char(text[i])) ++i;
      ++n;
    } else {
      ++n;
      ++i;
    }
  }
  return n;
}

inline std::string render_number_list(const std::vector<long long>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  out += ']';
  return out;
}

inline std::string render_state_line(long long target,
                                     const std::vector<long long>& remaining,
                                     const std::vector<std::string>& ops) {
  std::string out = "Current State: " + std::to_string(target) + ":" +
                    render_number_list(remaining) + ", Operations:[";
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (i) out += ',';
    out += ops[i];
  }
  out += ']';
  return out;
}

inline std::string prompt_line(const ProblemInstance& inst) {
  return render_state_line(inst.target, inst.operands, {});
}

inline std::string serialize(const Trajectory& t) {
  std::string out = prompt_line(t.instance);
  out += '\n';
  for (const NodeRecord& n : t.nodes) {
    out += "Node ";
    out += n.identifier;
    out += ": ";
    out += n.text;
    out += '\n';
    if (n.prune) out += "No Solution\n";
    if (n.goal) out += "Goal Reached\n";
  }
  return out;
}

// ============================================================================
// Parsing
// ============================================================================

namespace detail {

inline std::optional<long long> parse_int(std::string_view s) {
  if (s.empty() || s.size() > 15) return std::nullopt;
  long long v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

// Splits "24:[3,5,8,2], Operations:[3+5=8]" style content after the
// "Current State: " prefix. Returns nullopt when the shape does not match.
struct StateLine {
  long long target = 0;
  std::vector<long long> remaining;
  std::vector<std::string> ops;
};

inline std::optional<StateLine> parse_state_line(std::string_view text) {
  constexpr std::string_view kPrefix = "Current State: ";
  if (text.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  std::string_view rest = text.substr(kPrefix.size());

  const std::size_t colon = rest.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  StateLine out;
  if (auto t = parse_int(rest.substr(0, colon))) out.target = *t;
  else return std::nullopt;

  rest = rest.substr(colon + 1);
  if (rest.empty() || rest.front() != '[') return std::nullopt;
  const std::size_t close = rest.find(']');
  if (close == std::string_view::npos) return std::nullopt;
  std::string_view nums = rest.substr(1, close - 1);
  while (!nums.empty()) {
    const std::size_t comma = nums.find(',');
    const std::string_view item =
        comma == std::string_view::npos ? nums : nums.substr(0, comma);
    if (auto v = parse_int(item)) out.remaining.push_back(*v);
    else return std::nullopt;
    if (comma == std::string_view::npos) break;
    nums = nums.substr(comma + 1);
  }
  if (out.remaining.empty()) return std::nullopt;

  rest = rest.substr(close + 1);
  constexpr std::string_view kOps = ", Operations:[";
  if (rest.substr(0, kOps.size()) != kOps || rest.empty() || rest.back() != ']')
    return std::nullopt;
  std::string_view ops = rest.substr(kOps.size(), rest.size() - kOps.size() - 1);
  while (!ops.empty()) {
    const std::size_t comma = ops.find(',');
    const std::string_view item =
        comma == std::string_view::npos ? ops : ops.substr(0, comma);
    if (item.empty()) return std::nullopt;
    out.ops.emplace_back(item);
    if (comma == std::string_view::npos) break;
    ops = ops.substr(comma + 1);
  }
  return out;
}

struct Operation {
  long long a = 0, b = 0, result = 0;
  char op = '+';
};

inline std::optional<Operation> parse_operation(std::string_view s) {
  const std::size_t eq = s.find('=');
  if (eq == std::string_view::npos) return std::nullopt;
  const std::size_t op_pos = s.find_first_of("+-*/");
  if (op_pos == std::string_view::npos || op_pos == 0 || op_pos >= eq)
    return std::nullopt;
  Operation out;
  out.op = s[op_pos];
  const auto a = parse_int(s.substr(0, op_pos));
  const auto b = parse_int(s.substr(op_pos + 1, eq - op_pos - 1));
  const auto r = parse_int(s.substr(eq + 1));
  if (!a || !b || !r) return std::nullopt;
  out.a = *a;
  out.b = *b;
  out.result = *r;
  return out;
}

inline bool valid_identifier(std::string_view id) {
  if (id.empty()) return false;
  for (char c : id)
    if (c < '1' || c > '9') return false;
  return true;
}

}  // namespace detail

// Parses serialized trajectory text. Recovers the instance content and the
// node structure; strategy, seed, and the truncation flag are corpus-format
// metadata and come back defaulted.
inline Trajectory parse_trajectory(std::string_view text) {
  if (text.empty()) throw ParseError("empty input", 0);

  Trajectory t;
  std::size_t pos = 0;
  bool saw_prompt = false;
  std::set<std::string, std::less<>> seen_ids;

  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    const std::size_t line_start = pos;
    pos = eol + 1;
    if (line.empty()) {
      if (line_start + 1 >= text.size()) break;  // trailing newline
      throw ParseError("blank line", line_start);
    }

    if (!saw_prompt) {
      auto st = detail::parse_state_line(line);
      if (!st || !st->ops.empty())
        throw ParseError("expected prompt line `Current State: <target>:[nums], Operations:[]`",
                         line_start);
      if (st->target < 1) throw ParseError("target must be >= 1", line_start);
      t.instance.target = st->target;
      t.instance.operands = st->remaining;
      saw_prompt = true;
      continue;
    }

    if (line == "No Solution" || line == "Goal Reached") {
      if (t.nodes.empty())
        throw ParseError("terminal marker before any node", line_start);
      bool& flag = line[0] == 'N' ? t.nodes.back().prune : t.nodes.back().goal;
      if (flag) throw ParseError("duplicate terminal marker", line_start);
      flag = true;
      continue;
    }

    constexpr std::string_view kNode = "Node ";
    if (line.substr(0, kNode.size()) != kNode)
      throw ParseError("expected node line or terminal marker", line_start);
    const std::size_t sep = line.find(": ", kNode.size());
    if (sep == std::string_view::npos)
      throw ParseError("malformed node line: missing `: `", line_start);
    const std::string_view id = line.substr(kNode.size(), sep - kNode.size());
    if (!detail::valid_identifier(id))
      throw ParseError("malformed node identifier", line_start);

    if (t.nodes.empty()) {
      if (id != "1") throw GrammarError("first node must be the root \"1\", got \"" +
                                        std::string(id) + "\"");
    } else if (id.size() == 1) {
      if (id != "1")
        throw GrammarError("depth-1 node must be the root \"1\", got \"" +
                           std::string(id) + "\"");
    } else {
      const std::string parent(id.substr(0, id.size() - 1));
      if (!seen_ids.count(parent))
        throw GrammarError("node \"" + std::string(id) +
                           "\" skips a level: parent \"" + parent +
                           "\" never appeared");
    }
    seen_ids.insert(std::string(id));

    NodeRecord n;
    n.identifier = std::string(id);
    n.depth = static_cast<int>(id.size());
    n.text = std::string(line.substr(sep + 2));
    t.nodes.push_back(std::move(n));
  }

  if (!saw_prompt) throw ParseError("missing prompt line", 0);
  t.tokens = tokenize(text);
  return t;
}

// ============================================================================
// Countdown expansion
// ============================================================================

namespace detail {

struct Candidate {
  char op;
  long long a, b, result;
  std::size_t i, j;  // operand positions consumed
};

inline std::optional<long long> apply_op(char op, long long a, long long b) {
  switch (op) {
    case '+': return a + b;
    case '*': return a * b;
    case '-': return a >= b ? std::optional<long long>(a - b) : std::nullopt;
    case '/':
      return (b != 0 && a % b == 0) ? std::optional<long long>(a / b)
                                    : std::nullopt;
  }
  return std::nullopt;
}

// All distinct (op, a, b) moves over the remaining numbers. + and * are taken
// once per unordered pair; - and / once per ordered pair where valid.
inline std::vector<Candidate> enumerate_moves(const std::vector<long long>& rem) {
  std::vector<Candidate> out;
  std::set<std::tuple<char, long long, long long>> seen;
  const std::size_t n = rem.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const long long a = rem[i], b = rem[j];
      for (char op : {'+', '*', '-', '/'}) {
        if ((op == '+' || op == '*') && i > j) continue;
        const auto r = apply_op(op, a, b);
        if (!r) continue;
        if (!seen.insert({op, a, b}).second) continue;
        out.push_back({op, a, b, *r, i, j});
      }
    }
  }
  return out;
}

inline std::vector<long long> child_remaining(const std::vector<long long>& rem,
                                              const Candidate& c) {
  std::vector<long long> out;
  out.reserve(rem.size() - 1);
  for (std::size_t p = 0; p < rem.size(); ++p)
    if (p != c.i && p != c.j) out.push_back(rem[p]);
  out.push_back(c.result);
  return out;
}

inline bool solvable_from(long long target, std::vector<long long>& rem) {
  if (rem.size() < 2) return false;
  for (const Candidate& c : enumerate_moves(rem)) {
    if (c.result == target) return true;
    auto next = child_remaining(rem, c);
    if (solvable_from(target, next)) return true;
  }
  return false;
}

}  // namespace detail

inline bool solvable(long long target, const std::vector<long long>& operands) {
  if (std::find(operands.begin(), operands.end(), target) != operands.end())
    return true;
  std::vector<long long> rem = operands;
  return detail::solvable_from(target, rem);
}

namespace detail {

// Allocation-free solvability probe: can `target` be derived in at most
// `budget` combining steps? Duplicate moves are harmless here.
inline bool solvable_within(long long target, long long* rem, int n, int budget) {
  if (budget <= 0 || n < 2) return false;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const long long a = rem[i], b = rem[j];
      for (char op : {'+', '*', '-', '/'}) {
        if ((op == '+' || op == '*') && i > j) continue;
        const auto r = apply_op(op, a, b);
        if (!r) continue;
        if (*r == target) return true;
        long long next[8];
        int m = 0;
        for (int p = 0; p < n; ++p)
          if (p != i && p != j) next[m++] = rem[p];
        next[m++] = *r;
        if (solvable_within(target, next, m, budget - 1)) return true;
      }
    }
  }
  return false;
}

}  // namespace detail

// Smallest number of combining steps that derives the target (0 when the
// target is already an operand), or ops_count+1 when unreachable.
inline int min_solution_ops(long long target, const std::vector<long long>& operands) {
  if (std::find(operands.begin(), operands.end(), target) != operands.end())
    return 0;
  long long rem[8];
  int n = 0;
  for (long long v : operands) rem[n++] = v;
  const int max_ops = static_cast<int>(operands.size()) - 1;
  for (int k = 1; k <= max_ops; ++k)
    if (detail::solvable_within(target, rem, n, k)) return k;
  return max_ops + 1;
}

// Toolkit default instance distribution: target uniform in [10, 99], four
// operands uniform in [1, 25], resampled until the shortest solution uses all
// three combining steps. Shortcut-free instances keep the searches honest:
// breadth-first sweeps cannot finish inside the token budget while depth-first
// dives reach solving leaves, so the outcome indicator stays informative.
inline ProblemInstance sample_instance(Rng& rng) {
  ProblemInstance inst;
  for (;;) {
    inst.target = rng.uniform_int(10, 99);
    inst.operands.clear();
    for (int i = 0; i < 4; ++i) inst.operands.push_back(rng.uniform_int(1, 25));
    if (min_solution_ops(inst.target, inst.operands) == 3) return inst;
  }
}

// ============================================================================
// Generation
// ============================================================================

namespace detail {

struct SearchItem {
  std::string id;
  std::vector<long long> remaining;
  std::vector<std::string> ops;
  long long last_result = -1;
  bool has_op = false;
};

inline std::string node_line(const SearchItem& it, long long target) {
  return "Node " + it.id + ": " +
         render_state_line(target, it.remaining, it.ops);
}

// Shared search driver. `lifo` selects stack (DFS) vs queue (BFS) discipline.
// The search runs until the frontier or the token budget is exhausted and
// marks every terminal outcome on the way: solving leaves get `Goal Reached`,
// dead ends get `No Solution`. A trajectory may therefore carry several goal
// markers; the solution indicator collapses them to one bit.
inline Trajectory run_search(const ProblemInstance& inst, Strategy strat,
                             bool lifo, const GenerationConfig& cfg, Rng& rng) {
  Trajectory t;
  t.instance = inst;
  t.strategy = strat;

  const std::string prompt = prompt_line(inst);
  t.tokens = tokenize(prompt);
  const std::size_t t_max = static_cast<std::size_t>(cfg.max_tokens);

  std::deque<SearchItem> frontier;
  frontier.push_back({"1", inst.operands, {}, -1, false});

  while (!frontier.empty()) {
    SearchItem it = lifo ? std::move(frontier.back())
                         : std::move(frontier.front());
    if (lifo) frontier.pop_back();
    else frontier.pop_front();

    const bool goal = it.has_op && it.last_result == inst.target;
    std::vector<Candidate> moves;
    if (!goal) {
      moves = enumerate_moves(it.remaining);
      rng.shuffle(moves);
      if (moves.size() > static_cast<std::size_t>(cfg.max_branching))
        moves.resize(static_cast<std::size_t>(cfg.max_branching));
    }
    const bool prune = !goal && moves.empty();

    std::string block = node_line(it, inst.target);
    if (prune) block += "\nNo Solution";
    if (goal) block += "\nGoal Reached";
    const auto block_tokens = tokenize(block);

    if (t.tokens.size() + block_tokens.size() > t_max) {
      if (t.nodes.empty())
        throw GenerationCapacityError(
            "max_tokens too small to hold the prompt and the root node");
      t.truncated = true;
      break;
    }

    NodeRecord rec;
    rec.identifier = it.id;
    rec.depth = static_cast<int>(it.id.size());
    rec.text = render_state_line(inst.target, it.remaining, it.ops);
    rec.prune = prune;
    rec.goal = goal;
    t.nodes.push_back(std::move(rec));
    t.tokens.insert(t.tokens.end(), block_tokens.begin(), block_tokens.end());

    // child c gets digit c+1 in shuffled order; DFS pushes reversed so that
    // child "1" pops first
    std::vector<SearchItem> children;
    children.reserve(moves.size());
    for (std::size_t c = 0; c < moves.size(); ++c) {
      SearchItem child;
      child.id = it.id + static_cast<char>('1' + c);
      child.remaining = child_remaining(it.remaining, moves[c]);
      child.ops = it.ops;
      child.ops.push_back(std::to_string(moves[c].a) + moves[c].op +
                          std::to_string(moves[c].b) + "=" +
                          std::to_string(moves[c].result));
      child.last_result = moves[c].result;
      child.has_op = true;
      children.push_back(std::move(child));
    }
    if (lifo) std::reverse(children.begin(), children.end());
    for (auto& child : children) frontier.push_back(std::move(child));
  }
  return t;
}

}  // namespace detail

// Generates trajectory `index` of the run. Deterministic in (config, index).
inline Trajectory generate_one(const GenerationConfig& cfg, std::uint64_t index) {
  cfg.validate();
  const std::uint64_t stream_seed = Rng::derive_stream_seed(cfg.seed, index);
  Rng rng(stream_seed);

  Strategy strat = cfg.strategy;
  if (strat == Strategy::MIXED)
    strat = rng.coin() ? Strategy::DFS : Strategy::BFS;

  ProblemInstance inst = sample_instance(rng);
  inst.seed = stream_seed;
  return detail::run_search(inst, strat, strat == Strategy::DFS, cfg, rng);
}

inline std::vector<Trajectory> generate_corpus(const GenerationConfig& cfg) {
  cfg.validate();
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(cfg.corpus_size));
  for (int i = 0; i < cfg.corpus_size; ++i)
    out.push_back(generate_one(cfg, static_cast<std::uint64_t>(i)));
  return out;
}

// ============================================================================
// Scoring
// ============================================================================

// Zero-one scoring of a candidate token sequence against the reference
// instance: 1 iff the candidate parses, every state node's arithmetic chain
// replays correctly from the instance operands, and some `Goal Reached` node
// derives the target exactly. Unverifiable candidates score 0 by contract.
inline int score_output(const Trajectory& reference, std::string_view candidate) {
  Trajectory t;
  try {
    t = parse_trajectory(candidate);
  } catch (const Error&) {
    return 0;
  }

  if (t.instance.target != reference.instance.target) return 0;
  auto ref_ops = reference.instance.operands;
  auto cand_ops = t.instance.operands;
  std::sort(ref_ops.begin(), ref_ops.end());
  std::sort(cand_ops.begin(), cand_ops.end());
  if (ref_ops != cand_ops) return 0;

  const long long target = reference.instance.target;
  bool goal_ok = false;

  for (const NodeRecord& n : t.nodes) {
    const auto st = detail::parse_state_line(n.text);
    if (!st) {
      if (n.goal) return 0;  // a goal must sit on a verifiable state node
      continue;              // structurally inert node, no arithmetic steps
    }
    if (st->target != target) return 0;

    // replay the operation chain from scratch
    std::multiset<long long> cur(reference.instance.operands.begin(),
                                 reference.instance.operands.end());
    std::optional<long long> last;
    for (const std::string& op_str : st->ops) {
      const auto op = detail::parse_operation(op_str);
      if (!op) return 0;
      auto ia = cur.find(op->a);
      if (ia == cur.end()) return 0;
      cur.erase(ia);
      auto ib = cur.find(op->b);
      if (ib == cur.end()) return 0;
      cur.erase(ib);
      const auto r = detail::apply_op(op->op, op->a, op->b);
      if (!r || *r != op->result) return 0;
      cur.insert(op->result);
      last = op->result;
    }
    std::multiset<long long> rendered(st->remaining.begin(), st->remaining.end());
    if (rendered != cur) return 0;

    if (n.goal) {
      if (!last || *last != target) return 0;
      goal_ok = true;
    }
  }
  return goal_ok ? 1 : 0;
}

}  // namespace trajlab
