#pragma once

/**
 * Reduction of search transitions to Dyck-k balanced-bracket prefixes.
 *
 * Differencing consecutive node identifiers yields a string over the
 * transition alphabet {down_1..down_k, up_1..up_k, eval}: one down per
 * appended path symbol, one up per removed trailing symbol (innermost-first
 * on multi-level backtracks), and eval at terminal (prune/goal) nodes.
 *
 * The homomorphism psi maps down_c to an opening bracket of type c, up_c to
 * the matching closing bracket, and erases eval. The root sits at depth 1 but
 * is never entered by a down-move, so for a valid trajectory the maximum
 * bracket nesting depth equals chi1 - 1.
 */

#include <cstddef>
#include <string>
#include <vector>

#include "trajlab/error.hpp"
#include "trajlab/trajectory.hpp"

namespace trajlab {

enum class TransitionKind { Down, Up, Eval };

struct Transition {
  TransitionKind kind = TransitionKind::Eval;
  int child = 0;  // 1..k for Down/Up, unused for Eval

  bool operator==(const Transition&) const = default;
};

using SearchTransitionString = std::vector<Transition>;

struct Bracket {
  int type = 0;  // 1..k
  bool open = false;

  bool operator==(const Bracket&) const = default;
};

struct DyckString {
  std::vector<Bracket> brackets;
  int max_nesting = 0;  // maximum stack height attained
};

inline Transition down(int c) { return {TransitionKind::Down, c}; }
inline Transition up(int c) { return {TransitionKind::Up, c}; }
inline Transition eval() { return {TransitionKind::Eval, 0}; }

inline SearchTransitionString to_transitions(const Trajectory& t) {
  SearchTransitionString out;
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const std::string& id = t.nodes[i].identifier;
    if (!detail::valid_identifier(id))
      throw GrammarError("invalid identifier \"" + id + "\"");
    if (i == 0) {
      if (id != "1") throw GrammarError("first node must be the root \"1\"");
    } else {
      const std::string& prev = t.nodes[i - 1].identifier;
      std::size_t common = 0;
      while (common < prev.size() && common < id.size() &&
             prev[common] == id[common])
        ++common;
      if (common == 0)
        throw GrammarError("identifier pair (\"" + prev + "\", \"" + id +
                           "\") shares no prefix");
      for (std::size_t p = prev.size(); p-- > common;)
        out.push_back(up(prev[p] - '0'));
      for (std::size_t p = common; p < id.size(); ++p)
        out.push_back(down(id[p] - '0'));
    }
    if (t.nodes[i].prune || t.nodes[i].goal) out.push_back(eval());
  }
  return out;
}

// Monoid homomorphism: psi(x ⊕ y) = psi(x) ⊕ psi(y); eval symbols vanish.
inline DyckString psi(const SearchTransitionString& s) {
  DyckString d;
  int height = 0;
  for (const Transition& tr : s) {
    switch (tr.kind) {
      case TransitionKind::Down:
        d.brackets.push_back({tr.child, true});
        ++height;
        if (height > d.max_nesting) d.max_nesting = height;
        break;
      case TransitionKind::Up:
        d.brackets.push_back({tr.child, false});
        --height;
        break;
      case TransitionKind::Eval:
        break;
    }
  }
  return d;
}

struct BalanceCheck {
  enum class Reason { none, underflow, type_mismatch };
  bool valid = true;
  std::size_t position = 0;  // first violation when invalid
  Reason reason = Reason::none;
};

inline BalanceCheck check_balanced_prefix(const DyckString& d) {
  std::vector<int> stack;
  for (std::size_t p = 0; p < d.brackets.size(); ++p) {
    const Bracket& b = d.brackets[p];
    if (b.open) {
      stack.push_back(b.type);
    } else {
      if (stack.empty()) return {false, p, BalanceCheck::Reason::underflow};
      if (stack.back() != b.type)
        return {false, p, BalanceCheck::Reason::type_mismatch};
      stack.pop_back();
    }
  }
  return {};
}

inline int nesting_depth(const DyckString& d) {
  const BalanceCheck c = check_balanced_prefix(d);
  if (!c.valid)
    throw DomainError(
        "nesting_depth: invalid balanced prefix at position " +
        std::to_string(c.position) +
        (c.reason == BalanceCheck::Reason::underflow ? " (underflow)"
                                                     : " (type mismatch)"));
  int height = 0, max_h = 0;
  for (const Bracket& b : d.brackets) {
    height += b.open ? 1 : -1;
    if (height > max_h) max_h = height;
  }
  return max_h;
}

}  // namespace trajlab
