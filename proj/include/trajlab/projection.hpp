#pragma once

/**
 * Structural projection of trajectories into R^12.
 *
 * Coordinates, all computed over the N node records and the raw serialized
 * text of a trajectory:
 *
 *   chi1  max depth                 chi7   lateral rate
 *   chi2  mean depth                chi8   `No Solution` count
 *   chi3  depth std (population)    chi9   chi8 / N
 *   chi4  search volume N           chi10  `Goal Reached` indicator
 *   chi5  deepening rate            chi11  `*` count + `/` count
 *   chi6  backtracking rate         chi12  `+` count + `-` count
 *
 * Transition rates use the shared denominator M = max(1, N-1), so
 * chi5 + chi6 + chi7 = 1 whenever N >= 2 and all three are 0 when N = 1.
 * Substring counts are exact non-overlapping left-to-right matches on the
 * serialized text; in this grammar the operator characters occur only inside
 * operation strings.
 */

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "trajlab/error.hpp"
#include "trajlab/trajectory.hpp"

namespace trajlab {

struct StructuralVector {
  std::array<double, 12> chi{};

  double& operator[](std::size_t i) { return chi[i]; }
  double operator[](std::size_t i) const { return chi[i]; }
  bool operator==(const StructuralVector&) const = default;
};

inline std::size_t count_occurrences(std::string_view text, std::string_view pat) {
  std::size_t n = 0, pos = 0;
  while ((pos = text.find(pat, pos)) != std::string_view::npos) {
    ++n;
    pos += pat.size();  // non-overlapping
  }
  return n;
}

inline StructuralVector project(const Trajectory& t) {
  const std::size_t n = t.nodes.size();
  if (n == 0) throw DomainError("project: trajectory has zero nodes (N >= 1 required)");

  StructuralVector v;
  double max_d = 0.0, sum_d = 0.0;
  for (const NodeRecord& node : t.nodes) {
    const double d = static_cast<double>(node.depth);
    max_d = std::max(max_d, d);
    sum_d += d;
  }
  const double mean_d = sum_d / static_cast<double>(n);
  double var = 0.0;
  for (const NodeRecord& node : t.nodes) {
    const double diff = static_cast<double>(node.depth) - mean_d;
    var += diff * diff;
  }
  var /= static_cast<double>(n);

  const double m = static_cast<double>(n > 1 ? n - 1 : 1);
  double deepen = 0.0, backtrack = 0.0, lateral = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const int a = t.nodes[i].depth, b = t.nodes[i + 1].depth;
    if (b > a) deepen += 1.0;
    else if (b < a) backtrack += 1.0;
    else lateral += 1.0;
  }

  const std::string text = serialize(t);
  const double prunes = static_cast<double>(count_occurrences(text, "No Solution"));

  v[0] = max_d;
  v[1] = mean_d;
  v[2] = std::sqrt(var);
  v[3] = static_cast<double>(n);
  v[4] = deepen / m;
  v[5] = backtrack / m;
  v[6] = lateral / m;
  v[7] = prunes;
  v[8] = prunes / static_cast<double>(n);
  v[9] = count_occurrences(text, "Goal Reached") >= 1 ? 1.0 : 0.0;
  v[10] = static_cast<double>(count_occurrences(text, "*") +
                              count_occurrences(text, "/"));
  v[11] = static_cast<double>(count_occurrences(text, "+") +
                              count_occurrences(text, "-"));
  return v;
}

inline double structural_distance(const StructuralVector& u,
                                  const StructuralVector& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline std::vector<StructuralVector> project_corpus(
    const std::vector<Trajectory>& ts) {
  std::vector<StructuralVector> out;
  out.reserve(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    try {
      out.push_back(project(ts[i]));
    } catch (const DomainError& e) {
      throw DomainError("row " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

// ============================================================================
// Feature matrix CSV: header chi1..chi12, 17 significant digits per cell so
// doubles round-trip exactly.
// ============================================================================

inline std::string feature_csv_header() {
  std::string h;
  for (int i = 1; i <= 12; ++i) {
    if (i > 1) h += ',';
    h += "chi" + std::to_string(i);
  }
  return h;
}

inline std::string render_double_17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string to_csv(const std::vector<StructuralVector>& rows) {
  std::string out = feature_csv_header();
  out += '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < 12; ++i) {
      if (i) out += ',';
      out += render_double_17(r[i]);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<StructuralVector> from_csv(std::string_view csv) {
  std::vector<StructuralVector> rows;
  std::size_t pos = 0;
  bool first = true;
  while (pos < csv.size()) {
    std::size_t eol = csv.find('\n', pos);
    if (eol == std::string_view::npos) eol = csv.size();
    const std::string_view line = csv.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == feature_csv_header()) continue;
    }
    StructuralVector v;
    std::size_t cell = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (cell >= 12) throw IoError("feature CSV row has more than 12 cells");
        const std::string s(line.substr(start, i - start));
        try {
          v[cell] = std::stod(s);
        } catch (const std::exception&) {
          throw IoError("feature CSV: bad number `" + s + "`");
        }
        ++cell;
        start = i + 1;
      }
    }
    if (cell != 12) throw IoError("feature CSV row has fewer than 12 cells");
    rows.push_back(v);
  }
  return rows;
}

}  // namespace trajlab
