#pragma once

/**
 * Numerical laboratory for pre-softmax attention scores under absolute and
 * rotary positional encodings.
 *
 * APE:   A_ij = (x_i + p_i)^T Wq^T Wk (x_j + p_j)
 * RoPE:  A_ij = (R^i Wq x_i) . (R^j Wk x_j)
 *              = x_i^T Wq^T R^{j-i} Wk x_j
 * where R^t applies 2x2 rotations of angle t * theta_s on dimension pairs,
 * theta_s = rope_base^(-2s/d).
 *
 * delta_a measures |A_{a+k,b+k} - A_{a,b}|: identically zero for RoPE, and
 * almost surely positive for APE under Gaussian parameters unless Wq^T Wk is
 * forced to zero. Scores are pre-softmax; no attention-output propagation is
 * modeled here.
 */

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "trajlab/error.hpp"
#include "trajlab/random.hpp"
#include "trajlab/trajectory.hpp"

namespace trajlab {

enum class Encoding { APE_learned, APE_sinusoidal, RoPE };

inline const char* to_string(Encoding e) {
  switch (e) {
    case Encoding::APE_learned: return "ape";
    case Encoding::APE_sinusoidal: return "ape-sin";
    case Encoding::RoPE: return "rope";
  }
  return "?";
}

inline Encoding encoding_from_string(std::string_view s) {
  if (s == "ape") return Encoding::APE_learned;
  if (s == "ape-sin") return Encoding::APE_sinusoidal;
  if (s == "rope") return Encoding::RoPE;
  throw DomainError("unknown encoding: " + std::string(s));
}

struct KernelConfig {
  int head_dim = 64;        // d, even (RoPE pairs dimensions)
  int max_position = 2048;  // exclusive upper bound on queried indices
  Encoding encoding = Encoding::RoPE;
  double rope_base = 10000.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (head_dim < 2 || head_dim % 2 != 0)
      throw DomainError("head_dim must be a positive even integer");
    if (max_position < 1) throw DomainError("max_position must be >= 1");
    if (rope_base <= 0.0) throw DomainError("rope_base must be positive");
  }
};

struct KernelState {
  std::vector<double> wq, wk;      // d x d, row-major
  std::vector<double> positions;   // max_position x d APE embeddings; empty for RoPE
  int dim = 0;

  // Gaussian entries, mean 0, std 1/sqrt(d), seeded.
  static KernelState init(const KernelConfig& cfg) {
    cfg.validate();
    KernelState st;
    st.dim = cfg.head_dim;
    const int d = cfg.head_dim;
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(d));
    Rng rng(Rng::derive_stream_seed(cfg.seed, 0x6B65726E));

    st.wq.resize(static_cast<std::size_t>(d) * d);
    st.wk.resize(static_cast<std::size_t>(d) * d);
    for (auto& w : st.wq) w = rng.normal(0.0, std_dev);
    for (auto& w : st.wk) w = rng.normal(0.0, std_dev);

    if (cfg.encoding == Encoding::APE_learned) {
      st.positions.resize(static_cast<std::size_t>(cfg.max_position) * d);
      for (auto& p : st.positions) p = rng.normal(0.0, std_dev);
    } else if (cfg.encoding == Encoding::APE_sinusoidal) {
      st.positions.resize(static_cast<std::size_t>(cfg.max_position) * d);
      for (int t = 0; t < cfg.max_position; ++t) {
        for (int s = 0; s < d / 2; ++s) {
          const double theta =
              std::pow(cfg.rope_base, -2.0 * s / static_cast<double>(d));
          st.positions[static_cast<std::size_t>(t) * d + 2 * s] =
              std::sin(t * theta);
          st.positions[static_cast<std::size_t>(t) * d + 2 * s + 1] =
              std::cos(t * theta);
        }
      }
    }

    // Lemma hypothesis: the product Wq^T Wk must not vanish. A Gaussian draw
    // never lands there; assert anyway.
    double prod_norm = 0.0;
    for (int i = 0; i < d && prod_norm == 0.0; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int r = 0; r < d; ++r)
          s += st.wq[static_cast<std::size_t>(r) * d + i] *
               st.wk[static_cast<std::size_t>(r) * d + j];
        prod_norm += s * s;
      }
    if (prod_norm == 0.0)
      throw DomainError("KernelState::init produced Wq^T Wk == 0");
    return st;
  }
};

namespace detail {

inline std::vector<double> matvec(const std::vector<double>& m, int d,
                                  const std::vector<double>& x) {
  std::vector<double> y(static_cast<std::size_t>(d), 0.0);
  for (int r = 0; r < d; ++r) {
    double s = 0.0;
    const double* row = m.data() + static_cast<std::size_t>(r) * d;
    for (int c = 0; c < d; ++c) s += row[c] * x[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(r)] = s;
  }
  return y;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> add(const std::vector<double>& a,
                               const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

}  // namespace detail

// Applies the block-diagonal rotation R^t in place. t may be negative.
inline void rotate_rope(std::vector<double>& v, double t, const KernelConfig& cfg) {
  const int d = cfg.head_dim;
  for (int s = 0; s < d / 2; ++s) {
    const double theta =
        std::pow(cfg.rope_base, -2.0 * s / static_cast<double>(d));
    const double c = std::cos(t * theta), sn = std::sin(t * theta);
    const double a = v[static_cast<std::size_t>(2 * s)];
    const double b = v[static_cast<std::size_t>(2 * s + 1)];
    v[static_cast<std::size_t>(2 * s)] = c * a - sn * b;
    v[static_cast<std::size_t>(2 * s + 1)] = sn * a + c * b;
  }
}

inline std::vector<double> position_embedding(const KernelState& st,
                                              const KernelConfig& cfg, int t) {
  if (t < 0 || t >= cfg.max_position)
    throw DomainError("position index " + std::to_string(t) + " out of range");
  const int d = cfg.head_dim;
  return {st.positions.begin() + static_cast<std::ptrdiff_t>(t) * d,
          st.positions.begin() + static_cast<std::ptrdiff_t>(t + 1) * d};
}

inline double attention_score(const KernelState& st, const KernelConfig& cfg,
                              const std::vector<double>& xa,
                              const std::vector<double>& xb, int i, int j) {
  if (i < 0 || i >= cfg.max_position || j < 0 || j >= cfg.max_position)
    throw DomainError("attention_score: index out of range");
  const int d = cfg.head_dim;
  if (cfg.encoding == Encoding::RoPE) {
    auto q = detail::matvec(st.wq, d, xa);
    auto k = detail::matvec(st.wk, d, xb);
    rotate_rope(q, static_cast<double>(i), cfg);
    rotate_rope(k, static_cast<double>(j), cfg);
    return detail::dot(q, k);
  }
  const auto q = detail::matvec(st.wq, d,
                                detail::add(xa, position_embedding(st, cfg, i)));
  const auto k = detail::matvec(st.wk, d,
                                detail::add(xb, position_embedding(st, cfg, j)));
  return detail::dot(q, k);
}

// RoPE score via the relative form x_a^T Wq^T R^{j-i} Wk x_b. Agrees with
// attention_score to floating-point accuracy; bitwise shift-invariant in
// (i, j) because only j-i enters.
inline double attention_score_relative(const KernelState& st,
                                       const KernelConfig& cfg,
                                       const std::vector<double>& xa,
                                       const std::vector<double>& xb, int i,
                                       int j) {
  if (cfg.encoding != Encoding::RoPE)
    throw DomainError("attention_score_relative applies to RoPE only");
  const int d = cfg.head_dim;
  const auto q = detail::matvec(st.wq, d, xa);
  auto k = detail::matvec(st.wk, d, xb);
  rotate_rope(k, static_cast<double>(j - i), cfg);
  return detail::dot(q, k);
}

struct ShiftProbe {
  std::vector<double> xa, xb;
  int a = 0, b = 0;
  int k = 1;
};

inline double delta_a(const KernelState& st, const KernelConfig& cfg,
                      const ShiftProbe& probe) {
  const double before = attention_score(st, cfg, probe.xa, probe.xb, probe.a, probe.b);
  const double after = attention_score(st, cfg, probe.xa, probe.xb,
                                       probe.a + probe.k, probe.b + probe.k);
  return std::abs(after - before);
}

struct SweepRow {
  std::string encoding;
  int k = 0;
  double mean_da = 0.0;
  double max_da = 0.0;
  double frac_positive = 0.0;  // fraction of probes with delta_a > threshold
  int probes_used = 0;
  int skipped = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  double positive_threshold = 1e-9;
  // Empirical Lipschitz proxy: max delta_a / delta with delta = 1, the
  // unit-dominated structural displacement of a single inert insertion.
  double lipschitz_proxy = 0.0;
};

inline SweepReport shift_sweep(const KernelState& st, const KernelConfig& cfg,
                               int n_probes, const std::vector<int>& k_values,
                               std::uint64_t seed,
                               double positive_threshold = 1e-9) {
  SweepReport report;
  report.positive_threshold = positive_threshold;
  for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
    const int k = k_values[ki];
    Rng rng = Rng::stream(seed, ki);
    SweepRow row;
    row.encoding = to_string(cfg.encoding);
    row.k = k;
    double sum = 0.0;
    int positive = 0;
    for (int p = 0; p < n_probes; ++p) {
      ShiftProbe probe;
      probe.k = k;
      probe.a = static_cast<int>(rng.uniform_int(0, cfg.max_position - 1));
      probe.b = static_cast<int>(rng.uniform_int(0, cfg.max_position - 1));
      probe.xa.resize(static_cast<std::size_t>(cfg.head_dim));
      probe.xb.resize(static_cast<std::size_t>(cfg.head_dim));
      for (auto& x : probe.xa) x = rng.normal();
      for (auto& x : probe.xb) x = rng.normal();
      if (probe.a + k >= cfg.max_position || probe.b + k >= cfg.max_position) {
        ++row.skipped;
        continue;
      }
      const double da = delta_a(st, cfg, probe);
      sum += da;
      if (da > row.max_da) row.max_da = da;
      if (da > positive_threshold) ++positive;
      ++row.probes_used;
    }
    if (row.probes_used > 0) {
      row.mean_da = sum / row.probes_used;
      row.frac_positive = static_cast<double>(positive) / row.probes_used;
    }
    if (row.max_da > report.lipschitz_proxy) report.lipschitz_proxy = row.max_da;
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ============================================================================
// Translation operator: insert one structurally inert node of exactly
// k_tokens tokens before the node at `position` (1..N; N appends at the end).
// The inert node reuses its predecessor's identifier, so the move into and
// out of it is lateral: chi4 grows by exactly 1, chi1 and all marker counts
// are untouched, and the Dyck image is unchanged.
// ============================================================================

inline Trajectory translate_trajectory(const Trajectory& t, int k_tokens,
                                       std::size_t position,
                                       int max_tokens = 1024) {
  if (t.nodes.empty()) throw DomainError("translate_trajectory: empty trajectory");
  if (position < 1 || position > t.nodes.size())
    throw DomainError("translate_trajectory: position must be in [1, N]");
  // "Node <id>: x=x" is 6 tokens; the rest is filler.
  if (k_tokens < 6)
    throw DomainError("translate_trajectory: inert node needs at least 6 tokens");

  NodeRecord inert;
  inert.identifier = t.nodes[position - 1].identifier;
  inert.depth = static_cast<int>(inert.identifier.size());
  inert.text = "x=x";
  for (int p = 0; p < k_tokens - 6; ++p) inert.text += " pad";

  Trajectory out = t;
  out.nodes.insert(out.nodes.begin() + static_cast<std::ptrdiff_t>(position),
                   inert);
  out.tokens = tokenize(serialize(out));
  if (out.tokens.size() > static_cast<std::size_t>(max_tokens))
    throw DomainError("translate_trajectory: token budget overflow (" +
                      std::to_string(out.tokens.size()) + " > " +
                      std::to_string(max_tokens) + ")");
  return out;
}

}  // namespace trajlab
