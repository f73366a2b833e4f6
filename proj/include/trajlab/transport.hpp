#pragma once

/**
 * Wasserstein-1 estimation between empirical structural measures.
 *
 * The estimation pipeline mirrors how the corpora are compared end to end:
 * joint z-score standardization on the pooled point set, Euclidean cost
 * matrix rescaled by its own maximum (plus 1e-9), then entropically
 * regularized optimal transport solved by log-domain Sinkhorn iterations.
 * The reported scalar is the transport term <P, M~>_F of the converged plan;
 * the full regularized objective <P, M~>_F - lambda * H(P) is carried
 * alongside for transparency.
 *
 * exact_ot is the desk-scale validation oracle: successive shortest paths on
 * the bipartite transportation graph, with a complementary-slackness
 * certificate checked before the value is returned. The entropic transport
 * term always sits within lambda * log(n*m) of this exact optimum.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "trajlab/corpus_io.hpp"
#include "trajlab/error.hpp"
#include "trajlab/projection.hpp"
#include "trajlab/random.hpp"

namespace trajlab {

struct EmpiricalMeasure {
  std::vector<std::array<double, 12>> points;
  std::vector<double> weights;  // non-negative, sums to 1

  static EmpiricalMeasure uniform(std::vector<std::array<double, 12>> pts) {
    EmpiricalMeasure m;
    if (pts.empty()) throw DomainError("EmpiricalMeasure: need at least one point");
    m.weights.assign(pts.size(), 1.0 / static_cast<double>(pts.size()));
    m.points = std::move(pts);
    return m;
  }

  static EmpiricalMeasure uniform_from(const std::vector<StructuralVector>& rows) {
    std::vector<std::array<double, 12>> pts;
    pts.reserve(rows.size());
    for (const auto& r : rows) pts.push_back(r.chi);
    return uniform(std::move(pts));
  }

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.empty()) throw DomainError("EmpiricalMeasure: empty");
    if (weights.size() != points.size())
      throw DomainError("EmpiricalMeasure: weights/points size mismatch");
    double s = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw DomainError("EmpiricalMeasure: negative weight");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw DomainError("EmpiricalMeasure: weights sum to " + std::to_string(s));
  }
};

struct StandardizationStats {
  std::array<double, 12> mean{};
  std::array<double, 12> std{};
};

// Joint standardization: z-scores computed on the pooled point set of all
// compared measures, so relative geometry across measures is preserved.
// Zero-variance coordinates are centered and left unscaled.
inline std::pair<std::vector<EmpiricalMeasure>, StandardizationStats>
standardize(const std::vector<EmpiricalMeasure>& measures) {
  if (measures.empty()) throw DomainError("standardize: no measures");
  for (const auto& m : measures) m.validate();

  StandardizationStats stats;
  std::size_t total = 0;
  for (const auto& m : measures) total += m.size();
  for (std::size_t c = 0; c < 12; ++c) {
    double sum = 0.0;
    for (const auto& m : measures)
      for (const auto& p : m.points) sum += p[c];
    const double mean = sum / static_cast<double>(total);
    double var = 0.0;
    for (const auto& m : measures)
      for (const auto& p : m.points) var += (p[c] - mean) * (p[c] - mean);
    var /= static_cast<double>(total);
    stats.mean[c] = mean;
    stats.std[c] = std::sqrt(var);
  }

  std::vector<EmpiricalMeasure> out = measures;
  for (auto& m : out)
    for (auto& p : m.points)
      for (std::size_t c = 0; c < 12; ++c) {
        const double denom = stats.std[c] > 0.0 ? stats.std[c] : 1.0;
        p[c] = (p[c] - stats.mean[c]) / denom;
      }
  return {std::move(out), stats};
}

struct CostMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> raw;         // Euclidean distances, row-major
  std::vector<double> normalized;  // raw / (max(raw) + 1e-9), entries in [0, 1)
  double max_raw = 0.0;

  double raw_at(std::size_t i, std::size_t j) const { return raw[i * cols + j]; }
  double norm_at(std::size_t i, std::size_t j) const {
    return normalized[i * cols + j];
  }
};

inline CostMatrix build_cost(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  CostMatrix m;
  m.rows = a.size();
  m.cols = b.size();
  m.raw.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < 12; ++c) {
        const double d = a.points[i][c] - b.points[j][c];
        s += d * d;
      }
      const double dist = std::sqrt(s);
      m.raw[i * m.cols + j] = dist;
      if (dist > m.max_raw) m.max_raw = dist;
    }
  m.normalized.resize(m.raw.size());
  const double denom = m.max_raw + 1e-9;
  for (std::size_t i = 0; i < m.raw.size(); ++i)
    m.normalized[i] = m.raw[i] / denom;
  return m;
}

struct TransportPlan {
  std::size_t rows = 0, cols = 0;
  std::vector<double> coupling;       // row-major, entries strictly positive
  double transport_cost = 0.0;        // <P, M>_F on the supplied cost
  double regularized_objective = 0.0; // transport_cost - lambda * H(P)
  double entropy = 0.0;               // H(P) = -sum P log P
  double lambda = 0.0;
  int iterations_used = 0;
  double marginal_error = 0.0;        // max L-inf violation of row/col sums
  bool converged = false;
};

// Log-domain Sinkhorn on an arbitrary cost matrix. Stable for any lambda > 0;
// the Gibbs kernel is never materialized, so small lambda cannot underflow.
inline TransportPlan sinkhorn_plan(const std::vector<double>& cost,
                                   std::size_t rows, std::size_t cols,
                                   const std::vector<double>& p,
                                   const std::vector<double>& q, double lambda,
                                   int max_iter = 10000, double tol = 1e-9) {
  if (lambda <= 0.0) throw DomainError("sinkhorn: lambda must be positive");
  if (p.size() != rows || q.size() != cols)
    throw DomainError("sinkhorn: marginal size mismatch");
  for (double w : p)
    if (w <= 0.0) throw DomainError("sinkhorn: marginals must be strictly positive");
  for (double w : q)
    if (w <= 0.0) throw DomainError("sinkhorn: marginals must be strictly positive");

  std::vector<double> f(rows, 0.0), g(cols, 0.0);
  std::vector<double> logp(rows), logq(cols);
  for (std::size_t i = 0; i < rows; ++i) logp[i] = std::log(p[i]);
  for (std::size_t j = 0; j < cols; ++j) logq[j] = std::log(q[j]);

  // lse over a strided slice of exponent terms (x - already divided by lambda)
  const auto row_lse = [&](std::size_t i, const std::vector<double>& gg) {
    double hi = -std::numeric_limits<double>::infinity();
    const double* c = cost.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j)
      hi = std::max(hi, (gg[j] - c[j]) / lambda);
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j)
      s += std::exp((gg[j] - c[j]) / lambda - hi);
    return hi + std::log(s);
  };
  const auto col_lse = [&](std::size_t j, const std::vector<double>& ff) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows; ++i)
      hi = std::max(hi, (ff[i] - cost[i * cols + j]) / lambda);
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      s += std::exp((ff[i] - cost[i * cols + j]) / lambda - hi);
    return hi + std::log(s);
  };

  TransportPlan plan;
  plan.rows = rows;
  plan.cols = cols;
  plan.lambda = lambda;

  double err = std::numeric_limits<double>::infinity();
  int iter = 0;
  while (iter < max_iter) {
    ++iter;
    // Row pass: the same lse yields the pre-update row-marginal error and the
    // new f. Likewise for columns.
    double row_err = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      const double lse = row_lse(i, g);
      row_err = std::max(row_err, std::abs(std::exp(f[i] / lambda + lse) - p[i]));
      f[i] = lambda * (logp[i] - lse);
    }
    double col_err = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double lse = col_lse(j, f);
      col_err = std::max(col_err, std::abs(std::exp(g[j] / lambda + lse) - q[j]));
      g[j] = lambda * (logq[j] - lse);
    }
    err = std::max(row_err, col_err);
    if (err < tol) {
      plan.converged = true;
      break;
    }
  }
  plan.iterations_used = iter;

  plan.coupling.resize(rows * cols);
  double cost_sum = 0.0, entropy = 0.0;
  double final_row_err = 0.0, final_col_err = 0.0;
  std::vector<double> col_sums(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double pij = std::exp((f[i] + g[j] - cost[i * cols + j]) / lambda);
      plan.coupling[i * cols + j] = pij;
      row_sum += pij;
      col_sums[j] += pij;
      cost_sum += pij * cost[i * cols + j];
      if (pij > 0.0) entropy -= pij * std::log(pij);
    }
    final_row_err = std::max(final_row_err, std::abs(row_sum - p[i]));
  }
  for (std::size_t j = 0; j < cols; ++j)
    final_col_err = std::max(final_col_err, std::abs(col_sums[j] - q[j]));

  plan.transport_cost = cost_sum;
  plan.entropy = entropy;
  plan.regularized_objective = cost_sum - lambda * entropy;
  plan.marginal_error = std::max(final_row_err, final_col_err);
  return plan;
}

// Appendix-style estimate between standardized measures: Euclidean cost,
// supremum normalization, entropic plan. The transport term is on the
// normalized [0, 1] scale.
inline TransportPlan sinkhorn_w1(const EmpiricalMeasure& a,
                                 const EmpiricalMeasure& b, double lambda,
                                 int max_iter = 10000, double tol = 1e-9) {
  a.validate();
  b.validate();
  const CostMatrix cost = build_cost(a, b);
  return sinkhorn_plan(cost.normalized, cost.rows, cost.cols, a.weights,
                       b.weights, lambda, max_iter, tol);
}

// ============================================================================
// Exact solver (desk-scale oracle)
// ============================================================================

struct ExactPlan {
  double value = 0.0;
  std::size_t rows = 0, cols = 0;
  std::vector<double> coupling;
};

// Successive shortest paths with Dijkstra potentials on the complete
// bipartite transportation graph. Optimality is certified by complementary
// slackness before returning; a failed certificate throws.
inline ExactPlan exact_ot(const std::vector<double>& cost, std::size_t rows,
                          std::size_t cols, const std::vector<double>& p,
                          const std::vector<double>& q) {
  if (p.size() != rows || q.size() != cols)
    throw DomainError("exact_ot: marginal size mismatch");
  const std::size_t n_nodes = rows + cols;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> flow(rows * cols, 0.0);
  std::vector<double> pot(n_nodes, 0.0);
  std::vector<double> supply = p, demand = q;

  const std::size_t max_augment = 20 * n_nodes + 1000;
  std::size_t augment = 0;
  for (;;) {
    bool any_supply = false;
    for (double s : supply)
      if (s > 1e-15) { any_supply = true; break; }
    if (!any_supply) break;
    if (++augment > max_augment)
      throw Error("exact_ot: augmentation cap exceeded");

    // Dense multi-source Dijkstra over the residual graph.
    std::vector<double> dist(n_nodes, kInf);
    std::vector<int> parent(n_nodes, -1);
    std::vector<bool> visited(n_nodes, false);
    for (std::size_t i = 0; i < rows; ++i)
      if (supply[i] > 1e-15) dist[i] = 0.0;

    for (;;) {
      std::size_t u = n_nodes;
      double best = kInf;
      for (std::size_t v = 0; v < n_nodes; ++v)
        if (!visited[v] && dist[v] < best) { best = dist[v]; u = v; }
      if (u == n_nodes) break;
      visited[u] = true;
      if (u < rows) {
        for (std::size_t j = 0; j < cols; ++j) {
          const double rc =
              std::max(0.0, cost[u * cols + j] + pot[u] - pot[rows + j]);
          if (dist[u] + rc < dist[rows + j]) {
            dist[rows + j] = dist[u] + rc;
            parent[rows + j] = static_cast<int>(u);
          }
        }
      } else {
        const std::size_t j = u - rows;
        for (std::size_t i = 0; i < rows; ++i) {
          if (flow[i * cols + j] <= 0.0) continue;
          const double rc =
              std::max(0.0, -cost[i * cols + j] + pot[rows + j] - pot[i]);
          if (dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            parent[i] = static_cast<int>(u);
          }
        }
      }
    }

    std::size_t sink = n_nodes;
    double best = kInf;
    for (std::size_t j = 0; j < cols; ++j)
      if (demand[j] > 1e-15 && dist[rows + j] < best) {
        best = dist[rows + j];
        sink = rows + j;
      }
    if (sink == n_nodes) throw Error("exact_ot: no augmenting path (infeasible marginals?)");

    const double reach = dist[sink];
    for (std::size_t v = 0; v < n_nodes; ++v)
      pot[v] += std::min(dist[v], reach);

    // Walk the path back to its source, collecting the bottleneck.
    double delta = demand[sink - rows];
    for (std::size_t v = sink; parent[v] != -1;) {
      const std::size_t u = static_cast<std::size_t>(parent[v]);
      if (u < rows)  // forward arc u->v, uncapacitated
        ;
      else  // backward arc: reduces flow on (v, u)
        delta = std::min(delta, flow[v * cols + (u - rows)]);
      v = u;
      if (parent[v] == -1) delta = std::min(delta, supply[v]);
    }
    for (std::size_t v = sink; parent[v] != -1;) {
      const std::size_t u = static_cast<std::size_t>(parent[v]);
      if (u < rows) flow[u * cols + (v - rows)] += delta;
      else flow[v * cols + (u - rows)] -= delta;
      v = u;
    }
    {
      std::size_t src = sink;
      while (parent[src] != -1) src = static_cast<std::size_t>(parent[src]);
      supply[src] -= delta;
    }
    demand[sink - rows] -= delta;
  }

  // Complementary slackness certificate.
  double scale = 1.0;
  for (double c : cost) scale = std::max(scale, std::abs(c));
  const double tol = 1e-8 * scale;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double rc = cost[i * cols + j] + pot[i] - pot[rows + j];
      if (rc < -tol) throw Error("exact_ot: dual feasibility violated");
      if (flow[i * cols + j] > 1e-12 && std::abs(rc) > tol)
        throw Error("exact_ot: complementary slackness violated");
    }
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += flow[i * cols + j];
    if (std::abs(s - p[i]) > 1e-9) throw Error("exact_ot: row marginal off");
  }
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += flow[i * cols + j];
    if (std::abs(s - q[j]) > 1e-9) throw Error("exact_ot: column marginal off");
  }

  ExactPlan plan;
  plan.rows = rows;
  plan.cols = cols;
  plan.value = 0.0;
  for (std::size_t i = 0; i < rows * cols; ++i)
    plan.value += flow[i] * cost[i];
  plan.coupling = std::move(flow);
  return plan;
}

// Exact W1 between measures under the raw Euclidean metric. Desk-scale by
// design: refuses above n*m = 10,000.
inline ExactPlan exact_w1(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  a.validate();
  b.validate();
  if (a.size() * b.size() > 10000)
    throw DomainError("exact_w1: instance above the n*m <= 10000 oracle cap");
  const CostMatrix cost = build_cost(a, b);
  return exact_ot(cost.raw, cost.rows, cost.cols, a.weights, b.weights);
}

// ============================================================================
// Subsampled pairwise estimation over corpora
// ============================================================================

struct W1Report {
  std::string pair_name;
  double lambda = 0.1;
  int n_sample = 0;
  int pool = 0;
  int repeats = 0;
  std::uint64_t seed = 0;
  std::vector<double> values;  // transport term per repeat
  double mean = 0.0;
  double stddev = 0.0;  // population std across repeats
  bool normalized = true;
  bool exact = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::size_t> sample_indices(std::vector<std::size_t>& pool_ids,
                                               std::size_t n, Rng& rng) {
  rng.shuffle(pool_ids);
  return {pool_ids.begin(), pool_ids.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace detail

// One pairwise distance run: subsample without replacement, project, jointly
// standardize, normalize the cost, Sinkhorn at the given lambda. When both
// paths name the same corpus the two samples are drawn as disjoint halves of
// the shuffled pool, which is the in-distribution comparison. When
// `last_plan` is non-null it receives the final repeat's converged plan.
inline W1Report pipeline_w1(const std::string& path_a, const std::string& path_b,
                            int n_sample, int pool, int repeats,
                            std::uint64_t seed, double lambda = 0.1,
                            int max_iter = 10000, double tol = 1e-9,
                            TransportPlan* last_plan = nullptr) {
  if (n_sample < 1 || repeats < 1 || pool < 1)
    throw DomainError("pipeline_w1: n_sample, pool, repeats must be >= 1");
  if (n_sample > pool) throw DomainError("pipeline_w1: n_sample must be <= pool");

  W1Report report;
  const auto base = [](const std::string& p) {
    const std::size_t s = p.find_last_of('/');
    return s == std::string::npos ? p : p.substr(s + 1);
  };
  report.pair_name = base(path_a) + "|" + base(path_b);
  report.lambda = lambda;
  report.n_sample = n_sample;
  report.pool = pool;
  report.repeats = repeats;
  report.seed = seed;

  const bool same = path_a == path_b;
  const std::vector<Trajectory> corpus_a = read_corpus(path_a);
  const std::vector<Trajectory> corpus_b = same ? std::vector<Trajectory>{}
                                                : read_corpus(path_b);

  const auto clamp_pool = [&](std::size_t corpus_size,
                              const std::string& which) -> std::size_t {
    if (static_cast<std::size_t>(pool) > corpus_size) {
      report.warnings.push_back("pool clamped to corpus size " +
                                std::to_string(corpus_size) + " for " + which);
      return corpus_size;
    }
    return static_cast<std::size_t>(pool);
  };

  std::vector<std::size_t> pool_a, pool_b;
  {
    const std::size_t pa = clamp_pool(corpus_a.size(), base(path_a));
    std::vector<std::size_t> ids(corpus_a.size());
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng = Rng::stream(seed, 0xA);
    rng.shuffle(ids);
    pool_a.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(pa));
  }
  if (!same) {
    const std::size_t pb = clamp_pool(corpus_b.size(), base(path_b));
    std::vector<std::size_t> ids(corpus_b.size());
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng = Rng::stream(seed, 0xB);
    rng.shuffle(ids);
    pool_b.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(pb));
  }

  const std::size_t n = static_cast<std::size_t>(n_sample);
  if (same && 2 * n > pool_a.size())
    throw DomainError("pipeline_w1: disjoint halves need 2*n_sample <= pool");
  if (!same && (n > pool_a.size() || n > pool_b.size()))
    throw DomainError("pipeline_w1: n_sample exceeds clamped pool");

  for (int r = 0; r < repeats; ++r) {
    Rng rng = Rng::stream(seed, 1000 + static_cast<std::uint64_t>(r));
    std::vector<std::size_t> ids_a, ids_b;
    if (same) {
      std::vector<std::size_t> ids = pool_a;
      rng.shuffle(ids);
      ids_a.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
      ids_b.assign(ids.begin() + static_cast<std::ptrdiff_t>(n),
                   ids.begin() + static_cast<std::ptrdiff_t>(2 * n));
    } else {
      std::vector<std::size_t> ids = pool_a;
      ids_a = detail::sample_indices(ids, n, rng);
      ids = pool_b;
      ids_b = detail::sample_indices(ids, n, rng);
    }

    std::vector<std::array<double, 12>> pts_a, pts_b;
    pts_a.reserve(n);
    pts_b.reserve(n);
    for (std::size_t id : ids_a) pts_a.push_back(project(corpus_a[id]).chi);
    const std::vector<Trajectory>& src_b = same ? corpus_a : corpus_b;
    for (std::size_t id : ids_b) pts_b.push_back(project(src_b[id]).chi);

    auto [standardized, stats] =
        standardize({EmpiricalMeasure::uniform(std::move(pts_a)),
                     EmpiricalMeasure::uniform(std::move(pts_b))});
    (void)stats;
    TransportPlan plan = sinkhorn_w1(standardized[0], standardized[1], lambda,
                                     max_iter, tol);
    report.values.push_back(plan.transport_cost);
    if (last_plan && r == repeats - 1) *last_plan = std::move(plan);
  }

  double sum = 0.0;
  for (double v : report.values) sum += v;
  report.mean = sum / static_cast<double>(report.values.size());
  double var = 0.0;
  for (double v : report.values) var += (v - report.mean) * (v - report.mean);
  report.stddev = std::sqrt(var / static_cast<double>(report.values.size()));
  return report;
}

}  // namespace trajlab
