#pragma once

/**
 * Closed-form generalization-bound calculators.
 *
 * Lower bounds on target risk, each evaluated independently:
 *   width:     C_width / sqrt(m) - eps
 *   depth:     (1 - 1/|V|) * p_deep - eps,  p_deep = P[chi1 > alpha_circ * L]
 *   transport: R_S - K_f * W1 - 2*eps
 * The unified lower bound is their maximum; the upper bound is
 * R_S + K_f * W1 + 2*eps. These are calculators over supplied constants, not
 * estimators: C_width, alpha_circ, eps, K_f are user inputs with documented
 * defaults.
 *
 * ceiling_fit calibrates Accuracy_max(L) = A_max - beta * exp(-alpha * L) as
 * the tight upper envelope of (L, accuracy) points: minimal total slack
 * subject to zero violations, via a deterministic grid-then-refine search.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "trajlab/error.hpp"

namespace trajlab {

struct BoundInputs {
  int m = 1024;                 // representation width
  int L = 12;                   // layer depth
  double alpha_circ = 1.0;      // depth-threshold constant
  double epsilon = 0.01;        // irreducible approximation error
  double C_width = 1.0;
  long long vocab_size = 50257;
  double K_f = 0.0;             // Lipschitz constant for the encoding at hand
  double W1 = 0.0;
  double source_risk = 0.0;     // R_S in [0, 1]
  std::vector<double> target_chi1_samples;

  void validate() const {
    if (m < 1) throw DomainError("BoundInputs: m must be >= 1");
    if (L < 1) throw DomainError("BoundInputs: L must be >= 1");
    if (alpha_circ <= 0.0) throw DomainError("BoundInputs: alpha_circ must be positive");
    if (epsilon < 0.0 || K_f < 0.0 || W1 < 0.0 || C_width <= 0.0)
      throw DomainError("BoundInputs: negative constant");
    if (vocab_size < 2) throw DomainError("BoundInputs: vocab_size must be >= 2");
    if (source_risk < 0.0 || source_risk > 1.0)
      throw DomainError("BoundInputs: source_risk must lie in [0, 1]");
    for (double v : {alpha_circ, epsilon, C_width, K_f, W1, source_risk})
      if (!std::isfinite(v)) throw DomainError("BoundInputs: non-finite value");
  }
};

enum class ActiveTerm { width, depth, transport };

inline const char* to_string(ActiveTerm t) {
  switch (t) {
    case ActiveTerm::width: return "width";
    case ActiveTerm::depth: return "depth";
    case ActiveTerm::transport: return "transport";
  }
  return "?";
}

struct BoundReport {
  double lb_width = 0.0;
  double lb_depth = 0.0;
  double lb_transport = 0.0;
  double lower_bound = 0.0;  // max of the three
  double upper_bound = 0.0;
  ActiveTerm active_term = ActiveTerm::width;
  double p_deep = 0.0;
  double c_depth = 0.0;      // 1 - 1/|V|
  bool consistent = true;    // upper_bound >= lower_bound; false flags
                             // mutually inconsistent inputs, not a crash
};

inline double gamma(long long vocab_size) {
  if (vocab_size < 2) throw DomainError("gamma: vocab_size must be >= 2");
  return 1.0 - 1.0 / static_cast<double>(vocab_size);
}

// Two-sided risk-gap bound K_f * W1 + 2*eps.
inline double transport_gap_bound(double k_f, double w1, double epsilon) {
  if (k_f < 0.0 || w1 < 0.0 || epsilon < 0.0)
    throw DomainError("transport_gap_bound: inputs must be non-negative");
  return k_f * w1 + 2.0 * epsilon;
}

inline double width_bound(double c_width, long long m, double epsilon) {
  if (m < 1) throw DomainError("width_bound: m must be >= 1");
  return c_width / std::sqrt(static_cast<double>(m)) - epsilon;
}

struct DepthBound {
  double lb_depth = 0.0;
  double p_deep = 0.0;
};

// p_deep = fraction of chi1 samples strictly above alpha_circ * L.
inline DepthBound depth_bound(const BoundInputs& in) {
  if (in.target_chi1_samples.empty())
    throw DomainError("depth_bound: chi1 samples must be non-empty");
  const double threshold = in.alpha_circ * static_cast<double>(in.L);
  std::size_t deep = 0;
  for (double chi1 : in.target_chi1_samples)
    if (chi1 > threshold) ++deep;
  DepthBound out;
  out.p_deep = static_cast<double>(deep) /
               static_cast<double>(in.target_chi1_samples.size());
  out.lb_depth = gamma(in.vocab_size) * out.p_deep - in.epsilon;
  return out;
}

inline BoundReport unified_bound(const BoundInputs& in) {
  in.validate();
  BoundReport r;
  r.lb_width = width_bound(in.C_width, in.m, in.epsilon);
  const DepthBound d = depth_bound(in);
  r.lb_depth = d.lb_depth;
  r.p_deep = d.p_deep;
  r.c_depth = gamma(in.vocab_size);
  r.lb_transport = in.source_risk - in.K_f * in.W1 - 2.0 * in.epsilon;

  // argmax with fixed tie order width < depth < transport
  r.lower_bound = r.lb_width;
  r.active_term = ActiveTerm::width;
  if (r.lb_depth > r.lower_bound) {
    r.lower_bound = r.lb_depth;
    r.active_term = ActiveTerm::depth;
  }
  if (r.lb_transport > r.lower_bound) {
    r.lower_bound = r.lb_transport;
    r.active_term = ActiveTerm::transport;
  }

  r.upper_bound = in.source_risk + in.K_f * in.W1 + 2.0 * in.epsilon;
  r.consistent = r.upper_bound >= r.lower_bound;
  return r;
}

// ============================================================================
// Pareto-infimum ceiling calibration
// ============================================================================

struct CeilingPoint {
  double L = 0.0;
  double accuracy = 0.0;
};

struct CeilingFit {
  double a_max = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
  int violations = 0;  // always 0 on the fitted data (supremum envelope)

  double evaluate(double L) const { return a_max - beta * std::exp(-alpha * L); }
};

inline double ceiling_value(double a_max, double beta, double alpha, double L) {
  return a_max - beta * std::exp(-alpha * L);
}

namespace detail {

// For fixed (alpha, beta) the tight envelope offset is forced:
// A_max = max_i (acc_i + beta * exp(-alpha * L_i)); every point is then
// dominated and the slack objective is the remaining total gap.
inline double envelope_objective(const std::vector<CeilingPoint>& pts,
                                 double alpha, double beta, double& a_max_out) {
  double a_max = -std::numeric_limits<double>::infinity();
  for (const auto& p : pts)
    a_max = std::max(a_max, p.accuracy + beta * std::exp(-alpha * p.L));
  double slack = 0.0;
  for (const auto& p : pts)
    slack += ceiling_value(a_max, beta, alpha, p.L) - p.accuracy;
  a_max_out = a_max;
  return slack;
}

}  // namespace detail

// Deterministic grid-then-refine search over alpha in [0.01, 1] and beta in
// [0.001, 0.5]; ties resolve to the first grid cell scanned.
inline CeilingFit ceiling_fit(const std::vector<CeilingPoint>& points) {
  if (points.size() < 3)
    throw DomainError("ceiling_fit: need at least 3 points");
  for (const auto& p : points)
    if (p.accuracy < 0.0 || p.accuracy > 1.0)
      throw DomainError("ceiling_fit: accuracies must lie in [0, 1]");

  double alpha_lo = 0.01, alpha_hi = 1.0;
  double beta_lo = 0.001, beta_hi = 0.5;
  const int kGrid = 101;

  CeilingFit best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 4; ++round) {
    const double da = (alpha_hi - alpha_lo) / (kGrid - 1);
    const double db = (beta_hi - beta_lo) / (kGrid - 1);
    for (int ai = 0; ai < kGrid; ++ai) {
      const double alpha = alpha_lo + da * ai;
      for (int bi = 0; bi < kGrid; ++bi) {
        const double beta = beta_lo + db * bi;
        double a_max = 0.0;
        const double obj = detail::envelope_objective(points, alpha, beta, a_max);
        if (obj < best_obj) {
          best_obj = obj;
          best.alpha = alpha;
          best.beta = beta;
          best.a_max = a_max;
        }
      }
    }
    // shrink the window around the incumbent, clamped to the legal ranges
    const double aw = (alpha_hi - alpha_lo) * 0.1;
    const double bw = (beta_hi - beta_lo) * 0.1;
    alpha_lo = std::max(0.01, best.alpha - aw);
    alpha_hi = std::min(1.0, best.alpha + aw);
    beta_lo = std::max(0.001, best.beta - bw);
    beta_hi = std::min(0.5, best.beta + bw);
  }

  best.violations = 0;
  for (const auto& p : points)
    if (best.evaluate(p.L) < p.accuracy - 1e-12) ++best.violations;
  return best;
}

}  // namespace trajlab
