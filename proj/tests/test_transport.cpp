#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "trajlab/corpus_io.hpp"
#include "trajlab/projection.hpp"
#include "trajlab/random.hpp"
#include "trajlab/transport.hpp"

using namespace trajlab;

namespace {

std::array<double, 12> point(std::initializer_list<double> head) {
  std::array<double, 12> p{};
  std::size_t i = 0;
  for (double v : head) p[i++] = v;
  return p;
}

EmpiricalMeasure random_measure(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<std::array<double, 12>> pts(n);
  for (auto& p : pts)
    for (auto& x : p) x = scale * rng.normal();
  return EmpiricalMeasure::uniform(std::move(pts));
}

// Exact optimum for uniform square measures by brute-force enumeration of
// permutation couplings (Birkhoff: some permutation attains the optimum).
double permutation_oracle(const CostMatrix& cost) {
  REQUIRE(cost.rows == cost.cols);
  std::vector<std::size_t> perm(cost.rows);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < cost.rows; ++i) total += cost.raw_at(i, perm[i]);
    best = std::min(best, total / static_cast<double>(cost.rows));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("standardize centers a single point to zero") {
  const auto m = EmpiricalMeasure::uniform({point({5, -3, 100, 0.5})});
  const auto [out, stats] = standardize({m});
  for (std::size_t c = 0; c < 12; ++c) REQUIRE(out[0].points[0][c] == 0.0);
  REQUIRE(stats.mean[0] == 5.0);
  REQUIRE(stats.std[0] == 0.0);  // zero-variance coordinate left unscaled
}

TEST_CASE("standardize maps identical measures identically") {
  Rng rng(2);
  const auto m = random_measure(rng, 7);
  const auto [out, stats] = standardize({m, m});
  (void)stats;
  REQUIRE(out[0].points == out[1].points);
}

TEST_CASE("standardization stops the volume coordinate from dominating") {
  GenerationConfig cfg;
  cfg.corpus_size = 100;
  cfg.seed = 5;
  cfg.strategy = Strategy::BFS;
  const auto bfs = project_corpus(generate_corpus(cfg));
  cfg.strategy = Strategy::DFS;
  const auto dfs = project_corpus(generate_corpus(cfg));

  const auto shares = [](const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    std::array<double, 12> s{};
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j)
        for (std::size_t c = 0; c < 12; ++c) {
          const double d = a.points[i][c] - b.points[j][c];
          s[c] += d * d;
        }
    return s;
  };
  const auto spread = [](std::array<double, 12> s) {
    std::sort(s.begin(), s.end());
    const double median = 0.5 * (s[5] + s[6]);
    return std::pair{s[11], median};
  };

  const auto ma = EmpiricalMeasure::uniform_from(bfs);
  const auto mb = EmpiricalMeasure::uniform_from(dfs);
  const auto [std_measures, stats] = standardize({ma, mb});
  (void)stats;
  const auto [max_after, median_after] = spread(shares(std_measures[0], std_measures[1]));
  REQUIRE(max_after <= 10.0 * median_after);
}

TEST_CASE("cost matrices are normalized into [0, 1]") {
  Rng rng(3);
  const auto a = random_measure(rng, 6);
  const auto b = random_measure(rng, 9);
  const CostMatrix m = build_cost(a, b);
  REQUIRE(m.max_raw > 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) {
      REQUIRE(m.norm_at(i, j) >= 0.0);
      REQUIRE(m.norm_at(i, j) < 1.0);
      REQUIRE(std::abs(m.norm_at(i, j) * (m.max_raw + 1e-9) - m.raw_at(i, j)) <= 1e-12);
    }
}

TEST_CASE("two single points force the trivial coupling") {
  const auto a = EmpiricalMeasure::uniform({point({0, 0})});
  const auto b = EmpiricalMeasure::uniform({point({3, 4})});
  const TransportPlan plan = sinkhorn_w1(a, b, 0.1);
  REQUIRE(plan.coupling.size() == 1);
  REQUIRE(std::abs(plan.coupling[0] - 1.0) <= 1e-12);
  // normalized cost of the single pair is ~1 by construction
  REQUIRE(std::abs(plan.transport_cost - 1.0) <= 1e-6);
  REQUIRE(plan.converged);
}

TEST_CASE("entropic transport term sits within lambda*log(nm) of exact") {
  Rng rng(6);
  const double lambda = 0.1;
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 20));
    const std::size_t m = static_cast<std::size_t>(rng.uniform_int(1, 20));
    const auto a = random_measure(rng, n);
    const auto b = random_measure(rng, m);
    const CostMatrix cost = build_cost(a, b);

    const TransportPlan plan = sinkhorn_plan(cost.normalized, n, m, a.weights,
                                             b.weights, lambda);
    const ExactPlan exact = exact_ot(cost.normalized, n, m, a.weights, b.weights);
    const double slack = lambda * std::log(static_cast<double>(n * m)) + 1e-6;
    CAPTURE(n, m, plan.transport_cost, exact.value);
    REQUIRE(plan.transport_cost >= exact.value - 1e-6);
    REQUIRE(plan.transport_cost - exact.value <= slack);
  }
}

TEST_CASE("exact solver matches brute-force permutation enumeration") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_measure(rng, 3);
    const auto b = random_measure(rng, 3);
    const CostMatrix cost = build_cost(a, b);
    const ExactPlan plan = exact_ot(cost.raw, 3, 3, a.weights, b.weights);
    REQUIRE(std::abs(plan.value - permutation_oracle(cost)) <= 1e-12);
  }
}

TEST_CASE("exact solver basics") {
  SECTION("identical point sets cost zero") {
    Rng rng(8);
    const auto a = random_measure(rng, 5);
    const ExactPlan plan = exact_w1(a, a);
    REQUIRE(plan.value <= 1e-12);
  }
  SECTION("one point versus one point costs their distance") {
    const auto a = EmpiricalMeasure::uniform({point({0, 0})});
    const auto b = EmpiricalMeasure::uniform({point({3, 4})});
    REQUIRE(std::abs(exact_w1(a, b).value - 5.0) <= 1e-12);
  }
  SECTION("desk-scale cap is enforced") {
    Rng rng(9);
    const auto a = random_measure(rng, 101);
    const auto b = random_measure(rng, 101);
    REQUIRE_THROWS_AS(exact_w1(a, b), DomainError);
  }
}

TEST_CASE("exact W1 satisfies the triangle inequality") {
  Rng rng(10);
  for (int trial = 0; trial < 15; ++trial) {
    const auto a = random_measure(rng, 4);
    const auto b = random_measure(rng, 5);
    const auto c = random_measure(rng, 6);
    const double ab = exact_w1(a, b).value;
    const double bc = exact_w1(b, c).value;
    const double ac = exact_w1(a, c).value;
    REQUIRE(ac <= ab + bc + 1e-9);
    REQUIRE(ab >= 0.0);
  }
}

TEST_CASE("sinkhorn transport term is symmetric") {
  Rng rng(11);
  const auto a = random_measure(rng, 8);
  const auto b = random_measure(rng, 11);
  const double ab = sinkhorn_w1(a, b, 0.1).transport_cost;
  const double ba = sinkhorn_w1(b, a, 0.1).transport_cost;
  REQUIRE(std::abs(ab - ba) <= 1e-9);
}

TEST_CASE("plans satisfy their marginals and carry both objectives") {
  Rng rng(12);
  const auto a = random_measure(rng, 7);
  const auto b = random_measure(rng, 9);
  const TransportPlan plan = sinkhorn_w1(a, b, 0.1);
  REQUIRE(plan.converged);
  REQUIRE(plan.marginal_error < 1e-8);
  for (std::size_t i = 0; i < plan.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < plan.cols; ++j) {
      REQUIRE(plan.coupling[i * plan.cols + j] > 0.0);  // entropic plans are dense
      row += plan.coupling[i * plan.cols + j];
    }
    REQUIRE(std::abs(row - a.weights[i]) <= plan.marginal_error + 1e-12);
  }
  REQUIRE(plan.regularized_objective == plan.transport_cost - plan.lambda * plan.entropy);
  REQUIRE(plan.entropy > 0.0);
}

TEST_CASE("sinkhorn handles tiny regularization in log domain") {
  Rng rng(13);
  const auto a = random_measure(rng, 6);
  const auto b = random_measure(rng, 6);

  // small lambda converges and approaches the exact optimum
  const TransportPlan plan = sinkhorn_w1(a, b, 0.01, 20000, 1e-9);
  REQUIRE(plan.converged);
  const CostMatrix cost = build_cost(a, b);
  const ExactPlan exact = exact_ot(cost.normalized, 6, 6, a.weights, b.weights);
  REQUIRE(std::abs(plan.transport_cost - exact.value) <= 0.01 * std::log(36.0) + 1e-6);

  // extreme lambda: the Gibbs kernel would underflow outside log domain;
  // here the iteration stays finite and reports honestly
  const TransportPlan hard = sinkhorn_w1(a, b, 1e-3, 5000, 1e-9);
  REQUIRE(std::isfinite(hard.transport_cost));
  REQUIRE(std::isfinite(hard.marginal_error));
  for (double p : hard.coupling) REQUIRE(std::isfinite(p));
  REQUIRE(!hard.converged);
  REQUIRE(hard.marginal_error < 1e-3);
}

TEST_CASE("non-convergence is reported, not hidden") {
  Rng rng(14);
  const auto a = random_measure(rng, 10);
  const auto b = random_measure(rng, 10);
  const TransportPlan plan = sinkhorn_w1(a, b, 0.1, 1, 1e-12);
  REQUIRE(!plan.converged);
  REQUIRE(plan.iterations_used == 1);
  REQUIRE(plan.marginal_error > 1e-12);
}

TEST_CASE("sinkhorn validates inputs") {
  Rng rng(15);
  const auto a = random_measure(rng, 3);
  REQUIRE_THROWS_AS(sinkhorn_w1(a, a, 0.0), DomainError);
  REQUIRE_THROWS_AS(sinkhorn_w1(a, a, -1.0), DomainError);
  EmpiricalMeasure bad = a;
  bad.weights[0] = -0.1;
  bad.weights[1] += 0.1;
  REQUIRE_THROWS_AS(sinkhorn_w1(bad, a, 0.1), DomainError);
}

TEST_CASE("pipeline_w1 over corpus files") {
  GenerationConfig cfg;
  cfg.corpus_size = 80;
  cfg.seed = 21;
  cfg.strategy = Strategy::BFS;
  write_corpus("w1_bfs_test.jsonl", generate_corpus(cfg));
  cfg.strategy = Strategy::DFS;
  write_corpus("w1_dfs_test.jsonl", generate_corpus(cfg));

  SECTION("deterministic and ordered") {
    const W1Report r1 = pipeline_w1("w1_bfs_test.jsonl", "w1_dfs_test.jsonl",
                                    20, 80, 3, 42);
    const W1Report r2 = pipeline_w1("w1_bfs_test.jsonl", "w1_dfs_test.jsonl",
                                    20, 80, 3, 42);
    REQUIRE(r1.values == r2.values);
    REQUIRE(r1.values.size() == 3);
    REQUIRE(r1.mean > 0.0);

    const W1Report self = pipeline_w1("w1_bfs_test.jsonl", "w1_bfs_test.jsonl",
                                      20, 80, 3, 42);
    REQUIRE(self.mean < r1.mean);  // in-distribution sits below cross-distribution
  }

  SECTION("pool larger than the corpus is clamped with a warning") {
    const W1Report r = pipeline_w1("w1_bfs_test.jsonl", "w1_dfs_test.jsonl",
                                   20, 500, 2, 7);
    REQUIRE(r.warnings.size() == 2);
  }

  SECTION("precondition violations raise domain errors") {
    REQUIRE_THROWS_AS(
        pipeline_w1("w1_bfs_test.jsonl", "w1_dfs_test.jsonl", 90, 80, 2, 7),
        DomainError);
    REQUIRE_THROWS_AS(
        pipeline_w1("w1_bfs_test.jsonl", "w1_bfs_test.jsonl", 50, 80, 2, 7),
        DomainError);  // disjoint halves need 2n <= pool
  }

  std::remove("w1_bfs_test.jsonl");
  std::remove("w1_dfs_test.jsonl");
}
