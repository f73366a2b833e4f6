#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "trajlab/kernel.hpp"
#include "trajlab/projection.hpp"
#include "trajlab/random.hpp"
#include "trajlab/trajectory.hpp"

using namespace trajlab;

namespace {

KernelConfig config(Encoding enc, int dim = 16, std::uint64_t seed = 7,
                    int max_position = 512) {
  KernelConfig cfg;
  cfg.encoding = enc;
  cfg.head_dim = dim;
  cfg.max_position = max_position;
  cfg.seed = seed;
  return cfg;
}

std::vector<double> random_vec(Rng& rng, int d) {
  std::vector<double> v(static_cast<std::size_t>(d));
  for (auto& x : v) x = rng.normal();
  return v;
}

double plain_bilinear(const KernelState& st, int d, const std::vector<double>& xa,
                      const std::vector<double>& xb) {
  return detail::dot(detail::matvec(st.wq, d, xa), detail::matvec(st.wk, d, xb));
}

// R^t as an explicit matrix, assembled column by column from basis rotations.
std::vector<double> rotation_matrix(const KernelConfig& cfg, double t) {
  const int d = cfg.head_dim;
  std::vector<double> m(static_cast<std::size_t>(d) * d, 0.0);
  for (int c = 0; c < d; ++c) {
    std::vector<double> e(static_cast<std::size_t>(d), 0.0);
    e[static_cast<std::size_t>(c)] = 1.0;
    rotate_rope(e, t, cfg);
    for (int r = 0; r < d; ++r) m[static_cast<std::size_t>(r) * d + c] = e[r];
  }
  return m;
}

std::vector<double> matmul(const std::vector<double>& a,
                           const std::vector<double>& b, int d) {
  std::vector<double> out(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) {
      const double aik = a[static_cast<std::size_t>(i) * d + k];
      for (int j = 0; j < d; ++j)
        out[static_cast<std::size_t>(i) * d + j] +=
            aik * b[static_cast<std::size_t>(k) * d + j];
    }
  return out;
}

std::vector<double> transpose(const std::vector<double>& a, int d) {
  std::vector<double> out(a.size());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      out[static_cast<std::size_t>(j) * d + i] = a[static_cast<std::size_t>(i) * d + j];
  return out;
}

}  // namespace

TEST_CASE("RoPE with i == j reduces to the plain bilinear form") {
  const auto cfg = config(Encoding::RoPE);
  const auto st = KernelState::init(cfg);
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto xa = random_vec(rng, cfg.head_dim);
    const auto xb = random_vec(rng, cfg.head_dim);
    const int i = static_cast<int>(rng.uniform_int(0, cfg.max_position - 1));
    const double rotated = attention_score(st, cfg, xa, xb, i, i);
    const double plain = plain_bilinear(st, cfg.head_dim, xa, xb);
    REQUIRE(std::abs(rotated - plain) <= 1e-10);
  }
}

TEST_CASE("APE with zero embeddings reduces to the plain bilinear form") {
  const auto cfg = config(Encoding::APE_learned);
  auto st = KernelState::init(cfg);
  std::fill(st.positions.begin(), st.positions.end(), 0.0);
  Rng rng(12);
  const auto xa = random_vec(rng, cfg.head_dim);
  const auto xb = random_vec(rng, cfg.head_dim);
  const double scored = attention_score(st, cfg, xa, xb, 3, 140);
  REQUIRE(scored == plain_bilinear(st, cfg.head_dim, xa, xb));
}

TEST_CASE("RoPE rotate-then-dot agrees with the relative-rotation form") {
  for (int dim : {16, 64}) {
    const auto cfg = config(Encoding::RoPE, dim);
    const auto st = KernelState::init(cfg);
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
      const auto xa = random_vec(rng, dim);
      const auto xb = random_vec(rng, dim);
      const int i = static_cast<int>(rng.uniform_int(0, cfg.max_position - 1));
      const int j = static_cast<int>(rng.uniform_int(0, cfg.max_position - 1));
      const double direct = attention_score(st, cfg, xa, xb, i, j);
      const double relative = attention_score_relative(st, cfg, xa, xb, i, j);
      REQUIRE(std::abs(direct - relative) <= 1e-10);
    }
  }
}

TEST_CASE("rotation matrices are orthogonal and compose by offsets") {
  const auto cfg = config(Encoding::RoPE, 8);
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const int i = static_cast<int>(rng.uniform_int(0, 300));
    const int j = static_cast<int>(rng.uniform_int(0, 300));
    const auto ri = rotation_matrix(cfg, i);
    const auto rj = rotation_matrix(cfg, j);
    const auto rel = rotation_matrix(cfg, j - i);
    const auto prod = matmul(transpose(ri, 8), rj, 8);
    for (std::size_t p = 0; p < prod.size(); ++p)
      REQUIRE(std::abs(prod[p] - rel[p]) <= 1e-12);

    const auto identity = matmul(transpose(ri, 8), ri, 8);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c)
        REQUIRE(std::abs(identity[static_cast<std::size_t>(r) * 8 + c] -
                         (r == c ? 1.0 : 0.0)) <= 1e-12);
  }
}

TEST_CASE("RoPE is shift invariant, APE is not") {
  Rng rng(15);
  const auto probe_for = [&](const KernelConfig& cfg, int k) {
    ShiftProbe p;
    p.k = k;
    p.a = static_cast<int>(rng.uniform_int(0, cfg.max_position - 1 - k));
    p.b = static_cast<int>(rng.uniform_int(0, cfg.max_position - 1 - k));
    p.xa = random_vec(rng, cfg.head_dim);
    p.xb = random_vec(rng, cfg.head_dim);
    return p;
  };

  SECTION("rope deltas vanish to float accuracy") {
    const auto cfg = config(Encoding::RoPE, 32);
    const auto st = KernelState::init(cfg);
    for (int k : {1, 7, 64})
      for (int trial = 0; trial < 200; ++trial)
        REQUIRE(delta_a(st, cfg, probe_for(cfg, k)) <= 1e-9);
  }

  SECTION("learned APE deltas are bounded away from zero") {
    const auto cfg = config(Encoding::APE_learned, 32);
    const auto st = KernelState::init(cfg);
    for (int k : {1, 7, 64})
      for (int trial = 0; trial < 200; ++trial)
        REQUIRE(delta_a(st, cfg, probe_for(cfg, k)) > 1e-6);
  }

  SECTION("sinusoidal APE deltas are positive too") {
    const auto cfg = config(Encoding::APE_sinusoidal, 32);
    const auto st = KernelState::init(cfg);
    for (int k : {1, 7, 64})
      for (int trial = 0; trial < 200; ++trial)
        REQUIRE(delta_a(st, cfg, probe_for(cfg, k)) > 1e-6);
  }
}

TEST_CASE("periodic embeddings realize the measure-zero cancellation") {
  const auto cfg = config(Encoding::APE_learned, 16);
  auto st = KernelState::init(cfg);
  const int d = cfg.head_dim, a = 10, b = 25, k = 100;
  // force p_{a+k} = p_a and p_{b+k} = p_b
  for (int c = 0; c < d; ++c) {
    st.positions[static_cast<std::size_t>(a + k) * d + c] =
        st.positions[static_cast<std::size_t>(a) * d + c];
    st.positions[static_cast<std::size_t>(b + k) * d + c] =
        st.positions[static_cast<std::size_t>(b) * d + c];
  }
  Rng rng(16);
  ShiftProbe probe{random_vec(rng, d), random_vec(rng, d), a, b, k};
  REQUIRE(delta_a(st, cfg, probe) == 0.0);
}

TEST_CASE("zero query-key product kills APE sensitivity") {
  const auto cfg = config(Encoding::APE_learned, 16);
  auto st = KernelState::init(cfg);
  std::fill(st.wq.begin(), st.wq.end(), 0.0);
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    ShiftProbe probe{random_vec(rng, 16), random_vec(rng, 16),
                     static_cast<int>(rng.uniform_int(0, 300)),
                     static_cast<int>(rng.uniform_int(0, 300)), 50};
    REQUIRE(delta_a(st, cfg, probe) == 0.0);
  }
}

TEST_CASE("out-of-range indices raise errors") {
  const auto cfg = config(Encoding::RoPE, 8, 3, 32);
  const auto st = KernelState::init(cfg);
  Rng rng(18);
  const auto x = random_vec(rng, 8);
  REQUIRE_THROWS_AS(attention_score(st, cfg, x, x, 0, 32), DomainError);
  REQUIRE_THROWS_AS(attention_score(st, cfg, x, x, -1, 0), DomainError);
}

TEST_CASE("shift_sweep reports per-k statistics") {
  SECTION("rope rows are flat zero at the positivity threshold") {
    const auto cfg = config(Encoding::RoPE, 16);
    const auto st = KernelState::init(cfg);
    const auto report = shift_sweep(st, cfg, 200, {1, 4, 16}, 5);
    REQUIRE(report.rows.size() == 3);
    for (const SweepRow& row : report.rows) {
      REQUIRE(row.probes_used > 0);
      REQUIRE(row.frac_positive == 0.0);
      REQUIRE(row.mean_da <= 1e-9);
      REQUIRE(row.max_da <= 1e-9);
    }
  }
  SECTION("ape rows are fully positive") {
    const auto cfg = config(Encoding::APE_learned, 16);
    const auto st = KernelState::init(cfg);
    const auto report = shift_sweep(st, cfg, 200, {1, 4, 16}, 5);
    for (const SweepRow& row : report.rows) {
      REQUIRE(row.frac_positive == 1.0);
      REQUIRE(row.max_da > 1e-6);
    }
    REQUIRE(report.lipschitz_proxy > 1e-6);
  }
  SECTION("shifts beyond the position table are skipped and counted") {
    const auto cfg = config(Encoding::RoPE, 8, 3, 32);
    const auto st = KernelState::init(cfg);
    const auto report = shift_sweep(st, cfg, 50, {40}, 5);
    REQUIRE(report.rows[0].probes_used == 0);
    REQUIRE(report.rows[0].skipped == 50);
  }
}

TEST_CASE("translate_trajectory inserts a structurally inert node") {
  GenerationConfig gc;
  gc.strategy = Strategy::DFS;
  gc.corpus_size = 100;
  gc.seed = 77;
  gc.max_tokens = 700;
  const auto corpus = generate_corpus(gc);

  for (const Trajectory& t : corpus) {
    const std::size_t pos = std::min<std::size_t>(2, t.nodes.size());
    const Trajectory shifted = translate_trajectory(t, 8, pos, 1024);
    const StructuralVector before = project(t);
    const StructuralVector after = project(shifted);

    REQUIRE(after[3] - before[3] == 1.0);             // chi4 + 1
    REQUIRE(after[0] == before[0]);                   // chi1 unchanged
    REQUIRE(after[7] == before[7]);                   // prune count
    REQUIRE(after[9] == before[9]);                   // goal indicator
    REQUIRE(after[10] == before[10]);                 // multiplicative bias
    REQUIRE(after[11] == before[11]);                 // additive bias
    REQUIRE(shifted.tokens.size() == t.tokens.size() + 8);

    const double delta = structural_distance(before, after);
    REQUIRE(delta >= 1.0);
    REQUIRE(delta <= 1.0 + 8.0 / static_cast<double>(t.nodes.size()));

    // parseable and dyck-invariant
    REQUIRE(same_text_content(parse_trajectory(serialize(shifted)), shifted));
  }
}

TEST_CASE("translate_trajectory appends at the end without shifting prefixes") {
  GenerationConfig gc;
  gc.strategy = Strategy::BFS;
  gc.corpus_size = 1;
  gc.seed = 3;
  gc.max_tokens = 600;
  const Trajectory t = generate_one(gc, 0);
  const Trajectory shifted = translate_trajectory(t, 10, t.nodes.size(), 1024);
  for (std::size_t i = 0; i < t.tokens.size(); ++i)
    REQUIRE(shifted.tokens[i] == t.tokens[i]);
  REQUIRE(shifted.tokens.size() == t.tokens.size() + 10);
}

TEST_CASE("translate_trajectory validates its inputs") {
  GenerationConfig gc;
  gc.corpus_size = 1;
  gc.seed = 8;
  const Trajectory t = generate_one(gc, 0);
  REQUIRE_THROWS_AS(translate_trajectory(t, 5, 1), DomainError);   // too few tokens
  REQUIRE_THROWS_AS(translate_trajectory(t, 8, 0), DomainError);   // before the root
  REQUIRE_THROWS_AS(translate_trajectory(t, 8, t.nodes.size() + 1), DomainError);
  REQUIRE_THROWS_AS(
      translate_trajectory(t, 8, 1, static_cast<int>(t.tokens.size()) + 4),
      DomainError);  // budget overflow
}
