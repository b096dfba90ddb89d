#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "grtfloc/plucker.hpp"
#include "grtfloc/rng.hpp"

using namespace grtfloc;
using namespace grtfloc::plucker;
using grtfloc::spectral::MultiFrameBlock;

namespace {

MultiFrameBlock make_block(size_t rows, size_t cols, std::vector<cplx> vals) {
  MultiFrameBlock b;
  b.rows = rows;
  b.cols = cols;
  b.entries = std::move(vals);
  return b;
}

MultiFrameBlock random_block(size_t rows, size_t cols, Rng& rng) {
  MultiFrameBlock b;
  b.rows = rows;
  b.cols = cols;
  b.entries.resize(rows * cols);
  for (cplx& v : b.entries) v = rng.normal_complex();
  return b;
}

// matrix product C = A * B with A rows x inner, B inner x cols (row-major)
MultiFrameBlock matmul(const MultiFrameBlock& a, const MultiFrameBlock& b) {
  MultiFrameBlock c;
  c.rows = a.rows;
  c.cols = b.cols;
  c.entries.assign(a.rows * b.cols, cplx(0.0, 0.0));
  for (size_t i = 0; i < a.rows; ++i)
    for (size_t k = 0; k < a.cols; ++k)
      for (size_t j = 0; j < b.cols; ++j) c.at(i, j) += a.at(i, k) * b.at(k, j);
  return c;
}

// independent oracle: determinant by recursive first-row cofactor expansion
cplx det_cofactor(const std::vector<cplx>& a, size_t n) {
  if (n == 1) return a[0];
  cplx acc(0.0, 0.0);
  double sign = 1.0;
  for (size_t c = 0; c < n; ++c) {
    std::vector<cplx> sub;
    sub.reserve((n - 1) * (n - 1));
    for (size_t i = 1; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        if (j != c) sub.push_back(a[i * n + j]);
    acc += sign * a[c] * det_cofactor(sub, n - 1);
    sign = -sign;
  }
  return acc;
}

double max_rel_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double scale = 0.0;
  for (const cplx& v : a) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return scale == 0.0 ? worst : worst / scale;
}

}  // namespace

TEST_CASE("combinations enumerates lexicographic subsets") {
  CombinationIndex idx = combinations(4, 2);
  CHECK(idx.count() == 6);
  const std::vector<std::vector<uint32_t>> expected = {{0, 1}, {0, 2}, {0, 3},
                                                       {1, 2}, {1, 3}, {2, 3}};
  for (size_t l = 0; l < 6; ++l)
    for (size_t j = 0; j < 2; ++j) CHECK(idx.tuple(l)[j] == expected[l][j]);

  CombinationIndex full = combinations(3, 3);
  CHECK(full.count() == 1);
  CHECK(full.tuple(0)[2] == 2);

  CombinationIndex singles = combinations(5, 1);
  CHECK(singles.count() == 5);
  for (uint32_t m = 0; m < 5; ++m) CHECK(singles.tuple(m)[0] == m);

  CHECK_THROWS_AS(combinations(4, 0), std::invalid_argument);
  CHECK_THROWS_AS(combinations(4, 5), std::invalid_argument);

  // count matches the binomial for a spread of shapes
  for (size_t m = 1; m <= 8; ++m)
    for (size_t k = 1; k <= m; ++k) CHECK(combinations(m, k).count() == binomial(m, k));
}

TEST_CASE("det_small closed forms") {
  CHECK(det_small(std::vector<cplx>{cplx(1, 0)}, 1) == cplx(1, 0));
  CHECK(det_small(std::vector<cplx>{cplx(0, 0), cplx(1, 0), cplx(1, 0), cplx(0, 0)}, 2) ==
        cplx(-1, 0));
  CHECK_THROWS_AS(det_small(std::vector<cplx>(6, cplx(0, 0)), 2), std::invalid_argument);
  CHECK_THROWS_AS(det_small(std::vector<cplx>{}, 0), std::invalid_argument);
}

TEST_CASE("det multiplicativity on random 3x3 pairs") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    MultiFrameBlock a = random_block(3, 3, rng);
    MultiFrameBlock b = random_block(3, 3, rng);
    MultiFrameBlock ab = matmul(a, b);
    const cplx lhs = det_small(ab.entries, 3);
    const cplx rhs = det_small(a.entries, 3) * det_small(b.entries, 3);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("pivoted elimination agrees with cofactor expansion up to 6x6") {
  Rng rng(202);
  for (size_t n = 4; n <= 6; ++n) {
    for (int trial = 0; trial < 50; ++trial) {
      MultiFrameBlock a = random_block(n, n, rng);
      const cplx fast = det_small(a.entries, n);
      const cplx ref = det_cofactor(a.entries, n);
      CHECK(std::abs(fast - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST_CASE("plucker transform small cases") {
  SUBCASE("K=1 copies the observation vector bitwise") {
    MultiFrameBlock x = make_block(3, 1, {cplx(2, 1), cplx(3, 0), cplx(0, 0)});
    PluckerVector p = plucker_transform(x, combinations(3, 1));
    REQUIRE(p.coords.size() == 3);
    CHECK(p.coords[0] == cplx(2, 1));
    CHECK(p.coords[1] == cplx(3, 0));
    CHECK(p.coords[2] == cplx(0, 0));
  }
  SUBCASE("K=M=2 identity gives det/2!") {
    MultiFrameBlock x = make_block(2, 2, {cplx(1, 0), cplx(0, 0), cplx(0, 0), cplx(1, 0)});
    PluckerVector p = plucker_transform(x, combinations(2, 2));
    REQUIRE(p.coords.size() == 1);
    CHECK(p.coords[0] == cplx(0.5, 0.0));
  }
  SUBCASE("M=3 K=2 minors by hand") {
    MultiFrameBlock x = make_block(
        3, 2, {cplx(1, 0), cplx(0, 0), cplx(0, 0), cplx(1, 0), cplx(1, 0), cplx(1, 0)});
    PluckerVector p = plucker_transform(x, combinations(3, 2));
    REQUIRE(p.coords.size() == 3);
    CHECK(p.coords[0] == cplx(0.5, 0.0));
    CHECK(p.coords[1] == cplx(0.5, 0.0));
    CHECK(p.coords[2] == cplx(-0.5, 0.0));
  }
  SUBCASE("dimension mismatch") {
    MultiFrameBlock x = make_block(3, 2, std::vector<cplx>(6, cplx(0, 0)));
    CHECK_THROWS_AS(plucker_transform(x, combinations(4, 2)), std::invalid_argument);
  }
}

TEST_CASE("transform of a product equals transform times determinant") {
  Rng rng(303);
  for (size_t m = 2; m <= 6; ++m) {
    for (size_t k = 1; k < m; ++k) {
      const CombinationIndex idx = combinations(m, k);
      for (int trial = 0; trial < 100; ++trial) {
        MultiFrameBlock a = random_block(m, k, rng);
        MultiFrameBlock s = random_block(k, k, rng);
        PluckerVector lhs = plucker_transform(matmul(a, s), idx);
        PluckerVector rhs = plucker_transform(a, idx);
        const cplx ds = det_small(s.entries, k);
        for (cplx& v : rhs.coords) v *= ds;
        CHECK(max_rel_diff(lhs.coords, rhs.coords) <= 1e-10);
      }
    }
  }
}

TEST_CASE("swapping two columns negates every coordinate") {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    MultiFrameBlock a = random_block(5, 3, rng);
    MultiFrameBlock b = a;
    for (size_t i = 0; i < 5; ++i) std::swap(b.at(i, 0), b.at(i, 2));
    const CombinationIndex idx = combinations(5, 3);
    PluckerVector pa = plucker_transform(a, idx);
    PluckerVector pb = plucker_transform(b, idx);
    for (cplx& v : pb.coords) v = -v;
    CHECK(max_rel_diff(pa.coords, pb.coords) <= 1e-12);
  }
}

TEST_CASE("grassmann consistency of 2-plane coordinates in 4 channels") {
  // p1*p6 - p2*p5 + p3*p4 == 0 for coordinates of a genuine matrix
  Rng rng(505);
  const CombinationIndex idx = combinations(4, 2);
  for (int trial = 0; trial < 200; ++trial) {
    MultiFrameBlock x = random_block(4, 2, rng);
    const auto& p = plucker_transform(x, idx).coords;
    const cplx residue = p[0] * p[5] - p[1] * p[4] + p[2] * p[3];
    double scale = 0.0;
    for (const cplx& v : p) scale = std::max(scale, std::norm(v));
    CHECK(std::abs(residue) <= 1e-10 * std::max(1.0, scale));
  }
}

TEST_CASE("normalize strategies") {
  SUBCASE("first entry") {
    PluckerVector p{{cplx(2, 0), cplx(4, 0), cplx(6, 0)}, 3, 1};
    Grtf g = normalize(p, Normalization::FirstEntry, 1e-6);
    CHECK(g.valid);
    CHECK(g.anchor_index == 0);
    CHECK(g.values[0] == cplx(1, 0));
    CHECK(g.values[1] == cplx(2, 0));
    CHECK(g.values[2] == cplx(3, 0));
  }
  SUBCASE("anchor below tolerance is invalid") {
    PluckerVector p{{cplx(0, 0), cplx(1, 0), cplx(1, 0)}, 3, 1};
    Grtf g = normalize(p, Normalization::FirstEntry, 1e-6);
    CHECK_FALSE(g.valid);
  }
  SUBCASE("all-zero vector is invalid under both strategies") {
    PluckerVector p{{cplx(0, 0), cplx(0, 0)}, 2, 1};
    CHECK_FALSE(normalize(p, Normalization::FirstEntry, 1e-6).valid);
    CHECK_FALSE(normalize(p, Normalization::AnchorMax, 1e-6).valid);
  }
  SUBCASE("anchor-max picks the largest magnitude and pins it to one") {
    PluckerVector p{{cplx(1, 0), cplx(0, 5), cplx(3, 0)}, 3, 1};
    Grtf g = normalize(p, Normalization::AnchorMax, 1e-6);
    CHECK(g.valid);
    CHECK(g.anchor_index == 1);
    CHECK(g.values[1] == cplx(1, 0));
    CHECK(std::abs(g.values[0] - cplx(1, 0) / cplx(0, 5)) < 1e-15);
  }
  SUBCASE("scaling the input leaves values unchanged") {
    Rng rng(606);
    PluckerVector p;
    p.ambient = 4;
    p.order = 2;
    p.coords.resize(6);
    for (cplx& v : p.coords) v = rng.normal_complex();
    PluckerVector q = p;
    const cplx alpha(3.0, -2.0);
    for (cplx& v : q.coords) v *= alpha;
    Grtf gp = normalize(p, Normalization::FirstEntry, 1e-6);
    Grtf gq = normalize(q, Normalization::FirstEntry, 1e-6);
    CHECK(max_rel_diff(gp.values, gq.values) <= 1e-12);
  }
}

TEST_CASE("grtf core behavior") {
  SUBCASE("K=1 recovers the classical relative transfer function") {
    const cplx a1(0.7, -0.3), a2(-1.2, 0.4), s(2.0, 1.0);
    MultiFrameBlock x = make_block(2, 1, {a1 * s, a2 * s});
    Grtf g = grtf(x, combinations(2, 1), Normalization::FirstEntry, 1e-6);
    REQUIRE(g.valid);
    CHECK(g.values[0] == cplx(1, 0));
    CHECK(std::abs(g.values[1] - a2 / a1) < 1e-14);
  }
  SUBCASE("K >= M is a hard error") {
    MultiFrameBlock x = make_block(2, 2, std::vector<cplx>(4, cplx(1, 0)));
    CHECK_THROWS_AS(grtf(x, combinations(2, 2), Normalization::FirstEntry, 1e-6),
                    std::invalid_argument);
  }
  SUBCASE("right-multiplying by an invertible matrix leaves the grtf fixed") {
    Rng rng(707);
    const CombinationIndex idx = combinations(4, 2);
    for (int trial = 0; trial < 300; ++trial) {
      MultiFrameBlock a = random_block(4, 2, rng);
      MultiFrameBlock s = random_block(2, 2, rng);
      Grtf ga = grtf(a, idx, Normalization::FirstEntry, 1e-9);
      Grtf gas = grtf(matmul(a, s), idx, Normalization::FirstEntry, 1e-9);
      if (!ga.valid || !gas.valid) continue;  // near-singular anchor draw
      CHECK(max_rel_diff(ga.values, gas.values) <= 1e-9);
    }
  }
  SUBCASE("two identical columns are flagged invalid") {
    Rng rng(808);
    MultiFrameBlock a = random_block(4, 2, rng);
    for (size_t i = 0; i < 4; ++i) a.at(i, 1) = a.at(i, 0);
    Grtf g = grtf(a, combinations(4, 2), Normalization::FirstEntry, 1e-6);
    CHECK_FALSE(g.valid);
  }
  SUBCASE("column permutation leaves the first-entry grtf unchanged") {
    Rng rng(909);
    const CombinationIndex idx = combinations(4, 3);
    for (int trial = 0; trial < 100; ++trial) {
      MultiFrameBlock a = random_block(4, 3, rng);
      MultiFrameBlock b = a;
      for (size_t i = 0; i < 4; ++i) {
        std::swap(b.at(i, 0), b.at(i, 1));  // a transposition: global sign -1
      }
      Grtf ga = grtf(a, idx, Normalization::FirstEntry, 1e-9);
      Grtf gb = grtf(b, idx, Normalization::FirstEntry, 1e-9);
      if (!ga.valid || !gb.valid) continue;
      CHECK(max_rel_diff(ga.values, gb.values) <= 1e-12);
    }
  }
}

TEST_CASE("no instantaneous normalization is signal-invariant for two sources") {
  // single-frame observations A*s1 vs A*s2 almost always normalize apart,
  // while the two-frame grtf cancels the source matrix entirely
  Rng rng(111);
  const CombinationIndex idx = combinations(4, 2);
  int deviated = 0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    MultiFrameBlock a = random_block(4, 2, rng);
    MultiFrameBlock s1 = random_block(2, 1, rng);
    MultiFrameBlock s2 = random_block(2, 1, rng);
    MultiFrameBlock x1 = matmul(a, s1), x2 = matmul(a, s2);
    // instantaneous: normalize the raw observation by its first entry
    double dev = 0.0;
    for (size_t m = 0; m < 4; ++m)
      dev = std::max(dev, std::abs(x1.at(m, 0) / x1.at(0, 0) - x2.at(m, 0) / x2.at(0, 0)));
    if (dev > 1e-3) ++deviated;

    MultiFrameBlock s12 = make_block(2, 2,
                                     {s1.at(0, 0), s2.at(0, 0), s1.at(1, 0), s2.at(1, 0)});
    MultiFrameBlock s34 = random_block(2, 2, rng);
    Grtf g1 = grtf(matmul(a, s12), idx, Normalization::FirstEntry, 1e-9);
    Grtf g2 = grtf(matmul(a, s34), idx, Normalization::FirstEntry, 1e-9);
    if (g1.valid && g2.valid) CHECK(max_rel_diff(g1.values, g2.values) <= 1e-9);
  }
  CHECK(deviated >= 990);
}

TEST_CASE("singular values and numerical rank") {
  Rng rng(121);
  SUBCASE("outer product has rank one") {
    MultiFrameBlock a = random_block(4, 1, rng);
    MultiFrameBlock s = random_block(1, 3, rng);
    CHECK(numerical_rank(matmul(a, s), 1e-8) == 1);
  }
  SUBCASE("zero block has rank zero") {
    MultiFrameBlock z = make_block(4, 2, std::vector<cplx>(8, cplx(0, 0)));
    CHECK(numerical_rank(z, 1e-8) == 0);
  }
  SUBCASE("generic 4x3 product of full-rank factors has rank three") {
    MultiFrameBlock a = random_block(4, 3, rng);
    MultiFrameBlock s = random_block(3, 3, rng);
    CHECK(numerical_rank(matmul(a, s), 1e-8) == 3);
  }
  SUBCASE("singular values satisfy Frobenius and determinant identities") {
    for (int trial = 0; trial < 50; ++trial) {
      MultiFrameBlock x = random_block(4, 3, rng);
      const auto sv = singular_values(x);
      REQUIRE(sv.size() == 3);
      CHECK(sv[0] >= sv[1]);
      CHECK(sv[1] >= sv[2]);
      double frob = 0.0;
      for (const cplx& v : x.entries) frob += std::norm(v);
      double sum_sq = 0.0;
      for (double s : sv) sum_sq += s * s;
      CHECK(std::abs(frob - sum_sq) <= 1e-10 * frob);

      // product of singular values^2 equals det of the Gram matrix
      std::vector<cplx> gram(9, cplx(0, 0));
      for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 3; ++j)
          for (size_t r = 0; r < 4; ++r)
            gram[i * 3 + j] += std::conj(x.at(r, i)) * x.at(r, j);
      const double det_gram = std::abs(det_small(gram, 3));
      double prod_sq = 1.0;
      for (double s : sv) prod_sq *= s * s;
      CHECK(std::abs(det_gram - prod_sq) <= 1e-8 * std::max(1.0, det_gram));
    }
  }
  SUBCASE("wide blocks use the transposed path") {
    MultiFrameBlock x = random_block(2, 5, rng);
    const auto sv = singular_values(x);
    REQUIRE(sv.size() == 2);
    double frob = 0.0;
    for (const cplx& v : x.entries) frob += std::norm(v);
    CHECK(std::abs(sv[0] * sv[0] + sv[1] * sv[1] - frob) <= 1e-10 * frob);
  }
  SUBCASE("rank is monotone in the frame count") {
    // two sources observed through growing windows
    MultiFrameBlock a = random_block(5, 2, rng);
    size_t prev = 0;
    for (size_t k = 1; k <= 4; ++k) {
      MultiFrameBlock s = random_block(2, k, rng);
      const size_t r = numerical_rank(matmul(a, s), 1e-8);
      CHECK(r >= prev);
      CHECK(r <= 2);
      prev = r;
    }
  }
  SUBCASE("tolerance must sit in (0, 1)") {
    MultiFrameBlock x = random_block(2, 2, rng);
    CHECK_THROWS_AS(numerical_rank(x, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(numerical_rank(x, 1.0), std::invalid_argument);
  }
}

TEST_CASE("count_sources saturating rank scan") {
  using grtfloc::spectral::SpectrogramTensor;
  Rng rng(131);

  auto make_tensor = [&rng](size_t M, size_t T, size_t sources) {
    SpectrogramTensor spec;
    spec.freq_count = 6;
    spec.frame_count = T;
    spec.channel_count = M;
    spec.sample_rate = 8000;
    spec.bins.assign(6 * T * M, cplx(0, 0));
    for (size_t f = 0; f < 6; ++f) {
      std::vector<std::vector<cplx>> atf(sources, std::vector<cplx>(M));
      for (auto& a : atf)
        for (cplx& v : a) v = rng.normal_complex();
      for (size_t t = 0; t < T; ++t)
        for (size_t k = 0; k < sources; ++k) {
          const cplx s = rng.normal_complex();
          for (size_t m = 0; m < M; ++m) spec.at(f, t, m) += atf[k][m] * s;
        }
    }
    return spec;
  };

  SUBCASE("one source counts one everywhere") {
    auto spec = make_tensor(4, 8, 1);
    for (size_t f = 0; f < spec.freq_count; ++f)
      for (size_t t = 0; t + 3 < spec.frame_count; ++t)
        CHECK(count_sources(spec, f, t, 1e-8) == 1);
  }
  SUBCASE("two sources count two") {
    auto spec = make_tensor(4, 8, 2);
    for (size_t f = 0; f < spec.freq_count; ++f)
      CHECK(count_sources(spec, f, 0, 1e-8) == 2);
  }
  SUBCASE("all-zero tensor counts zero") {
    SpectrogramTensor spec;
    spec.freq_count = 2;
    spec.frame_count = 5;
    spec.channel_count = 4;
    spec.sample_rate = 8000;
    spec.bins.assign(2 * 5 * 4, cplx(0, 0));
    CHECK(count_sources(spec, 0, 0, 1e-8) == 0);
  }
  SUBCASE("saturation never reached reports M-1") {
    auto spec = make_tensor(4, 8, 5);  // more sources than M-1
    CHECK(count_sources(spec, 0, 0, 1e-8) == 3);
  }
  SUBCASE("insufficient frames rejected") {
    auto spec = make_tensor(4, 8, 1);
    CHECK_THROWS_AS(count_sources(spec, 0, 7, 1e-8), std::invalid_argument);
  }
}
