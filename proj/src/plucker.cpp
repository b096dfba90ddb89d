#include "grtfloc/plucker.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace grtfloc::plucker {

size_t binomial(size_t n, size_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  size_t r = 1;
  for (size_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;  // exact: r*(n-k+i) is divisible by i here
  }
  return r;
}

CombinationIndex combinations(size_t M, size_t K) {
  if (K == 0 || K > M)
    throw std::invalid_argument("combinations requires 1 <= K <= M");
  if (M > 64) throw std::invalid_argument("combinations: M > 64 unsupported");

  CombinationIndex idx;
  idx.ambient = M;
  idx.order = K;
  idx.rows.reserve(binomial(M, K) * K);

  std::vector<uint32_t> cur(K);
  for (size_t i = 0; i < K; ++i) cur[i] = static_cast<uint32_t>(i);
  while (true) {
    idx.rows.insert(idx.rows.end(), cur.begin(), cur.end());
    // advance to the next strictly-increasing tuple
    size_t i = K;
    while (i > 0) {
      --i;
      if (cur[i] + (K - i) < M) {
        ++cur[i];
        for (size_t j = i + 1; j < K; ++j) cur[j] = cur[j - 1] + 1;
        break;
      }
      if (i == 0) return idx;
    }
  }
}

namespace {

cplx det_pivoted(std::vector<cplx>& a, size_t n) {
  double sign = 1.0;
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    double best = std::abs(a[col * n + col]);
    for (size_t r = col + 1; r < n; ++r) {
      const double mag = std::abs(a[r * n + col]);
      if (mag > best) {
        best = mag;
        piv = r;
      }
    }
    if (best == 0.0) return cplx(0.0, 0.0);
    if (piv != col) {
      for (size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
      sign = -sign;
    }
    const cplx d = a[col * n + col];
    for (size_t r = col + 1; r < n; ++r) {
      const cplx factor = a[r * n + col] / d;
      a[r * n + col] = cplx(0.0, 0.0);
      for (size_t c = col + 1; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
    }
  }
  cplx det(sign, 0.0);
  for (size_t i = 0; i < n; ++i) det *= a[i * n + i];
  return det;
}

}  // namespace

cplx det_small(std::span<const cplx> a, size_t n) {
  if (n == 0 || n > 8) throw std::invalid_argument("det_small supports 1 <= n <= 8");
  if (a.size() != n * n) throw std::invalid_argument("det_small: non-square input");
  switch (n) {
    case 1:
      return a[0];
    case 2:
      return a[0] * a[3] - a[1] * a[2];
    case 3:
      return a[0] * (a[4] * a[8] - a[5] * a[7]) -
             a[1] * (a[3] * a[8] - a[5] * a[6]) +
             a[2] * (a[3] * a[7] - a[4] * a[6]);
    default: {
      std::vector<cplx> work(a.begin(), a.end());
      return det_pivoted(work, n);
    }
  }
}

PluckerVector plucker_transform(const spectral::MultiFrameBlock& block,
                                const CombinationIndex& idx) {
  if (idx.ambient != block.rows || idx.order != block.cols)
    throw std::invalid_argument("plucker_transform: index/block dimension mismatch");

  const size_t K = idx.order;
  const size_t L = idx.count();
  double kfact = 1.0;
  for (size_t i = 2; i <= K; ++i) kfact *= static_cast<double>(i);
  const double scale = 1.0 / kfact;

  PluckerVector p;
  p.ambient = idx.ambient;
  p.order = K;
  p.coords.resize(L);

  std::array<cplx, 64> minor;  // K <= 8
  for (size_t l = 0; l < L; ++l) {
    const uint32_t* rows = idx.tuple(l);
    for (size_t i = 0; i < K; ++i)
      for (size_t j = 0; j < K; ++j) minor[i * K + j] = block.at(rows[i], j);
    p.coords[l] = det_small(std::span<const cplx>(minor.data(), K * K), K) * scale;
  }
  return p;
}

Grtf normalize(const PluckerVector& p, Normalization strategy, double rel_tol) {
  if (p.coords.empty()) throw std::invalid_argument("normalize: empty vector");

  Grtf g;
  g.ambient = p.ambient;
  g.order = p.order;

  double max_mag = 0.0;
  size_t max_idx = 0;
  for (size_t l = 0; l < p.coords.size(); ++l) {
    const double mag = std::abs(p.coords[l]);
    if (mag > max_mag) {
      max_mag = mag;
      max_idx = l;
    }
  }

  const size_t anchor = strategy == Normalization::FirstEntry ? 0 : max_idx;
  g.anchor_index = anchor;

  if (max_mag == 0.0 || std::abs(p.coords[anchor]) < rel_tol * max_mag) {
    g.valid = false;
    g.values = p.coords;  // raw coordinates, for diagnostics
    return g;
  }

  g.valid = true;
  g.values.resize(p.coords.size());
  const cplx d = p.coords[anchor];
  for (size_t l = 0; l < p.coords.size(); ++l) g.values[l] = p.coords[l] / d;
  g.values[anchor] = cplx(1.0, 0.0);
  return g;
}

Grtf grtf(const spectral::MultiFrameBlock& block, const CombinationIndex& idx,
          Normalization strategy, double rel_tol) {
  if (block.cols >= block.rows)
    throw std::invalid_argument("grtf requires K < M");

  PluckerVector p = plucker_transform(block, idx);
  Grtf g = normalize(p, strategy, rel_tol);
  if (!g.valid) return g;

  // Hadamard bound on any K x K minor: product of column norms. Minors that
  // are all negligible against it mean the block is numerically rank
  // deficient, even though the anchor-relative rule alone cannot see it.
  double bound = 1.0;
  for (size_t j = 0; j < block.cols; ++j) {
    double s = 0.0;
    for (size_t i = 0; i < block.rows; ++i) s += std::norm(block.at(i, j));
    bound *= std::sqrt(s);
  }
  double kfact = 1.0;
  for (size_t i = 2; i <= block.cols; ++i) kfact *= static_cast<double>(i);
  bound /= kfact;

  double max_mag = 0.0;
  for (const cplx& c : p.coords) max_mag = std::max(max_mag, std::abs(c));
  if (max_mag < rel_tol * bound) {
    g.valid = false;
    g.values = p.coords;
  }
  return g;
}

std::vector<double> singular_values(const spectral::MultiFrameBlock& block) {
  // One-sided Jacobi on the thinner dimension: columns of X, or columns of
  // X^H when K > M (the nonzero singular values coincide).
  const bool flip = block.cols > block.rows;
  const size_t ncols = flip ? block.rows : block.cols;
  const size_t nrows = flip ? block.cols : block.rows;

  std::vector<std::vector<cplx>> cols(ncols, std::vector<cplx>(nrows));
  for (size_t j = 0; j < ncols; ++j)
    for (size_t i = 0; i < nrows; ++i)
      cols[j][i] = flip ? std::conj(block.at(j, i)) : block.at(i, j);

  constexpr double eps = 1e-14;
  constexpr int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool converged = true;
    for (size_t i = 0; i + 1 < ncols; ++i) {
      for (size_t j = i + 1; j < ncols; ++j) {
        double alpha = 0.0, beta = 0.0;
        cplx gamma(0.0, 0.0);
        for (size_t r = 0; r < nrows; ++r) {
          alpha += std::norm(cols[i][r]);
          beta += std::norm(cols[j][r]);
          gamma += std::conj(cols[i][r]) * cols[j][r];
        }
        const double gmag = std::abs(gamma);
        if (gmag <= eps * std::sqrt(alpha * beta) || gmag == 0.0) continue;
        converged = false;

        // phase-align column j, then apply the real Jacobi rotation that
        // orthogonalizes the pair
        const cplx phase = gamma / gmag;
        const double zeta = (beta - alpha) / (2.0 * gmag);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (size_t r = 0; r < nrows; ++r) {
          const cplx v1 = cols[i][r];
          const cplx v2 = cols[j][r] * std::conj(phase);
          cols[i][r] = cs * v1 - sn * v2;
          cols[j][r] = (sn * v1 + cs * v2) * phase;
        }
      }
    }
    if (converged) break;
  }

  std::vector<double> sv(ncols);
  for (size_t j = 0; j < ncols; ++j) {
    double s = 0.0;
    for (size_t r = 0; r < nrows; ++r) s += std::norm(cols[j][r]);
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

size_t numerical_rank(const spectral::MultiFrameBlock& block, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0))
    throw std::invalid_argument("numerical_rank: rel_tol must be in (0, 1)");
  const std::vector<double> sv = singular_values(block);
  if (sv.empty() || sv[0] == 0.0) return 0;
  const double cut = rel_tol * sv[0];
  size_t rank = 0;
  for (double s : sv)
    if (s >= cut) ++rank;
  return rank;
}

size_t count_sources(const spectral::SpectrogramTensor& spec, size_t f, size_t t,
                     double rel_tol) {
  const size_t M = spec.channel_count;
  if (M < 2) throw std::invalid_argument("count_sources requires M >= 2");
  if (t + M - 1 > spec.frame_count)
    throw std::invalid_argument("count_sources: insufficient frames at t");

  for (size_t K = 1; K < M; ++K) {
    const size_t r = numerical_rank(extract_block(spec, f, t, K), rel_tol);
    if (r < K) return r;  // rank saturated below K => P = r
  }
  return M - 1;  // never saturated: report as ">= M-1"
}

}  // namespace grtfloc::plucker
