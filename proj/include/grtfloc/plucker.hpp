#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "grtfloc/common.hpp"
#include "grtfloc/spectral.hpp"

namespace grtfloc::plucker {

// Anchor entry falls below rel_tol times the largest coordinate magnitude
// (or the whole vector is degenerate) => the bin is flagged invalid.
inline constexpr double kDefaultValidityTol = 1e-6;

// Singular values below rel_tol * sigma_max do not count toward the rank.
// Suited to exact synthetic data; raise it for noisy or convolved signals.
inline constexpr double kDefaultRankTol = 1e-8;

// Lexicographically-ordered size-K subsets of {0, ..., M-1}. Computed once
// per (M, K) and shared across all time-frequency work items.
struct CombinationIndex {
  size_t ambient = 0;  // M
  size_t order = 0;    // K
  std::vector<uint32_t> rows;  // L tuples of K row indices, flattened

  size_t count() const { return order == 0 ? 0 : rows.size() / order; }
  const uint32_t* tuple(size_t l) const { return rows.data() + l * order; }
};

// All C(M, K) strictly-increasing K-tuples in lexicographic order.
CombinationIndex combinations(size_t M, size_t K);

size_t binomial(size_t n, size_t k);

// Determinant of a row-major n x n complex matrix. Closed-form cofactor
// expansion for n <= 3, partially-pivoted elimination for 4 <= n <= 8.
cplx det_small(std::span<const cplx> a, size_t n);

// The vector of all K x K row-subset minors of an M x K block, scaled by
// 1/K!, over the lexicographic subset order.
struct PluckerVector {
  std::vector<cplx> coords;  // length L = C(M, K)
  size_t ambient = 0;
  size_t order = 0;
};

PluckerVector plucker_transform(const spectral::MultiFrameBlock& block,
                                const CombinationIndex& idx);

enum class Normalization {
  FirstEntry,  // divide by the first coordinate
  AnchorMax,   // divide by the largest-magnitude coordinate
};

// Normalized transform with the anchor entry pinned to exactly 1. Invalidity
// is a value, not an error: degenerate bins carry valid == false and the raw
// coordinates.
struct Grtf {
  std::vector<cplx> values;
  size_t anchor_index = 0;
  bool valid = false;
  size_t ambient = 0;
  size_t order = 0;
};

Grtf normalize(const PluckerVector& p, Normalization strategy, double rel_tol);

// GRTF of one multi-frame block: normalize(plucker_transform(block)).
// Requires K < M. On top of the anchor rule, a block whose minors are all
// negligible against the Hadamard column-norm bound is flagged invalid; this
// catches rank-deficient blocks (silent or correlated sources, collinear
// transfer functions) whose minors are pure floating-point residue.
Grtf grtf(const spectral::MultiFrameBlock& block, const CombinationIndex& idx,
          Normalization strategy, double rel_tol = kDefaultValidityTol);

// Singular values of the block, descending (one-sided Jacobi).
std::vector<double> singular_values(const spectral::MultiFrameBlock& block);

// Count of singular values >= rel_tol * sigma_max (0 for a zero block).
size_t numerical_rank(const spectral::MultiFrameBlock& block, double rel_tol);

// Smallest P with rank(X_{f,t,P+1}) == P, probed for P+1 = 1..M-1; returns
// M-1 if the rank never saturates (report as ">= M-1").
size_t count_sources(const spectral::SpectrogramTensor& spec, size_t f, size_t t,
                     double rel_tol = kDefaultRankTol);

}  // namespace grtfloc::plucker
