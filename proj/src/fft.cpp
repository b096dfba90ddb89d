#include "grtfloc/fft.hpp"

#include <cmath>
#include <utility>

namespace grtfloc {

namespace {

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<cplx>& a) {
  const size_t n = a.size();
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -kTwoPi / static_cast<double>(len);
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        cplx u = a[i + j];
        cplx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

void dft_direct(std::vector<cplx>& a) {
  const size_t n = a.size();
  std::vector<cplx> out(n, cplx(0.0, 0.0));
  for (size_t k = 0; k < n; ++k) {
    for (size_t j = 0; j < n; ++j) {
      const double ang = -kTwoPi * static_cast<double>(k) * static_cast<double>(j) /
                         static_cast<double>(n);
      out[k] += a[j] * cplx(std::cos(ang), std::sin(ang));
    }
  }
  a = std::move(out);
}

}  // namespace

void fft_inplace(std::vector<cplx>& a) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size())) {
    fft_radix2(a);
  } else {
    dft_direct(a);
  }
}

}  // namespace grtfloc
