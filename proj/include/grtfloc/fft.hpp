#pragma once

#include <vector>

#include "grtfloc/common.hpp"

namespace grtfloc {

// In-place forward DFT (engineering sign convention, no 1/N scaling).
// Radix-2 iterative Cooley-Tukey for power-of-two lengths, direct O(n^2)
// evaluation otherwise.
void fft_inplace(std::vector<cplx>& a);

}  // namespace grtfloc
