#pragma once

#include <cstdint>
#include <vector>

#include "grtfloc/common.hpp"

namespace grtfloc::spectral {

enum class WindowKind { Hann, Hamming, Rectangular };

// Time-domain multichannel audio. All channels must have equal length.
struct MultichannelSignal {
  std::vector<std::vector<double>> samples;  // [channel][sample]
  int sample_rate = 0;

  size_t channels() const { return samples.size(); }
  size_t length() const { return samples.empty() ? 0 : samples[0].size(); }
  void validate() const;
};

struct StftConfig {
  size_t window_len = 256;
  size_t hop = 128;
  WindowKind window = WindowKind::Hann;
  size_t fft_len = 256;

  void validate() const;  // 0 < hop <= window_len <= fft_len

  // Number of retained bins: the DC bin is dropped so an even fft_len of 2F
  // yields exactly F positive frequencies, the last one being Nyquist.
  size_t freq_count() const { return fft_len / 2; }

  // Center frequency of retained bin f (0-based); bin f maps to DFT bin f+1.
  double bin_hz(size_t f, int sample_rate) const {
    return static_cast<double>(f + 1) * static_cast<double>(sample_rate) /
           static_cast<double>(fft_len);
  }
};

// Complex STFT coefficients indexed (frequency, frame, channel).
struct SpectrogramTensor {
  size_t freq_count = 0;     // F
  size_t frame_count = 0;    // T
  size_t channel_count = 0;  // M
  int sample_rate = 0;
  StftConfig config;
  std::vector<cplx> bins;  // (f, t, m) row-major

  size_t index(size_t f, size_t t, size_t m) const {
    return (f * frame_count + t) * channel_count + m;
  }
  cplx at(size_t f, size_t t, size_t m) const { return bins[index(f, t, m)]; }
  cplx& at(size_t f, size_t t, size_t m) { return bins[index(f, t, m)]; }
};

// M x K complex matrix whose column j is the observation vector at frame t+j
// of one frequency bin.
struct MultiFrameBlock {
  size_t rows = 0;  // M
  size_t cols = 0;  // K
  size_t f = 0;     // frequency index
  size_t t = 0;     // starting frame
  std::vector<cplx> entries;  // row-major rows x cols

  cplx at(size_t i, size_t j) const { return entries[i * cols + j]; }
  cplx& at(size_t i, size_t j) { return entries[i * cols + j]; }
};

std::vector<double> make_window(WindowKind kind, size_t len);

// Short-time Fourier transform. T = floor((len - window_len) / hop) + 1
// frames; trailing samples that do not fill a window are discarded. Only the
// freq_count() positive-frequency bins are retained.
SpectrogramTensor stft(const MultichannelSignal& signal, const StftConfig& config);

// The M x K block [x_{f,t}, ..., x_{f,t+K-1}].
MultiFrameBlock extract_block(const SpectrogramTensor& spec, size_t f, size_t t,
                              size_t K);

// All valid blocks of order K, f outer / t inner, t advancing by stride.
std::vector<MultiFrameBlock> iter_blocks(const SpectrogramTensor& spec, size_t K,
                                         size_t stride);

}  // namespace grtfloc::spectral
