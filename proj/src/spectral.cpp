#include "grtfloc/spectral.hpp"

#include <cmath>
#include <stdexcept>

#include "grtfloc/fft.hpp"

namespace grtfloc::spectral {

void MultichannelSignal::validate() const {
  if (samples.empty()) throw std::invalid_argument("signal has no channels");
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
  const size_t len = samples[0].size();
  for (const auto& ch : samples) {
    if (ch.size() != len)
      throw std::invalid_argument("inconsistent channel lengths");
  }
}

void StftConfig::validate() const {
  if (hop == 0 || hop > window_len || window_len > fft_len)
    throw std::invalid_argument("stft config requires 0 < hop <= window_len <= fft_len");
}

std::vector<double> make_window(WindowKind kind, size_t len) {
  std::vector<double> w(len, 1.0);
  switch (kind) {
    case WindowKind::Rectangular:
      break;
    case WindowKind::Hann:
      // periodic form, suited to 50% overlap
      for (size_t n = 0; n < len; ++n)
        w[n] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(n) /
                                    static_cast<double>(len));
      break;
    case WindowKind::Hamming:
      for (size_t n = 0; n < len; ++n)
        w[n] = 0.54 - 0.46 * std::cos(kTwoPi * static_cast<double>(n) /
                                      static_cast<double>(len));
      break;
  }
  return w;
}

SpectrogramTensor stft(const MultichannelSignal& signal, const StftConfig& config) {
  signal.validate();
  config.validate();
  if (signal.length() < config.window_len)
    throw std::invalid_argument("signal shorter than one analysis window");

  const size_t F = config.freq_count();
  const size_t T = (signal.length() - config.window_len) / config.hop + 1;
  const size_t M = signal.channels();

  SpectrogramTensor spec;
  spec.freq_count = F;
  spec.frame_count = T;
  spec.channel_count = M;
  spec.sample_rate = signal.sample_rate;
  spec.config = config;
  spec.bins.assign(F * T * M, cplx(0.0, 0.0));

  const std::vector<double> window = make_window(config.window, config.window_len);
  std::vector<cplx> buf(config.fft_len);

  for (size_t m = 0; m < M; ++m) {
    const std::vector<double>& x = signal.samples[m];
    for (size_t t = 0; t < T; ++t) {
      const size_t off = t * config.hop;
      for (size_t n = 0; n < config.window_len; ++n)
        buf[n] = cplx(window[n] * x[off + n], 0.0);
      for (size_t n = config.window_len; n < config.fft_len; ++n)
        buf[n] = cplx(0.0, 0.0);
      fft_inplace(buf);
      for (size_t f = 0; f < F; ++f) spec.at(f, t, m) = buf[f + 1];
    }
  }
  return spec;
}

MultiFrameBlock extract_block(const SpectrogramTensor& spec, size_t f, size_t t,
                              size_t K) {
  if (K == 0) throw std::invalid_argument("block order K must be >= 1");
  if (f >= spec.freq_count) throw std::invalid_argument("frequency index out of range");
  if (t >= spec.frame_count || K > spec.frame_count - t)
    throw std::invalid_argument("frame range [t, t+K) out of range");

  MultiFrameBlock block;
  block.rows = spec.channel_count;
  block.cols = K;
  block.f = f;
  block.t = t;
  block.entries.resize(block.rows * block.cols);
  for (size_t m = 0; m < block.rows; ++m)
    for (size_t j = 0; j < K; ++j) block.at(m, j) = spec.at(f, t + j, m);
  return block;
}

std::vector<MultiFrameBlock> iter_blocks(const SpectrogramTensor& spec, size_t K,
                                         size_t stride) {
  if (stride == 0) throw std::invalid_argument("stride must be >= 1");
  if (K == 0 || K > spec.frame_count)
    throw std::invalid_argument("block order K must be in [1, T]");

  std::vector<MultiFrameBlock> blocks;
  const size_t starts = (spec.frame_count - K) / stride + 1;
  blocks.reserve(spec.freq_count * starts);
  for (size_t f = 0; f < spec.freq_count; ++f)
    for (size_t t = 0; t + K <= spec.frame_count; t += stride)
      blocks.push_back(extract_block(spec, f, t, K));
  return blocks;
}

}  // namespace grtfloc::spectral
