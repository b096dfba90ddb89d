#pragma once

#include <string>

#include "grtfloc/spectral.hpp"

namespace grtfloc::audio {

// RIFF/WAVE. bits_per_sample: 16 (PCM) or 32 (IEEE float).
void write_wav(const std::string& path, const spectral::MultichannelSignal& signal,
               int bits_per_sample = 32);
spectral::MultichannelSignal read_wav(const std::string& path);

// Interleaved float64 little-endian samples plus a "<path>.json" sidecar
// holding {"channels": M, "sample_rate": fs}.
void write_raw_f64(const std::string& path, const spectral::MultichannelSignal& signal);
spectral::MultichannelSignal read_raw_f64(const std::string& path);

// Dispatch on extension: .wav -> WAV, anything else -> raw float64.
spectral::MultichannelSignal read_audio(const std::string& path);

}  // namespace grtfloc::audio
