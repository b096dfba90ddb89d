#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "grtfloc/common.hpp"
#include "grtfloc/spectral.hpp"

namespace grtfloc::acoustics {

// snr_db sentinel: skip noise injection entirely (output == input bitwise).
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

struct Direction {
  double azimuth_deg = 0.0;    // wrapped into [-180, 180)
  double elevation_deg = 0.0;
  int id = 0;                  // stable, unique within a set
};

double wrap_azimuth(double deg);

// Unit vector pointing from the array origin toward the source.
std::array<double, 3> unit_vector(const Direction& d);

struct MicArray {
  std::vector<std::array<double, 3>> positions;  // meters
  double speed_of_sound = 343.0;                 // m/s
  void validate() const;  // M >= 2, pairwise distinct, c > 0
};

// Tetrahedral 4-mic array of the given circumradius (non-coplanar, so
// elevation is observable).
MicArray tetrahedral_array(double radius_m, double speed_of_sound = 343.0);

// M mics evenly spaced on a horizontal circle.
MicArray ring_array(size_t mic_count, double radius_m, double speed_of_sound = 343.0);

// N directions with uniform azimuth/elevation, rejecting draws closer than
// min_azimuth_sep_deg in circular azimuth to an already-accepted one.
std::vector<Direction> random_directions(size_t n, double azimuth_min,
                                         double azimuth_max, double elevation_min,
                                         double elevation_max,
                                         double min_azimuth_sep_deg, uint64_t seed);

enum class AtfKind { FreeField, SyntheticRoom };

// Direction-indexed transfer vectors over all retained frequency bins, plus
// the real FIRs they were derived from (needed for time-domain synthesis).
//
// Bin f maps to frequency (f+1) * sample_rate / (2 * freq_count), matching
// the spectral module's bin selection. All FIRs share a common bulk delay
// (bulk_delay_samples) that keeps fractional direct paths causal; it shows
// up as a per-bin global phase and cancels under GRTF normalization. For the
// FreeField kind the stored ATF values are the exact plane-wave phases
// (without the bulk delay); for SyntheticRoom they are the DFT of the FIRs.
struct AtfSet {
  AtfKind kind = AtfKind::FreeField;
  size_t mic_count = 0;   // M
  size_t freq_count = 0;  // F
  int sample_rate = 0;
  uint64_t seed = 0;
  double bulk_delay_samples = 0.0;
  size_t fir_len = 0;
  std::vector<Direction> directions;
  std::vector<cplx> atf;     // [direction][f][m]
  std::vector<double> firs;  // [direction][m][tap]

  size_t atf_index(size_t d, size_t f, size_t m) const {
    return (d * freq_count + f) * mic_count + m;
  }
  cplx at(size_t d, size_t f, size_t m) const { return atf[atf_index(d, f, m)]; }
  std::vector<cplx> atf_vector(size_t d, size_t f) const;
  const double* fir(size_t d, size_t m) const {
    return firs.data() + (d * mic_count + m) * fir_len;
  }
  size_t index_of(int direction_id) const;  // throws DataError on unknown id
  double bin_hz(size_t f) const;
  uint64_t fingerprint() const;
  void validate() const;
};

// Far-field plane-wave steering vectors: a_{f,m} = exp(-2*pi*i*f_hz*tau_m)
// with tau_m = -<u, p_m> / c.
AtfSet freefield_atf(const MicArray& array, const std::vector<Direction>& dirs,
                     size_t freq_count, int sample_rate);

// Seeded random FIRs: a fractional-delay direct path from the free-field
// model plus exponentially decaying random reflections, length
// rir_len_ms. decay_per_ms is the exponential rate of the reflection
// envelope; as it grows the set converges to the free-field one.
AtfSet synthetic_room_atf(const MicArray& array, const std::vector<Direction>& dirs,
                          size_t freq_count, int sample_rate, double rir_len_ms,
                          double decay_per_ms, uint64_t seed,
                          double reflection_gain = 0.25);

struct SceneConfig {
  std::vector<int> source_directions;  // ordered tuple of direction ids
  double duration_s = 1.0;
  double snr_db = kNoNoise;
  uint64_t seed = 0;
  enum class SignalKind { WhiteNoise } signal_kind = SignalKind::WhiteNoise;

  void validate(size_t mic_count) const;  // distinct ids, K < M
};

// K seeded white-noise sources convolved with their direction's FIRs, summed
// per channel, then noise-perturbed per snr_db. Each source's signal seed
// depends only on (seed, direction id), so a K-source scene equals the
// sample-wise sum of the K single-source scenes.
spectral::MultichannelSignal simulate_scene(const AtfSet& atfs, const SceneConfig& cfg);

// Adds i.i.d. Gaussian noise scaled so that total clean power over all
// channels divided by total noise power is exactly 10^(snr_db/10).
spectral::MultichannelSignal add_noise(const spectral::MultichannelSignal& signal,
                                       double snr_db, uint64_t seed);

// Exact frequency-domain realization of the mixing model: every bin is
// bins(f,t,:) = sum_k atf(dir_k, f, :) * s_k(f,t) with seeded complex white
// spectra. No window/convolution leakage, so model-level identities hold to
// round-off. Finite snr_db adds complex noise at the stated total power
// ratio.
spectral::SpectrogramTensor synthesize_tensor(const AtfSet& atfs,
                                              const SceneConfig& cfg,
                                              size_t frame_count,
                                              const spectral::StftConfig& stft_cfg);

void save_atf(const AtfSet& atfs, const std::string& path);
AtfSet load_atf(const std::string& path);

}  // namespace grtfloc::acoustics
