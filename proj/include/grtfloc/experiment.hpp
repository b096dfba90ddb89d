#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grtfloc/acoustics.hpp"
#include "grtfloc/localization.hpp"
#include "grtfloc/plucker.hpp"
#include "grtfloc/spectral.hpp"

namespace grtfloc::experiment {

// Batch experiment description. Defaults reproduce the simulated protocol:
// 8 kHz, 32 ms windows with 50% overlap, 4 mics, 21 random directions,
// 1..3 white-noise sources, 10/50 dB SNR, one-second mixtures.
struct ExperimentConfig {
  uint64_t seed = 1234;
  int sample_rate = 8000;
  size_t window_len = 256;
  size_t hop = 128;
  size_t fft_len = 256;
  spectral::WindowKind window = spectral::WindowKind::Hann;

  size_t mic_count = 4;
  double array_radius_m = 0.10;
  std::vector<std::array<double, 3>> mic_positions;  // overrides the default geometry
  double speed_of_sound = 343.0;

  size_t num_directions = 21;
  double azimuth_min = -180.0, azimuth_max = 180.0;
  double elevation_min = -10.0, elevation_max = 10.0;
  double min_azimuth_sep_deg = 1.0;

  std::vector<size_t> k_list = {1, 2, 3};
  std::vector<double> snr_db_list = {10.0, 50.0};

  acoustics::AtfKind atf_kind = acoustics::AtfKind::SyntheticRoom;
  double rir_len_ms = 10.0;
  double rir_decay_per_ms = 2.0;
  double reflection_gain = 0.5;

  double duration_s = 1.0;
  size_t segment_stride = 8;  // frames between query segment starts
  size_t scene_stride = 1;    // take every n-th direction subset

  plucker::Normalization normalization = plucker::Normalization::FirstEntry;

  // Segments whose anchor minor falls below this fraction of the largest
  // minor are masked instead of entering distances; far looser than the
  // library default on purpose, since convolution leakage makes poorly
  // anchored bins wildly noisy after normalization.
  double validity_rel_tol = 0.05;

  spectral::StftConfig stft_config() const {
    return {window_len, hop, window, fft_len};
  }
};

void validate(const ExperimentConfig& cfg);  // throws ConfigError

// JSON config file; unknown keys and malformed values are reported with the
// offending key or line. Missing keys keep their defaults.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& origin);
std::string config_to_json(const ExperimentConfig& cfg);

// Deterministic pieces of the pipeline, reused by the CLI subcommands.
acoustics::MicArray make_mic_array(const ExperimentConfig& cfg);
std::vector<acoustics::Direction> make_directions(const ExperimentConfig& cfg);
acoustics::AtfSet make_atf(const ExperimentConfig& cfg);
uint64_t scene_seed(const ExperimentConfig& cfg, size_t k, size_t scene_index);

// Direction-id subsets driving the scenes for one K (ascending ids,
// lexicographic order, subsampled by scene_stride).
std::vector<std::vector<int>> scene_subsets(const ExperimentConfig& cfg,
                                            const std::vector<acoustics::Direction>& dirs,
                                            size_t k);
size_t scene_count(const ExperimentConfig& cfg, size_t k);

struct CellReport {
  size_t k = 0;
  double snr_db = 0.0;
  size_t scene_count = 0;
  size_t task_count = 0;
  size_t no_decision_count = 0;
  double mean_abs_azimuth_error_deg = 0.0;
  double exact_match_rate = 0.0;
  double wall_seconds = 0.0;
  double ms_per_source_per_signal_second = 0.0;
};

struct ExperimentReport {
  std::vector<CellReport> cells;
};

struct RunOptions {
  size_t threads = 0;      // 0: hardware concurrency
  bool full_grid = false;  // stride 1 everywhere
};

// Full protocol: directions -> ATFs -> dictionaries -> simulate every scene
// -> localize every segment -> score. Writes one CSV per (K, SNR) cell plus
// summary.json and table.txt into out_dir. Output bytes depend only on the
// config (not on thread count or scheduling); timing lives in the summary,
// not the CSVs.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                const RunOptions& opts = {});

// Renders the summary of a completed run as an aligned text table.
std::string render_report(const std::string& results_dir);

struct CountHistogram {
  std::vector<size_t> histogram;  // index: estimated source count
  size_t modal = 0;
  size_t active_bins = 0;
  size_t total_bins = 0;
  double modal_fraction = 0.0;    // modal count share among active bins
};

// count_sources over all (f, t) with a full M-1 frame lookahead. Bins whose
// block is negligible against the loudest one are inactive and excluded.
CountHistogram count_sources_histogram(const spectral::SpectrogramTensor& spec,
                                       double rel_tol);

}  // namespace grtfloc::experiment
