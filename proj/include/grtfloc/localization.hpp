#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "grtfloc/acoustics.hpp"
#include "grtfloc/common.hpp"
#include "grtfloc/plucker.hpp"
#include "grtfloc/spectral.hpp"

namespace grtfloc::localization {

struct DictionaryMeta {
  size_t mic_count = 0;   // M
  size_t order = 0;       // K
  size_t freq_count = 0;  // F
  size_t coord_count = 0; // L = C(M, K)
  plucker::Normalization strategy = plucker::Normalization::FirstEntry;
  double rel_tol = plucker::kDefaultValidityTol;
  uint64_t atf_fingerprint = 0;
};

// One dictionary row: an ordered K-tuple of direction ids (ascending) and its
// GRTFs concatenated over frequency, with per-bin validity and anchor index.
struct DictionaryEntry {
  std::vector<int> ids;
  std::vector<cplx> values;      // freq_count * coord_count
  std::vector<uint8_t> valid;    // freq_count
  std::vector<uint16_t> anchors; // freq_count
};

struct GrtfDictionary {
  DictionaryMeta meta;
  std::vector<acoustics::Direction> directions;
  std::vector<DictionaryEntry> entries;  // lexicographic by id tuple

  const DictionaryEntry* find(const std::vector<int>& ids) const;
  const acoustics::Direction& direction_by_id(int id) const;
};

// Concatenated-over-frequency GRTF of one K-frame segment.
struct GrtfQuery {
  size_t mic_count = 0;
  size_t order = 0;
  size_t freq_count = 0;
  size_t coord_count = 0;
  plucker::Normalization strategy = plucker::Normalization::FirstEntry;
  size_t start_frame = 0;
  std::vector<cplx> values;
  std::vector<uint8_t> valid;
  std::vector<uint16_t> anchors;

  size_t valid_count() const;
};

struct LocalizationResult {
  bool decided = false;  // false: zero mutually-valid bins against every entry
  std::vector<int> estimated;
  double distance = std::numeric_limits<double>::infinity();
  size_t valid_bin_count = 0;
  size_t start_frame = 0;
  size_t order = 0;
};

struct TaskScore {
  bool decided = false;
  bool exact = false;
  double azimuth_error_deg = 0.0;  // mean over the K assigned pairs
};

struct ErrorReport {
  double mean_abs_azimuth_error_deg = 0.0;  // over all assigned pairs of decided tasks
  double exact_match_rate = 0.0;            // over all tasks
  size_t task_count = 0;
  size_t decided_count = 0;
  std::vector<TaskScore> per_task;
};

// GRTFs of [a_f(θ1) ... a_f(θK)] for every ordered K-subset of the ATF set's
// directions, concatenated over frequency. Requires K < M.
GrtfDictionary build_dictionary(const acoustics::AtfSet& atfs, size_t K,
                                plucker::Normalization strategy,
                                double rel_tol = plucker::kDefaultValidityTol);

GrtfQuery query_grtf(const spectral::SpectrogramTensor& spec, size_t t, size_t K,
                     plucker::Normalization strategy,
                     double rel_tol = plucker::kDefaultValidityTol);

// Nearest entry under squared Euclidean distance over mutually-valid bins,
// rescaled by F / (mutually-valid bin count); ties break to the
// lexicographically lowest id tuple. Under AnchorMax, bins whose anchor
// indices differ between query and entry are treated as invalid.
LocalizationResult localize(const GrtfQuery& query, const GrtfDictionary& dict);

double circular_azimuth_distance_deg(double a_deg, double b_deg);

// Per task, estimates are assigned to ground-truth directions by
// minimum-total-cost matching over all K! permutations of circular azimuth
// distance. Undecided tasks count against the exact-match rate and are
// excluded from the error mean.
ErrorReport score(const std::vector<LocalizationResult>& results,
                  const std::vector<std::vector<int>>& ground_truth,
                  const std::vector<acoustics::Direction>& directions);

void save_dictionary(const GrtfDictionary& dict, const std::string& path);
GrtfDictionary load_dictionary(const std::string& path);

}  // namespace grtfloc::localization
