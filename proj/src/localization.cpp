#include "grtfloc/localization.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace grtfloc::localization {

const DictionaryEntry* GrtfDictionary::find(const std::vector<int>& ids) const {
  for (const auto& e : entries)
    if (e.ids == ids) return &e;
  return nullptr;
}

const acoustics::Direction& GrtfDictionary::direction_by_id(int id) const {
  for (const auto& d : directions)
    if (d.id == id) return d;
  throw DataError("dictionary has no direction with id " + std::to_string(id));
}

size_t GrtfQuery::valid_count() const {
  size_t n = 0;
  for (uint8_t v : valid) n += v != 0;
  return n;
}

GrtfDictionary build_dictionary(const acoustics::AtfSet& atfs, size_t K,
                                plucker::Normalization strategy, double rel_tol) {
  if (K >= atfs.mic_count)
    throw std::invalid_argument("build_dictionary requires K < M");
  if (atfs.directions.size() < K)
    throw std::invalid_argument("build_dictionary requires at least K directions");

  const size_t M = atfs.mic_count;
  const size_t F = atfs.freq_count;
  const plucker::CombinationIndex idx = plucker::combinations(M, K);
  const size_t L = idx.count();

  // ordered K-subsets of direction ids, ascending by id, lexicographic order.
  std::vector<int> ids(atfs.directions.size());
  for (size_t d = 0; d < atfs.directions.size(); ++d) ids[d] = atfs.directions[d].id;
  std::sort(ids.begin(), ids.end());

  GrtfDictionary dict;
  dict.meta = {M, K, F, L, strategy, rel_tol, atfs.fingerprint()};
  dict.directions = atfs.directions;

  const plucker::CombinationIndex subset_idx =
      plucker::combinations(ids.size(), K);
  dict.entries.reserve(subset_idx.count());

  spectral::MultiFrameBlock block;
  block.rows = M;
  block.cols = K;
  block.entries.resize(M * K);

  for (size_t s = 0; s < subset_idx.count(); ++s) {
    const uint32_t* tuple = subset_idx.tuple(s);
    DictionaryEntry entry;
    entry.ids.resize(K);
    std::vector<size_t> dir_index(K);
    for (size_t j = 0; j < K; ++j) {
      entry.ids[j] = ids[tuple[j]];
      dir_index[j] = atfs.index_of(entry.ids[j]);
    }
    entry.values.assign(F * L, cplx(0.0, 0.0));
    entry.valid.assign(F, 0);
    entry.anchors.assign(F, 0);

    for (size_t f = 0; f < F; ++f) {
      for (size_t j = 0; j < K; ++j)
        for (size_t m = 0; m < M; ++m) block.at(m, j) = atfs.at(dir_index[j], f, m);
      const plucker::Grtf g = plucker::grtf(block, idx, strategy, rel_tol);
      entry.valid[f] = g.valid ? 1 : 0;
      entry.anchors[f] = static_cast<uint16_t>(g.anchor_index);
      if (g.valid)
        std::copy(g.values.begin(), g.values.end(), entry.values.begin() + f * L);
    }
    dict.entries.push_back(std::move(entry));
  }
  return dict;
}

GrtfQuery query_grtf(const spectral::SpectrogramTensor& spec, size_t t, size_t K,
                     plucker::Normalization strategy, double rel_tol) {
  if (t >= spec.frame_count || K > spec.frame_count - t)
    throw std::invalid_argument("query_grtf: insufficient frames at t");

  const size_t M = spec.channel_count;
  const size_t F = spec.freq_count;
  const plucker::CombinationIndex idx = plucker::combinations(M, K);
  const size_t L = idx.count();

  GrtfQuery q;
  q.mic_count = M;
  q.order = K;
  q.freq_count = F;
  q.coord_count = L;
  q.strategy = strategy;
  q.start_frame = t;
  q.values.assign(F * L, cplx(0.0, 0.0));
  q.valid.assign(F, 0);
  q.anchors.assign(F, 0);

  for (size_t f = 0; f < F; ++f) {
    const spectral::MultiFrameBlock block = spectral::extract_block(spec, f, t, K);
    const plucker::Grtf g = plucker::grtf(block, idx, strategy, rel_tol);
    q.valid[f] = g.valid ? 1 : 0;
    q.anchors[f] = static_cast<uint16_t>(g.anchor_index);
    if (g.valid) std::copy(g.values.begin(), g.values.end(), q.values.begin() + f * L);
  }
  return q;
}

LocalizationResult localize(const GrtfQuery& query, const GrtfDictionary& dict) {
  if (query.mic_count != dict.meta.mic_count || query.order != dict.meta.order ||
      query.freq_count != dict.meta.freq_count ||
      query.coord_count != dict.meta.coord_count ||
      query.strategy != dict.meta.strategy)
    throw std::invalid_argument("localize: query and dictionary are incompatible");

  const size_t F = query.freq_count;
  const size_t L = query.coord_count;
  const bool anchored = query.strategy == plucker::Normalization::AnchorMax;

  LocalizationResult best;
  best.start_frame = query.start_frame;
  best.order = query.order;

  for (const DictionaryEntry& entry : dict.entries) {
    double acc = 0.0;
    size_t mutual = 0;
    for (size_t f = 0; f < F; ++f) {
      if (!query.valid[f] || !entry.valid[f]) continue;
      if (anchored && query.anchors[f] != entry.anchors[f]) continue;
      ++mutual;
      const cplx* qv = query.values.data() + f * L;
      const cplx* ev = entry.values.data() + f * L;
      for (size_t l = 0; l < L; ++l) acc += std::norm(qv[l] - ev[l]);
    }
    if (mutual == 0) continue;
    const double dist = acc * static_cast<double>(F) / static_cast<double>(mutual);
    // entries are in lexicographic id order, so strict < breaks ties low
    if (!best.decided || dist < best.distance) {
      best.decided = true;
      best.distance = dist;
      best.estimated = entry.ids;
      best.valid_bin_count = mutual;
    }
  }
  return best;
}

double circular_azimuth_distance_deg(double a_deg, double b_deg) {
  const double d = std::abs(std::fmod(a_deg - b_deg, 360.0));
  return std::min(d, 360.0 - d);
}

ErrorReport score(const std::vector<LocalizationResult>& results,
                  const std::vector<std::vector<int>>& ground_truth,
                  const std::vector<acoustics::Direction>& directions) {
  if (results.size() != ground_truth.size())
    throw std::invalid_argument("score: task counts differ");

  auto azimuth_of = [&directions](int id) -> double {
    for (const auto& d : directions)
      if (d.id == id) return d.azimuth_deg;
    throw DataError("score: unknown direction id " + std::to_string(id));
  };

  ErrorReport report;
  report.task_count = results.size();
  report.per_task.resize(results.size());

  double error_sum = 0.0;
  size_t pair_count = 0;
  size_t exact_count = 0;

  for (size_t i = 0; i < results.size(); ++i) {
    const auto& truth = ground_truth[i];
    TaskScore& ts = report.per_task[i];
    if (!results[i].decided) continue;
    const auto& est = results[i].estimated;
    if (est.size() != truth.size())
      throw std::invalid_argument("score: estimate/truth order mismatch");

    ts.decided = true;
    ++report.decided_count;

    std::vector<int> est_sorted = est, truth_sorted = truth;
    std::sort(est_sorted.begin(), est_sorted.end());
    std::sort(truth_sorted.begin(), truth_sorted.end());
    ts.exact = est_sorted == truth_sorted;
    if (ts.exact) ++exact_count;

    // optimal assignment over all K! permutations (K <= 3 in practice)
    const size_t K = truth.size();
    std::vector<size_t> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double cost = 0.0;
      for (size_t j = 0; j < K; ++j)
        cost += circular_azimuth_distance_deg(azimuth_of(est[perm[j]]),
                                              azimuth_of(truth[j]));
      best_cost = std::min(best_cost, cost);
    } while (std::next_permutation(perm.begin(), perm.end()));

    ts.azimuth_error_deg = best_cost / static_cast<double>(K);
    error_sum += best_cost;
    pair_count += K;
  }

  report.mean_abs_azimuth_error_deg =
      pair_count == 0 ? 0.0 : error_sum / static_cast<double>(pair_count);
  report.exact_match_rate =
      results.empty() ? 0.0
                      : static_cast<double>(exact_count) / static_cast<double>(results.size());
  return report;
}

namespace {

constexpr char kDictMagic[8] = {'G', 'R', 'T', 'F', 'D', 'I', 'C', '1'};

}  // namespace

void save_dictionary(const GrtfDictionary& dict, const std::string& path) {
  nlohmann::json header;
  header["mic_count"] = dict.meta.mic_count;
  header["order"] = dict.meta.order;
  header["freq_count"] = dict.meta.freq_count;
  header["coord_count"] = dict.meta.coord_count;
  header["strategy"] =
      dict.meta.strategy == plucker::Normalization::FirstEntry ? "first_entry"
                                                               : "anchor_max";
  header["rel_tol"] = dict.meta.rel_tol;
  header["atf_fingerprint"] = dict.meta.atf_fingerprint;
  auto dirs = nlohmann::json::array();
  for (const auto& d : dict.directions)
    dirs.push_back({{"id", d.id}, {"azimuth_deg", d.azimuth_deg},
                    {"elevation_deg", d.elevation_deg}});
  header["directions"] = dirs;
  auto index = nlohmann::json::array();
  for (const auto& e : dict.entries) index.push_back(e.ids);
  header["entries"] = index;

  const std::string htext = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(kDictMagic, sizeof(kDictMagic));
  const uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& e : dict.entries) {
    out.write(reinterpret_cast<const char*>(e.values.data()),
              static_cast<std::streamsize>(e.values.size() * sizeof(cplx)));
    out.write(reinterpret_cast<const char*>(e.valid.data()),
              static_cast<std::streamsize>(e.valid.size()));
    out.write(reinterpret_cast<const char*>(e.anchors.data()),
              static_cast<std::streamsize>(e.anchors.size() * sizeof(uint16_t)));
  }
  if (!out) throw DataError("write failed: " + path);
}

GrtfDictionary load_dictionary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDictMagic, sizeof(magic)) != 0)
    throw DataError("not a dictionary file: " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen > (1u << 26)) throw DataError("corrupt header: " + path);
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError("corrupt header: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad header json: ") + e.what());
  }

  GrtfDictionary dict;
  try {
    dict.meta.mic_count = header.at("mic_count").get<size_t>();
    dict.meta.order = header.at("order").get<size_t>();
    dict.meta.freq_count = header.at("freq_count").get<size_t>();
    dict.meta.coord_count = header.at("coord_count").get<size_t>();
    dict.meta.strategy = header.at("strategy").get<std::string>() == "anchor_max"
                             ? plucker::Normalization::AnchorMax
                             : plucker::Normalization::FirstEntry;
    dict.meta.rel_tol = header.at("rel_tol").get<double>();
    dict.meta.atf_fingerprint = header.at("atf_fingerprint").get<uint64_t>();
    for (const auto& jd : header.at("directions")) {
      acoustics::Direction d;
      d.id = jd.at("id").get<int>();
      d.azimuth_deg = jd.at("azimuth_deg").get<double>();
      d.elevation_deg = jd.at("elevation_deg").get<double>();
      dict.directions.push_back(d);
    }
    for (const auto& je : header.at("entries")) {
      DictionaryEntry e;
      e.ids = je.get<std::vector<int>>();
      dict.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad header field: ") + e.what());
  }

  const size_t F = dict.meta.freq_count;
  const size_t L = dict.meta.coord_count;
  for (auto& e : dict.entries) {
    e.values.resize(F * L);
    e.valid.resize(F);
    e.anchors.resize(F);
    in.read(reinterpret_cast<char*>(e.values.data()),
            static_cast<std::streamsize>(F * L * sizeof(cplx)));
    in.read(reinterpret_cast<char*>(e.valid.data()), static_cast<std::streamsize>(F));
    in.read(reinterpret_cast<char*>(e.anchors.data()),
            static_cast<std::streamsize>(F * sizeof(uint16_t)));
  }
  if (!in) throw DataError("truncated payload: " + path);
  return dict;
}

}  // namespace grtfloc::localization
