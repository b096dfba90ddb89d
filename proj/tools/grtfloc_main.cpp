// Batch experiment CLI: generate transfer functions, build GRTF dictionaries,
// simulate white-noise scenes, localize segments, count sources, and render
// result tables. Exit codes: 0 success, 2 config error, 3 data error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "grtfloc/acoustics.hpp"
#include "grtfloc/audio_io.hpp"
#include "grtfloc/experiment.hpp"
#include "grtfloc/localization.hpp"
#include "grtfloc/plucker.hpp"
#include "grtfloc/spectral.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace grtfloc;

namespace {

struct CommonArgs {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
};

experiment::ExperimentConfig resolve_config(const CommonArgs& args) {
  experiment::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = experiment::load_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  experiment::validate(cfg);
  return cfg;
}

std::vector<int> parse_id_list(const std::string& text) {
  std::vector<int> ids;
  std::string cur;
  for (char c : text) {
    if (c == ',' || c == '|') {
      if (!cur.empty()) ids.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) ids.push_back(std::stoi(cur));
  if (ids.empty()) throw ConfigError("empty direction list: '" + text + "'");
  return ids;
}

double parse_snr_arg(const std::string& text) {
  if (text == "inf" || text == "none") return acoustics::kNoNoise;
  try {
    return std::stod(text);
  } catch (const std::exception&) {
    throw ConfigError("bad SNR value: '" + text + "'");
  }
}

int run_gen_atf(const CommonArgs& common, const std::string& out_dir) {
  const auto cfg = resolve_config(common);
  const acoustics::AtfSet atfs = experiment::make_atf(cfg);
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / "atfset.bin").string();
  acoustics::save_atf(atfs, path);
  std::printf("wrote %s: %zu directions, M=%zu, F=%zu, %d Hz, kind=%s\n", path.c_str(),
              atfs.directions.size(), atfs.mic_count, atfs.freq_count, atfs.sample_rate,
              atfs.kind == acoustics::AtfKind::FreeField ? "free_field"
                                                         : "synthetic_room");
  return 0;
}

int run_build_dict(const CommonArgs& common, const std::string& atf_path, size_t k,
                   const std::string& out_dir) {
  const auto cfg = resolve_config(common);
  const acoustics::AtfSet atfs =
      atf_path.empty() ? experiment::make_atf(cfg) : acoustics::load_atf(atf_path);
  const localization::GrtfDictionary dict =
      localization::build_dictionary(atfs, k, cfg.normalization, cfg.validity_rel_tol);
  fs::create_directories(out_dir);
  const std::string path =
      (fs::path(out_dir) / ("dict_k" + std::to_string(k) + ".bin")).string();
  localization::save_dictionary(dict, path);
  std::printf("wrote %s: %zu entries of %zu x %zu coords\n", path.c_str(),
              dict.entries.size(), dict.meta.freq_count, dict.meta.coord_count);
  return 0;
}

int run_simulate(const CommonArgs& common, const std::string& atf_path,
                 const std::string& dirs_arg, const std::string& snr_arg,
                 const std::string& out_path) {
  const auto cfg = resolve_config(common);
  const acoustics::AtfSet atfs =
      atf_path.empty() ? experiment::make_atf(cfg) : acoustics::load_atf(atf_path);

  acoustics::SceneConfig scene;
  scene.source_directions = parse_id_list(dirs_arg);
  scene.duration_s = cfg.duration_s;
  scene.snr_db = parse_snr_arg(snr_arg);
  scene.seed = cfg.seed;
  const spectral::MultichannelSignal sig = acoustics::simulate_scene(atfs, scene);

  if (out_path.ends_with(".wav"))
    audio::write_wav(out_path, sig, 32);
  else
    audio::write_raw_f64(out_path, sig);

  nlohmann::json truth;
  truth["source_directions"] = scene.source_directions;
  auto jd = nlohmann::json::array();
  for (int id : scene.source_directions) {
    const auto& d = atfs.directions[atfs.index_of(id)];
    jd.push_back({{"id", d.id}, {"azimuth_deg", d.azimuth_deg},
                  {"elevation_deg", d.elevation_deg}});
  }
  truth["directions"] = jd;
  truth["snr_db"] = std::isinf(scene.snr_db) ? nlohmann::json("inf")
                                             : nlohmann::json(scene.snr_db);
  truth["seed"] = scene.seed;
  std::ofstream tf(out_path + ".truth.json");
  tf << truth.dump(2) << "\n";

  std::printf("wrote %s: %zu channels, %zu samples, %d Hz\n", out_path.c_str(),
              sig.channels(), sig.length(), sig.sample_rate);
  return 0;
}

int run_localize(const CommonArgs& common, const std::string& dict_path,
                 const std::string& in_path, size_t stride_override,
                 const std::string& out_csv) {
  const auto cfg = resolve_config(common);
  if (dict_path.empty()) throw ConfigError("localize requires --dict");
  const localization::GrtfDictionary dict = localization::load_dictionary(dict_path);
  const spectral::MultichannelSignal sig = audio::read_audio(in_path);
  const spectral::SpectrogramTensor spec = spectral::stft(sig, cfg.stft_config());

  const size_t k = dict.meta.order;
  const size_t stride = stride_override ? stride_override : cfg.segment_stride;
  if (spec.frame_count < k) throw DataError("input too short for the dictionary order");

  std::vector<localization::LocalizationResult> results;
  for (size_t t = 0; t + k <= spec.frame_count; t += stride) {
    const localization::GrtfQuery q =
        localization::query_grtf(spec, t, k, dict.meta.strategy, dict.meta.rel_tol);
    results.push_back(localization::localize(q, dict));
  }

  std::ofstream csv;
  const bool to_file = !out_csv.empty();
  if (to_file) {
    csv.open(out_csv, std::ios::binary);
    if (!csv) throw DataError("cannot open for writing: " + out_csv);
    csv << "segment,start_frame,est_ids,distance,valid_bins,no_decision\n";
  }

  // modal estimate across segments for the console summary
  std::vector<std::vector<int>> seen;
  std::vector<size_t> votes;
  for (size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (to_file) {
      char line[256];
      std::snprintf(line, sizeof(line), "%zu,%zu,", i, r.start_frame);
      csv << line;
      for (size_t j = 0; j < r.estimated.size(); ++j)
        csv << (j ? "|" : "") << r.estimated[j];
      std::snprintf(line, sizeof(line), ",%.9e,%zu,%d\n",
                    r.decided ? r.distance : std::numeric_limits<double>::quiet_NaN(),
                    r.valid_bin_count, r.decided ? 0 : 1);
      csv << line;
    }
    if (!r.decided) continue;
    bool found = false;
    for (size_t v = 0; v < seen.size(); ++v)
      if (seen[v] == r.estimated) {
        ++votes[v];
        found = true;
        break;
      }
    if (!found) {
      seen.push_back(r.estimated);
      votes.push_back(1);
    }
  }

  if (seen.empty()) {
    std::printf("no decision: every segment had zero mutually-valid bins\n");
    return 0;
  }
  size_t best = 0;
  for (size_t v = 1; v < seen.size(); ++v)
    if (votes[v] > votes[best]) best = v;
  std::printf("segments: %zu, modal estimate:", results.size());
  for (int id : seen[best]) {
    const auto& d = dict.direction_by_id(id);
    std::printf(" id=%d (az %.1f deg, el %.1f deg)", id, d.azimuth_deg, d.elevation_deg);
  }
  std::printf("  [%zu/%zu segments]\n", votes[best], results.size());
  return 0;
}

int run_count_sources(const CommonArgs& common, const std::string& in_path,
                      const std::string& dirs_arg, const std::string& snr_arg,
                      double rel_tol, const std::string& out_csv) {
  const auto cfg = resolve_config(common);
  spectral::MultichannelSignal sig;
  if (!in_path.empty()) {
    sig = audio::read_audio(in_path);
  } else if (!dirs_arg.empty()) {
    const acoustics::AtfSet atfs = experiment::make_atf(cfg);
    acoustics::SceneConfig scene;
    scene.source_directions = parse_id_list(dirs_arg);
    scene.duration_s = cfg.duration_s;
    scene.snr_db = parse_snr_arg(snr_arg);
    scene.seed = cfg.seed;
    sig = acoustics::simulate_scene(atfs, scene);
  } else {
    throw ConfigError("count-sources needs --in FILE or --dirs LIST");
  }

  const spectral::SpectrogramTensor spec = spectral::stft(sig, cfg.stft_config());
  const experiment::CountHistogram hist =
      experiment::count_sources_histogram(spec, rel_tol);

  std::printf("bins: %zu total, %zu active\n", hist.total_bins, hist.active_bins);
  for (size_t c = 0; c < hist.histogram.size(); ++c) {
    const char* suffix = (c + 1 == hist.histogram.size()) ? "+" : "";
    std::printf("  count %zu%s: %zu\n", c, suffix, hist.histogram[c]);
  }
  if (hist.active_bins == 0)
    std::printf("modal count: 0 (no active bins)\n");
  else
    std::printf("modal count: %zu (%.1f%% of active bins)\n", hist.modal,
                100.0 * hist.modal_fraction);

  if (!out_csv.empty()) {
    std::ofstream csv(out_csv, std::ios::binary);
    if (!csv) throw DataError("cannot open for writing: " + out_csv);
    csv << "count,bins\n";
    for (size_t c = 0; c < hist.histogram.size(); ++c)
      csv << c << "," << hist.histogram[c] << "\n";
  }
  return 0;
}

int run_experiment_cmd(const CommonArgs& common, const std::string& out_dir,
                       bool full_grid, const std::vector<std::string>& snr_args,
                       const std::vector<size_t>& k_args, size_t stride,
                       size_t threads) {
  auto cfg = resolve_config(common);
  if (!snr_args.empty()) {
    cfg.snr_db_list.clear();
    for (const auto& s : snr_args) cfg.snr_db_list.push_back(parse_snr_arg(s));
  }
  if (!k_args.empty()) cfg.k_list = k_args;
  if (stride) cfg.segment_stride = stride;
  experiment::validate(cfg);

  experiment::RunOptions opts;
  opts.threads = threads;
  opts.full_grid = full_grid;
  const experiment::ExperimentReport report =
      experiment::run_experiment(cfg, out_dir, opts);

  for (const auto& cell : report.cells) {
    char snr[32];
    if (std::isinf(cell.snr_db))
      std::snprintf(snr, sizeof(snr), "inf");
    else
      std::snprintf(snr, sizeof(snr), "%g", cell.snr_db);
    std::printf("K=%zu snr=%s dB: mean azimuth error %.3f deg, exact %.1f%%, "
                "%zu tasks (%zu scenes) in %.1f s\n",
                cell.k, snr, cell.mean_abs_azimuth_error_deg,
                100.0 * cell.exact_match_rate, cell.task_count, cell.scene_count,
                cell.wall_seconds);
  }
  std::printf("artifacts written to %s\n", out_dir.c_str());
  return 0;
}

int run_report(const std::string& in_dir) {
  std::printf("%s", experiment::render_report(in_dir).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plucker-transform GRTF multi-source localization experiments"};
  app.require_subcommand(1);

  CommonArgs common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON experiment config");
    sub->add_option("--seed", common.seed, "override the config seed")
        ->each([&common](const std::string&) { common.seed_set = true; });
  };

  std::string out_dir = "out";
  std::string atf_path, dict_path, in_path, out_path, dirs_arg, report_dir;
  std::string snr_arg = "inf";
  std::string out_csv;
  size_t k = 1;
  size_t stride = 0;
  size_t threads = 0;
  double rel_tol = plucker::kDefaultRankTol;
  bool full_grid = false;
  std::vector<std::string> snr_args;
  std::vector<size_t> k_args;

  CLI::App* gen = app.add_subcommand("gen-atf", "generate and save a transfer-function set");
  add_common(gen);
  gen->add_option("--out", out_dir, "output directory");

  CLI::App* bd = app.add_subcommand("build-dict", "build a GRTF dictionary");
  add_common(bd);
  bd->add_option("--atf", atf_path, "transfer-function set file (default: generate)");
  bd->add_option("--k", k, "source count the dictionary is built for")->required();
  bd->add_option("--out", out_dir, "output directory");

  CLI::App* sim = app.add_subcommand("simulate", "simulate a white-noise scene");
  add_common(sim);
  sim->add_option("--atf", atf_path, "transfer-function set file (default: generate)");
  sim->add_option("--dirs", dirs_arg, "comma-separated direction ids")->required();
  sim->add_option("--snr-db", snr_arg, "SNR in dB, or 'inf' for noiseless");
  sim->add_option("--out", out_path, "output audio path (.wav or raw .f64)")->required();

  CLI::App* loc = app.add_subcommand("localize", "localize all segments of a recording");
  add_common(loc);
  loc->add_option("--dict", dict_path, "dictionary file")->required();
  loc->add_option("--in", in_path, "input audio (.wav or raw .f64)")->required();
  loc->add_option("--stride", stride, "segment stride in frames");
  loc->add_option("--out", out_csv, "per-segment CSV output");

  CLI::App* cs = app.add_subcommand("count-sources", "rank-based per-bin source counting");
  add_common(cs);
  cs->add_option("--in", in_path, "input audio (.wav or raw .f64)");
  cs->add_option("--dirs", dirs_arg, "simulate these direction ids instead of reading");
  cs->add_option("--snr-db", snr_arg, "SNR for --dirs simulation");
  cs->add_option("--rel-tol", rel_tol, "singular-value cutoff relative to the largest");
  cs->add_option("--out", out_csv, "histogram CSV output");

  CLI::App* exp = app.add_subcommand("experiment", "run the full localization protocol");
  add_common(exp);
  exp->add_option("--out", out_dir, "output directory");
  exp->add_flag("--full-grid", full_grid, "no scene/segment subsampling");
  exp->add_option("--snr-db", snr_args, "override SNR list (repeatable, 'inf' allowed)");
  exp->add_option("--k", k_args, "override source-count list (repeatable)");
  exp->add_option("--stride", stride, "override segment stride");
  exp->add_option("--threads", threads, "worker threads (0 = auto)");

  CLI::App* rep = app.add_subcommand("report", "render the result table of a finished run");
  rep->add_option("--in", report_dir, "results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_gen_atf(common, out_dir);
    if (bd->parsed()) return run_build_dict(common, atf_path, k, out_dir);
    if (sim->parsed()) return run_simulate(common, atf_path, dirs_arg, snr_arg, out_path);
    if (loc->parsed()) return run_localize(common, dict_path, in_path, stride, out_csv);
    if (cs->parsed())
      return run_count_sources(common, in_path, dirs_arg, snr_arg, rel_tol, out_csv);
    if (exp->parsed())
      return run_experiment_cmd(common, out_dir, full_grid, snr_args, k_args, stride,
                                threads);
    if (rep->parsed()) return run_report(report_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
