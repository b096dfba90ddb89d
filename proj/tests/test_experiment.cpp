#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "grtfloc/experiment.hpp"

using namespace grtfloc;
using namespace grtfloc::experiment;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.seed = 42;
  cfg.num_directions = 5;
  cfg.k_list = {1, 2};
  cfg.snr_db_list = {acoustics::kNoNoise};
  cfg.duration_s = 0.25;
  cfg.segment_stride = 4;
  cfg.atf_kind = acoustics::AtfKind::SyntheticRoom;
  return cfg;
}

fs::path fresh_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults survive an empty object") {
    ExperimentConfig cfg = parse_config("{}", "inline");
    CHECK(cfg.sample_rate == 8000);
    CHECK(cfg.window_len == 256);
    CHECK(cfg.num_directions == 21);
    CHECK(cfg.k_list == std::vector<size_t>{1, 2, 3});
    CHECK(cfg.snr_db_list == std::vector<double>{10.0, 50.0});
  }
  SUBCASE("unknown keys are named in the error") {
    try {
      parse_config("{\"windoow\": \"hann\"}", "inline");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("windoow") != std::string::npos);
    }
  }
  SUBCASE("parse errors carry the line number") {
    try {
      parse_config("{\n  \"seed\": 1,\n  broken\n}", "inline");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("inline:3") != std::string::npos);
    }
  }
  SUBCASE("k must stay below the microphone count") {
    CHECK_THROWS_AS(parse_config("{\"k_list\": [4]}", "inline"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"mic_count\": 1}", "inline"), ConfigError);
  }
  SUBCASE("snr accepts numbers and the inf sentinel") {
    ExperimentConfig cfg = parse_config("{\"snr_db_list\": [10, \"inf\"]}", "inline");
    REQUIRE(cfg.snr_db_list.size() == 2);
    CHECK(cfg.snr_db_list[0] == 10.0);
    CHECK(std::isinf(cfg.snr_db_list[1]));
  }
  SUBCASE("config echo parses back to the same values") {
    ExperimentConfig cfg = tiny_config();
    ExperimentConfig back = parse_config(config_to_json(cfg), "echo");
    CHECK(back.seed == cfg.seed);
    CHECK(back.k_list == cfg.k_list);
    CHECK(back.segment_stride == cfg.segment_stride);
    CHECK(std::isinf(back.snr_db_list[0]));
  }
}

TEST_CASE("scene enumeration counts") {
  ExperimentConfig cfg;
  cfg.num_directions = 21;
  CHECK(scene_count(cfg, 1) == 21);
  CHECK(scene_count(cfg, 2) == 210);
  CHECK(scene_count(cfg, 3) == 1330);

  cfg.scene_stride = 4;
  CHECK(scene_count(cfg, 2) == 53);  // ceil(210 / 4)

  cfg.scene_stride = 1;
  const auto dirs = make_directions(cfg);
  const auto subsets = scene_subsets(cfg, dirs, 2);
  REQUIRE(subsets.size() == 210);
  for (const auto& s : subsets) {
    REQUIRE(s.size() == 2);
    CHECK(s[0] < s[1]);
  }
  for (size_t i = 1; i < subsets.size(); ++i) CHECK(subsets[i - 1] < subsets[i]);
}

TEST_CASE("experiment artifacts are deterministic and thread-count independent") {
  const ExperimentConfig cfg = tiny_config();

  fs::path dir1 = fresh_dir("grtfloc_exp_t1");
  fs::path dir2 = fresh_dir("grtfloc_exp_t2");
  RunOptions serial;
  serial.threads = 1;
  RunOptions parallel;
  parallel.threads = 2;
  run_experiment(cfg, dir1.string(), serial);
  run_experiment(cfg, dir2.string(), parallel);

  for (const char* name : {"results_k1_snrinf.csv", "results_k2_snrinf.csv"}) {
    const std::string a = slurp(dir1 / name);
    const std::string b = slurp(dir2 / name);
    CHECK(a == b);
    CHECK(a.find("task,scene,k,snr_db") == 0);
  }
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("noiseless single-source runs localize exactly") {
  ExperimentConfig cfg = tiny_config();
  cfg.k_list = {1};
  fs::path dir = fresh_dir("grtfloc_exp_exact");
  ExperimentReport report = run_experiment(cfg, dir.string(), RunOptions{1, false});
  REQUIRE(report.cells.size() == 1);
  CHECK(report.cells[0].mean_abs_azimuth_error_deg == 0.0);
  CHECK(report.cells[0].exact_match_rate == 1.0);
  CHECK(report.cells[0].no_decision_count == 0);
  CHECK(report.cells[0].scene_count == 5);
  fs::remove_all(dir);
}

TEST_CASE("report rendering") {
  SUBCASE("missing results directory is a data error") {
    CHECK_THROWS_AS(render_report("/nonexistent/results"), DataError);
  }
  SUBCASE("a single-cell run renders a one-by-one table") {
    ExperimentConfig cfg = tiny_config();
    cfg.k_list = {1};
    cfg.snr_db_list = {50.0};
    fs::path dir = fresh_dir("grtfloc_exp_single");
    run_experiment(cfg, dir.string(), RunOptions{1, false});
    const std::string table = render_report(dir.string());
    CHECK(table.find("K=1") != std::string::npos);
    CHECK(table.find("K=2") == std::string::npos);
    CHECK(table.find("50 dB") != std::string::npos);
    fs::remove_all(dir);
  }
  SUBCASE("a finished run renders a table with every cell") {
    ExperimentConfig cfg = tiny_config();
    fs::path dir = fresh_dir("grtfloc_exp_render");
    run_experiment(cfg, dir.string(), RunOptions{1, false});
    const std::string table = render_report(dir.string());
    CHECK(table.find("mean absolute azimuth error") != std::string::npos);
    CHECK(table.find("K=1") != std::string::npos);
    CHECK(table.find("K=2") != std::string::npos);
    CHECK(table.find("inf dB") != std::string::npos);
    CHECK(table.find("exact-match rate") != std::string::npos);
    CHECK(fs::exists(dir / "table.txt"));
    CHECK(slurp(dir / "table.txt") == table);
    fs::remove_all(dir);
  }
}

TEST_CASE("per-bin source counting histograms") {
  ExperimentConfig cfg = tiny_config();
  const acoustics::AtfSet atfs = make_atf(cfg);

  SUBCASE("silence has no active bins and modal count zero") {
    spectral::SpectrogramTensor spec;
    spec.freq_count = 8;
    spec.frame_count = 10;
    spec.channel_count = 4;
    spec.sample_rate = 8000;
    spec.bins.assign(8 * 10 * 4, cplx(0, 0));
    CountHistogram h = count_sources_histogram(spec, 1e-8);
    CHECK(h.active_bins == 0);
    CHECK(h.modal == 0);
  }
  SUBCASE("a noiseless two-source tensor counts two nearly everywhere") {
    acoustics::SceneConfig scene;
    scene.source_directions = {0, 3};
    scene.snr_db = acoustics::kNoNoise;
    scene.seed = 11;
    auto spec = acoustics::synthesize_tensor(atfs, scene, 12, cfg.stft_config());
    CountHistogram h = count_sources_histogram(spec, 1e-8);
    CHECK(h.modal == 2);
    CHECK(h.modal_fraction > 0.95);
  }
}
