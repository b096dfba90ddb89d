#include "grtfloc/acoustics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include "grtfloc/rng.hpp"

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary artifact formats assume a little-endian host");

namespace grtfloc::acoustics {

namespace {

constexpr uint64_t kSaltSource = 0x534f5552u;  // per-source signal stream
constexpr uint64_t kSaltNoise = 0x4e4f4953u;   // additive-noise stream
constexpr uint64_t kSaltSpec = 0x53504543u;    // frequency-domain source spectra
constexpr uint64_t kSaltRoom = 0x524f4f4du;    // reflection taps

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

// Accumulate a Hann-windowed sinc kernel centered at a fractional delay.
// Integer delays reduce to a single exact unit tap.
void add_delayed_impulse(std::vector<double>& fir, double delay, double gain,
                         int half_width) {
  const int lo = std::max(0, static_cast<int>(std::ceil(delay - half_width)));
  const int hi = std::min(static_cast<int>(fir.size()) - 1,
                          static_cast<int>(std::floor(delay + half_width)));
  for (int n = lo; n <= hi; ++n) {
    const double u = static_cast<double>(n) - delay;
    const double w = 0.5 * (1.0 + std::cos(kPi * u / half_width));
    fir[static_cast<size_t>(n)] += gain * w * sinc(u);
  }
}

double arrival_delay_s(const MicArray& array, const Direction& dir, size_t m) {
  const auto u = unit_vector(dir);
  const auto& p = array.positions[m];
  const double proj = u[0] * p[0] + u[1] * p[1] + u[2] * p[2];
  return -proj / array.speed_of_sound;
}

// DFT of a FIR at the retained bin frequencies.
void fill_atf_from_firs(AtfSet& atfs) {
  const double fs = static_cast<double>(atfs.sample_rate);
  for (size_t d = 0; d < atfs.directions.size(); ++d) {
    for (size_t m = 0; m < atfs.mic_count; ++m) {
      const double* h = atfs.fir(d, m);
      for (size_t f = 0; f < atfs.freq_count; ++f) {
        const double w = kTwoPi * atfs.bin_hz(f) / fs;
        cplx acc(0.0, 0.0);
        for (size_t n = 0; n < atfs.fir_len; ++n) {
          const double ang = -w * static_cast<double>(n);
          acc += h[n] * cplx(std::cos(ang), std::sin(ang));
        }
        atfs.atf[atfs.atf_index(d, f, m)] = acc;
      }
    }
  }
}

void check_unique_ids(const std::vector<Direction>& dirs) {
  std::set<int> ids;
  for (const auto& d : dirs)
    if (!ids.insert(d.id).second)
      throw std::invalid_argument("duplicate direction id in direction set");
}

}  // namespace

double wrap_azimuth(double deg) {
  double a = std::fmod(deg + 180.0, 360.0);
  if (a < 0.0) a += 360.0;
  return a - 180.0;
}

std::array<double, 3> unit_vector(const Direction& d) {
  const double az = d.azimuth_deg * kPi / 180.0;
  const double el = d.elevation_deg * kPi / 180.0;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

void MicArray::validate() const {
  if (positions.size() < 2) throw std::invalid_argument("array needs M >= 2 mics");
  if (!(speed_of_sound > 0.0))
    throw std::invalid_argument("speed of sound must be positive");
  for (size_t i = 0; i < positions.size(); ++i)
    for (size_t j = i + 1; j < positions.size(); ++j)
      if (positions[i] == positions[j])
        throw std::invalid_argument("microphone positions must be distinct");
}

MicArray tetrahedral_array(double radius_m, double speed_of_sound) {
  const double s = radius_m / std::sqrt(3.0);
  MicArray a;
  a.speed_of_sound = speed_of_sound;
  a.positions = {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
  return a;
}

MicArray ring_array(size_t mic_count, double radius_m, double speed_of_sound) {
  MicArray a;
  a.speed_of_sound = speed_of_sound;
  for (size_t m = 0; m < mic_count; ++m) {
    const double ang = kTwoPi * static_cast<double>(m) / static_cast<double>(mic_count);
    a.positions.push_back({radius_m * std::cos(ang), radius_m * std::sin(ang), 0.0});
  }
  return a;
}

std::vector<Direction> random_directions(size_t n, double azimuth_min,
                                         double azimuth_max, double elevation_min,
                                         double elevation_max,
                                         double min_azimuth_sep_deg, uint64_t seed) {
  Rng rng(seed);
  std::vector<Direction> dirs;
  dirs.reserve(n);
  size_t attempts = 0;
  while (dirs.size() < n) {
    if (++attempts > 1000 * (n + 1))
      throw std::invalid_argument(
          "random_directions: cannot satisfy azimuth separation, too many directions");
    Direction d;
    d.azimuth_deg = wrap_azimuth(rng.uniform(azimuth_min, azimuth_max));
    d.elevation_deg = rng.uniform(elevation_min, elevation_max);
    d.id = static_cast<int>(dirs.size());
    bool ok = true;
    for (const auto& prev : dirs) {
      const double diff = std::abs(wrap_azimuth(d.azimuth_deg - prev.azimuth_deg));
      if (diff < min_azimuth_sep_deg) {
        ok = false;
        break;
      }
    }
    if (ok) dirs.push_back(d);
  }
  return dirs;
}

std::vector<cplx> AtfSet::atf_vector(size_t d, size_t f) const {
  std::vector<cplx> v(mic_count);
  for (size_t m = 0; m < mic_count; ++m) v[m] = at(d, f, m);
  return v;
}

size_t AtfSet::index_of(int direction_id) const {
  for (size_t d = 0; d < directions.size(); ++d)
    if (directions[d].id == direction_id) return d;
  throw DataError("unknown direction id " + std::to_string(direction_id));
}

double AtfSet::bin_hz(size_t f) const {
  return static_cast<double>(f + 1) * static_cast<double>(sample_rate) /
         (2.0 * static_cast<double>(freq_count));
}

uint64_t AtfSet::fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto fold = [&h](const void* data, size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const uint64_t dims[4] = {static_cast<uint64_t>(mic_count),
                            static_cast<uint64_t>(freq_count),
                            static_cast<uint64_t>(sample_rate),
                            static_cast<uint64_t>(directions.size())};
  fold(dims, sizeof(dims));
  fold(atf.data(), atf.size() * sizeof(cplx));
  return h;
}

void AtfSet::validate() const {
  check_unique_ids(directions);
  if (atf.size() != directions.size() * freq_count * mic_count)
    throw DataError("atf storage size inconsistent with dimensions");
  for (size_t d = 0; d < directions.size(); ++d) {
    for (size_t f = 0; f < freq_count; ++f) {
      double s = 0.0;
      for (size_t m = 0; m < mic_count; ++m) s += std::norm(at(d, f, m));
      if (s == 0.0) throw DataError("all-zero transfer vector in AtfSet");
    }
  }
}

AtfSet freefield_atf(const MicArray& array, const std::vector<Direction>& dirs,
                     size_t freq_count, int sample_rate) {
  array.validate();
  check_unique_ids(dirs);

  AtfSet atfs;
  atfs.kind = AtfKind::FreeField;
  atfs.mic_count = array.positions.size();
  atfs.freq_count = freq_count;
  atfs.sample_rate = sample_rate;
  atfs.seed = 0;
  atfs.directions = dirs;
  atfs.atf.resize(dirs.size() * freq_count * atfs.mic_count);

  const double fs = static_cast<double>(sample_rate);
  std::vector<std::vector<double>> delays(dirs.size(),
                                          std::vector<double>(atfs.mic_count));
  double min_delay = 0.0, max_delay = 0.0;
  for (size_t d = 0; d < dirs.size(); ++d) {
    for (size_t m = 0; m < atfs.mic_count; ++m) {
      const double tau = arrival_delay_s(array, dirs[d], m);
      delays[d][m] = tau * fs;
      min_delay = std::min(min_delay, delays[d][m]);
      max_delay = std::max(max_delay, delays[d][m]);
    }
  }

  for (size_t d = 0; d < dirs.size(); ++d)
    for (size_t f = 0; f < freq_count; ++f) {
      const double w = kTwoPi * atfs.bin_hz(f) / fs;
      for (size_t m = 0; m < atfs.mic_count; ++m) {
        const double ang = -w * delays[d][m];
        atfs.atf[atfs.atf_index(d, f, m)] = cplx(std::cos(ang), std::sin(ang));
      }
    }

  // causal fractional-delay FIRs for time-domain synthesis
  const int half = 24;
  atfs.bulk_delay_samples = half + 1 + std::ceil(std::max(0.0, -min_delay));
  atfs.fir_len =
      static_cast<size_t>(std::ceil(atfs.bulk_delay_samples + max_delay + half) + 1);
  atfs.firs.assign(dirs.size() * atfs.mic_count * atfs.fir_len, 0.0);
  for (size_t d = 0; d < dirs.size(); ++d)
    for (size_t m = 0; m < atfs.mic_count; ++m) {
      std::vector<double> h(atfs.fir_len, 0.0);
      add_delayed_impulse(h, atfs.bulk_delay_samples + delays[d][m], 1.0, half);
      std::copy(h.begin(), h.end(),
                atfs.firs.begin() + (d * atfs.mic_count + m) * atfs.fir_len);
    }

  atfs.validate();
  return atfs;
}

AtfSet synthetic_room_atf(const MicArray& array, const std::vector<Direction>& dirs,
                          size_t freq_count, int sample_rate, double rir_len_ms,
                          double decay_per_ms, uint64_t seed,
                          double reflection_gain) {
  array.validate();
  check_unique_ids(dirs);
  if (!(rir_len_ms > 0.0)) throw std::invalid_argument("rir_len_ms must be positive");

  AtfSet atfs;
  atfs.kind = AtfKind::SyntheticRoom;
  atfs.mic_count = array.positions.size();
  atfs.freq_count = freq_count;
  atfs.sample_rate = sample_rate;
  atfs.seed = seed;
  atfs.directions = dirs;

  const double fs = static_cast<double>(sample_rate);
  const double samples_per_ms = fs / 1000.0;
  const int half = 8;

  double min_delay = 0.0;
  for (const auto& dir : dirs)
    for (size_t m = 0; m < atfs.mic_count; ++m)
      min_delay = std::min(min_delay, arrival_delay_s(array, dir, m) * fs);
  atfs.bulk_delay_samples = half + 1 + std::ceil(std::max(0.0, -min_delay));

  atfs.fir_len = static_cast<size_t>(std::llround(rir_len_ms * samples_per_ms));
  double max_delay = 0.0;
  for (const auto& dir : dirs)
    for (size_t m = 0; m < atfs.mic_count; ++m)
      max_delay = std::max(max_delay, arrival_delay_s(array, dir, m) * fs);
  if (atfs.fir_len < static_cast<size_t>(atfs.bulk_delay_samples + max_delay + half) + 2)
    throw std::invalid_argument("rir_len_ms too short for the array's direct paths");

  atfs.firs.assign(dirs.size() * atfs.mic_count * atfs.fir_len, 0.0);
  for (size_t d = 0; d < dirs.size(); ++d) {
    for (size_t m = 0; m < atfs.mic_count; ++m) {
      std::vector<double> h(atfs.fir_len, 0.0);
      const double direct = atfs.bulk_delay_samples + arrival_delay_s(array, dirs[d], m) * fs;
      add_delayed_impulse(h, direct, 1.0, half);

      Rng rng(mix_seed(seed, {kSaltRoom, static_cast<uint64_t>(dirs[d].id),
                              static_cast<uint64_t>(m)}));
      const size_t first_tap = static_cast<size_t>(std::floor(direct)) + 1;
      for (size_t n = first_tap; n < atfs.fir_len; ++n) {
        const double dt_ms = (static_cast<double>(n) - direct) / samples_per_ms;
        const double env = std::exp(-decay_per_ms * dt_ms);
        h[n] += reflection_gain * env * rng.normal();
      }
      std::copy(h.begin(), h.end(),
                atfs.firs.begin() + (d * atfs.mic_count + m) * atfs.fir_len);
    }
  }

  atfs.atf.resize(dirs.size() * freq_count * atfs.mic_count);
  fill_atf_from_firs(atfs);
  atfs.validate();
  return atfs;
}

void SceneConfig::validate(size_t mic_count) const {
  if (source_directions.empty())
    throw std::invalid_argument("scene needs at least one source");
  std::set<int> ids(source_directions.begin(), source_directions.end());
  if (ids.size() != source_directions.size())
    throw std::invalid_argument("scene source directions must be distinct");
  if (source_directions.size() >= mic_count)
    throw std::invalid_argument("scene needs fewer sources than microphones");
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
}

spectral::MultichannelSignal simulate_scene(const AtfSet& atfs, const SceneConfig& cfg) {
  cfg.validate(atfs.mic_count);

  const size_t n = static_cast<size_t>(
      std::llround(cfg.duration_s * static_cast<double>(atfs.sample_rate)));
  spectral::MultichannelSignal out;
  out.sample_rate = atfs.sample_rate;
  out.samples.assign(atfs.mic_count, std::vector<double>(n, 0.0));

  for (int id : cfg.source_directions) {
    const size_t d = atfs.index_of(id);
    Rng rng(mix_seed(cfg.seed, {kSaltSource, static_cast<uint64_t>(id)}));
    std::vector<double> src(n);
    for (double& s : src) s = rng.normal();
    for (size_t m = 0; m < atfs.mic_count; ++m) {
      const double* h = atfs.fir(d, m);
      std::vector<double>& y = out.samples[m];
      for (size_t i = 0; i < n; ++i) {
        const size_t jmax = std::min(atfs.fir_len - 1, i);
        double acc = 0.0;
        for (size_t j = 0; j <= jmax; ++j) acc += h[j] * src[i - j];
        y[i] += acc;
      }
    }
  }

  if (std::isinf(cfg.snr_db)) return out;
  return add_noise(out, cfg.snr_db, mix_seed(cfg.seed, {kSaltNoise}));
}

spectral::MultichannelSignal add_noise(const spectral::MultichannelSignal& signal,
                                       double snr_db, uint64_t seed) {
  signal.validate();
  if (std::isinf(snr_db) && snr_db > 0) return signal;  // no-noise sentinel

  double p_signal = 0.0;
  for (const auto& ch : signal.samples)
    for (double v : ch) p_signal += v * v;
  if (p_signal == 0.0) throw std::invalid_argument("add_noise: zero-power input");

  // draw the noise, then rescale its realized power to hit the target exactly
  std::vector<std::vector<double>> noise(signal.channels(),
                                         std::vector<double>(signal.length()));
  double p_noise = 0.0;
  for (size_t m = 0; m < signal.channels(); ++m) {
    Rng rng(mix_seed(seed, {static_cast<uint64_t>(m)}));
    for (double& v : noise[m]) {
      v = rng.normal();
      p_noise += v * v;
    }
  }
  const double target = p_signal / std::pow(10.0, snr_db / 10.0);
  const double scale = std::sqrt(target / p_noise);

  spectral::MultichannelSignal out = signal;
  for (size_t m = 0; m < out.channels(); ++m)
    for (size_t i = 0; i < out.length(); ++i) out.samples[m][i] += scale * noise[m][i];
  return out;
}

spectral::SpectrogramTensor synthesize_tensor(const AtfSet& atfs,
                                              const SceneConfig& cfg,
                                              size_t frame_count,
                                              const spectral::StftConfig& stft_cfg) {
  cfg.validate(atfs.mic_count);
  if (frame_count == 0) throw std::invalid_argument("frame_count must be >= 1");

  spectral::SpectrogramTensor spec;
  spec.freq_count = atfs.freq_count;
  spec.frame_count = frame_count;
  spec.channel_count = atfs.mic_count;
  spec.sample_rate = atfs.sample_rate;
  spec.config = stft_cfg;
  spec.bins.assign(spec.freq_count * frame_count * spec.channel_count, cplx(0.0, 0.0));

  for (int id : cfg.source_directions) {
    const size_t d = atfs.index_of(id);
    Rng rng(mix_seed(cfg.seed, {kSaltSpec, static_cast<uint64_t>(id)}));
    for (size_t f = 0; f < spec.freq_count; ++f)
      for (size_t t = 0; t < frame_count; ++t) {
        const cplx s = rng.normal_complex();
        for (size_t m = 0; m < spec.channel_count; ++m)
          spec.at(f, t, m) += atfs.at(d, f, m) * s;
      }
  }

  if (!std::isinf(cfg.snr_db)) {
    double p_signal = 0.0;
    for (const cplx& b : spec.bins) p_signal += std::norm(b);
    if (p_signal == 0.0) throw std::invalid_argument("synthesize_tensor: zero-power scene");
    std::vector<cplx> noise(spec.bins.size());
    Rng rng(mix_seed(cfg.seed, {kSaltNoise, kSaltSpec}));
    double p_noise = 0.0;
    for (cplx& v : noise) {
      v = rng.normal_complex();
      p_noise += std::norm(v);
    }
    const double scale =
        std::sqrt(p_signal / (p_noise * std::pow(10.0, cfg.snr_db / 10.0)));
    for (size_t i = 0; i < spec.bins.size(); ++i) spec.bins[i] += scale * noise[i];
  }
  return spec;
}

namespace {

constexpr char kAtfMagic[8] = {'A', 'T', 'F', 'S', 'E', 'T', '0', '1'};

void write_bytes(std::ofstream& out, const void* data, size_t len) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

}  // namespace

void save_atf(const AtfSet& atfs, const std::string& path) {
  nlohmann::json header;
  header["kind"] = atfs.kind == AtfKind::FreeField ? "free_field" : "synthetic_room";
  header["mic_count"] = atfs.mic_count;
  header["freq_count"] = atfs.freq_count;
  header["sample_rate"] = atfs.sample_rate;
  header["seed"] = atfs.seed;
  header["bulk_delay_samples"] = atfs.bulk_delay_samples;
  header["fir_len"] = atfs.fir_len;
  auto dirs = nlohmann::json::array();
  for (const auto& d : atfs.directions)
    dirs.push_back({{"id", d.id}, {"azimuth_deg", d.azimuth_deg},
                    {"elevation_deg", d.elevation_deg}});
  header["directions"] = dirs;

  const std::string htext = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  write_bytes(out, kAtfMagic, sizeof(kAtfMagic));
  const uint64_t hlen = htext.size();
  write_bytes(out, &hlen, sizeof(hlen));
  write_bytes(out, htext.data(), htext.size());
  write_bytes(out, atfs.atf.data(), atfs.atf.size() * sizeof(cplx));
  write_bytes(out, atfs.firs.data(), atfs.firs.size() * sizeof(double));
  if (!out) throw DataError("write failed: " + path);
}

AtfSet load_atf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kAtfMagic, sizeof(magic)) != 0)
    throw DataError("not a transfer-function set file: " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen > (1u << 20)) throw DataError("corrupt header: " + path);
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError("corrupt header: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad header json: ") + e.what());
  }

  AtfSet atfs;
  try {
    const std::string kind = header.at("kind").get<std::string>();
    atfs.kind = kind == "free_field" ? AtfKind::FreeField : AtfKind::SyntheticRoom;
    atfs.mic_count = header.at("mic_count").get<size_t>();
    atfs.freq_count = header.at("freq_count").get<size_t>();
    atfs.sample_rate = header.at("sample_rate").get<int>();
    atfs.seed = header.at("seed").get<uint64_t>();
    atfs.bulk_delay_samples = header.at("bulk_delay_samples").get<double>();
    atfs.fir_len = header.at("fir_len").get<size_t>();
    for (const auto& jd : header.at("directions")) {
      Direction d;
      d.id = jd.at("id").get<int>();
      d.azimuth_deg = jd.at("azimuth_deg").get<double>();
      d.elevation_deg = jd.at("elevation_deg").get<double>();
      atfs.directions.push_back(d);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad header field: ") + e.what());
  }

  const size_t n_atf = atfs.directions.size() * atfs.freq_count * atfs.mic_count;
  const size_t n_fir = atfs.directions.size() * atfs.mic_count * atfs.fir_len;
  atfs.atf.resize(n_atf);
  atfs.firs.resize(n_fir);
  in.read(reinterpret_cast<char*>(atfs.atf.data()),
          static_cast<std::streamsize>(n_atf * sizeof(cplx)));
  in.read(reinterpret_cast<char*>(atfs.firs.data()),
          static_cast<std::streamsize>(n_fir * sizeof(double)));
  if (!in) throw DataError("truncated payload: " + path);
  atfs.validate();
  return atfs;
}

}  // namespace grtfloc::acoustics
