#include "grtfloc/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "grtfloc/common.hpp"

#include "json.hpp"

namespace grtfloc::audio {

namespace {

void put_u32(std::vector<char>& buf, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf.insert(buf.end(), b, b + 4);
}

void put_u16(std::vector<char>& buf, uint16_t v) {
  char b[2];
  std::memcpy(b, &v, 2);
  buf.insert(buf.end(), b, b + 2);
}

uint32_t get_u32(const char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

uint16_t get_u16(const char* p) {
  uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

}  // namespace

void write_wav(const std::string& path, const spectral::MultichannelSignal& signal,
               int bits_per_sample) {
  signal.validate();
  if (bits_per_sample != 16 && bits_per_sample != 32)
    throw std::invalid_argument("write_wav supports 16 (PCM) or 32 (float) bits");

  const uint16_t channels = static_cast<uint16_t>(signal.channels());
  const uint32_t frames = static_cast<uint32_t>(signal.length());
  const uint16_t bytes_per_sample = static_cast<uint16_t>(bits_per_sample / 8);
  const uint32_t data_size = frames * channels * bytes_per_sample;
  const uint16_t format = bits_per_sample == 32 ? 3 : 1;  // IEEE float / PCM

  std::vector<char> buf;
  buf.reserve(44 + data_size);
  buf.insert(buf.end(), {'R', 'I', 'F', 'F'});
  put_u32(buf, 36 + data_size);
  buf.insert(buf.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(buf, 16);
  put_u16(buf, format);
  put_u16(buf, channels);
  put_u32(buf, static_cast<uint32_t>(signal.sample_rate));
  put_u32(buf, static_cast<uint32_t>(signal.sample_rate) * channels * bytes_per_sample);
  put_u16(buf, static_cast<uint16_t>(channels * bytes_per_sample));
  put_u16(buf, static_cast<uint16_t>(bits_per_sample));
  buf.insert(buf.end(), {'d', 'a', 't', 'a'});
  put_u32(buf, data_size);

  for (uint32_t i = 0; i < frames; ++i) {
    for (uint16_t m = 0; m < channels; ++m) {
      const double v = signal.samples[m][i];
      if (bits_per_sample == 32) {
        const float f = static_cast<float>(v);
        char b[4];
        std::memcpy(b, &f, 4);
        buf.insert(buf.end(), b, b + 4);
      } else {
        const long scaled = std::lrint(v * 32768.0);
        const int16_t q = static_cast<int16_t>(std::clamp(scaled, -32768L, 32767L));
        char b[2];
        std::memcpy(b, &q, 2);
        buf.insert(buf.end(), b, b + 2);
      }
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed: " + path);
}

spectral::MultichannelSignal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw DataError("not a WAV file: " + path);

  // walk chunks; require fmt before data
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  size_t data_off = 0, data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const uint32_t chunk_len = get_u32(buf.data() + pos + 4);
    const char* tag = buf.data() + pos;
    const size_t body = pos + 8;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (body + 16 > buf.size()) throw DataError("truncated fmt chunk: " + path);
      format = get_u16(buf.data() + body);
      channels = get_u16(buf.data() + body + 2);
      sample_rate = get_u32(buf.data() + body + 4);
      bits = get_u16(buf.data() + body + 14);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);
  }
  if (channels == 0 || data_off == 0) throw DataError("missing WAV chunks: " + path);
  if (data_off + data_len > buf.size()) throw DataError("truncated WAV data: " + path);

  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32)
    throw DataError("unsupported WAV encoding (need 16-bit PCM or 32-bit float): " + path);

  const size_t bytes_per_sample = bits / 8;
  const size_t frames = data_len / (channels * bytes_per_sample);

  spectral::MultichannelSignal signal;
  signal.sample_rate = static_cast<int>(sample_rate);
  signal.samples.assign(channels, std::vector<double>(frames));
  const char* p = buf.data() + data_off;
  for (size_t i = 0; i < frames; ++i) {
    for (size_t m = 0; m < channels; ++m) {
      if (f32) {
        float v;
        std::memcpy(&v, p, 4);
        signal.samples[m][i] = static_cast<double>(v);
        p += 4;
      } else {
        int16_t v;
        std::memcpy(&v, p, 2);
        signal.samples[m][i] = static_cast<double>(v) / 32768.0;
        p += 2;
      }
    }
  }
  return signal;
}

void write_raw_f64(const std::string& path, const spectral::MultichannelSignal& signal) {
  signal.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  const size_t frames = signal.length();
  for (size_t i = 0; i < frames; ++i)
    for (size_t m = 0; m < signal.channels(); ++m)
      out.write(reinterpret_cast<const char*>(&signal.samples[m][i]), 8);
  if (!out) throw DataError("write failed: " + path);

  nlohmann::json sidecar;
  sidecar["channels"] = signal.channels();
  sidecar["sample_rate"] = signal.sample_rate;
  std::ofstream side(path + ".json");
  if (!side) throw DataError("cannot open for writing: " + path + ".json");
  side << sidecar.dump(2) << "\n";
}

spectral::MultichannelSignal read_raw_f64(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw DataError("missing sidecar header: " + path + ".json");
  nlohmann::json sidecar;
  try {
    side >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad sidecar json: ") + e.what());
  }

  size_t channels = 0;
  int sample_rate = 0;
  try {
    channels = sidecar.at("channels").get<size_t>();
    sample_rate = sidecar.at("sample_rate").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad sidecar field: ") + e.what());
  }
  if (channels == 0) throw DataError("sidecar declares zero channels: " + path);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (buf.size() % (8 * channels) != 0)
    throw DataError("raw payload not a whole number of frames: " + path);
  const size_t frames = buf.size() / (8 * channels);

  spectral::MultichannelSignal signal;
  signal.sample_rate = sample_rate;
  signal.samples.assign(channels, std::vector<double>(frames));
  const char* p = buf.data();
  for (size_t i = 0; i < frames; ++i)
    for (size_t m = 0; m < channels; ++m) {
      std::memcpy(&signal.samples[m][i], p, 8);
      p += 8;
    }
  return signal;
}

spectral::MultichannelSignal read_audio(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".wav" || ext == ".WAV") return read_wav(path);
  return read_raw_f64(path);
}

}  // namespace grtfloc::audio
