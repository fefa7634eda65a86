// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "melstream/error.hpp"

namespace melstream {

double AudioBuffer::peak() const {
  double p = 0.0;
  for (double s : samples) p = std::max(p, std::abs(s));
  return p;
}

double AudioBuffer::power() const {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

void AudioBuffer::validate() const {
  require(sample_rate > 0, "audio: sample rate must be positive");
  require(!samples.empty(), "audio: buffer is empty");
  for (double s : samples) require(std::isfinite(s), "audio: non-finite sample");
}

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("wav: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw ValidationError("wav: not a RIFF/WAVE file: " + path.string());
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    std::uint32_t len = read_u32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0 && avail >= 16) {
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible && avail >= 26) format = read_u16(bytes.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = avail;
    }
    pos = body + len + (len & 1u);
  }
  if (channels == 0 || data == nullptr) {
    throw ValidationError("wav: missing fmt or data chunk: " + path.string());
  }
  if (channels != 1) {
    throw ValidationError("wav: expected mono input, got " + std::to_string(channels) +
                          " channels: " + path.string());
  }
  AudioBuffer out;
  out.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    std::size_t n = data_len / 2;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = static_cast<std::int16_t>(read_u16(data + 2 * i));
      out.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    std::size_t n = data_len / 4;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t raw = read_u32(data + 4 * i);
      float f;
      std::memcpy(&f, &raw, 4);
      out.samples[i] = f;
    }
  } else {
    throw ValidationError("wav: unsupported sample format (need 16-bit PCM or float32): " +
                          path.string());
  }
  if (out.sample_rate != kSampleRate) {
    require(out.sample_rate > 0, "wav: invalid sample rate");
    out.samples = resample(out.samples, out.sample_rate, kSampleRate);
    out.sample_rate = kSampleRate;
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  require(audio.sample_rate > 0, "wav: invalid sample rate");
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  std::vector<std::uint8_t> b;
  b.reserve(44 + 2 * static_cast<std::size_t>(n));
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, 36 + 2 * n);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(b, 16);
  put_u16(b, kFormatPcm);
  put_u16(b, 1);
  put_u32(b, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(b, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(b, 2);
  put_u16(b, 16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, 2 * n);
  for (double s : audio.samples) {
    double q = std::nearbyint(s * 32768.0);
    q = std::clamp(q, -32768.0, 32767.0);
    put_u16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("wav: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw RuntimeFailure("wav: write failed for " + path.string());
}

std::vector<double> resample(const std::vector<double>& in, int from_rate, int to_rate) {
  require(from_rate > 0 && to_rate > 0, "resample: rates must be positive");
  if (from_rate == to_rate || in.empty()) return in;
  constexpr int kZeroCrossings = 32;
  const double ratio = static_cast<double>(to_rate) / from_rate;
  // Low-pass at the lower of the two Nyquist rates, slightly inside it.
  const double cutoff = 0.95 * std::min(1.0, ratio);
  const double half_width = kZeroCrossings / cutoff;
  const auto n_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(in.size()) * ratio));
  std::vector<double> out(n_out);
  for (std::size_t m = 0; m < n_out; ++m) {
    const double center = static_cast<double>(m) / ratio;
    const auto lo = static_cast<long>(std::ceil(center - half_width));
    const auto hi = static_cast<long>(std::floor(center + half_width));
    double acc = 0.0;
    for (long n = std::max(0L, lo); n <= hi && n < static_cast<long>(in.size()); ++n) {
      const double d = static_cast<double>(n) - center;
      const double x = d * cutoff;
      const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * d / half_width);
      acc += in[static_cast<std::size_t>(n)] * cutoff * sinc * win;
    }
    out[m] = acc;
  }
  return out;
}

}  // namespace melstream
