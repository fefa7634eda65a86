// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "melstream/dsp.hpp"
#include "melstream/error.hpp"
#include "melstream/synthdata.hpp"

using namespace melstream;
using namespace melstream::dsp;

namespace {

AudioBuffer noise(std::size_t n, std::uint64_t seed, double sigma = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  AudioBuffer a;
  a.samples.resize(n);
  for (double& v : a.samples) v = g(rng);
  return a;
}

// Interior relative L2 error over samples covered by full overlap.
double interior_rel_error(const AudioBuffer& x, const AudioBuffer& y, std::size_t frame_len) {
  double num = 0.0, den = 0.0;
  const std::size_t end = std::min(x.samples.size(), y.samples.size()) - frame_len;
  for (std::size_t i = frame_len; i < end; ++i) {
    num += (x.samples[i] - y.samples[i]) * (x.samples[i] - y.samples[i]);
    den += x.samples[i] * x.samples[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("frame count follows 1 + floor((len - frame) / hop)") {
  const auto cfg = StftConfig::speech_enhancement();
  CHECK(frame_count(1024, cfg) == 3);
  CHECK(frame_count(512, cfg) == 1);
  CHECK(frame_count(511, cfg) == 0);
  CHECK(frame_count(48000, cfg) == 186);
  AudioBuffer a;
  a.samples.assign(1024, 0.0);
  CHECK(stft(a, cfg).frames == 3);
}

TEST_CASE("stft of silence is zero and short input is rejected") {
  AudioBuffer a;
  a.samples.assign(16000, 0.0);
  const auto s = stft(a, StftConfig::speech_enhancement());
  CHECK(s.bins == 257);
  for (const auto& v : s.values) CHECK(std::abs(v) == 0.0);
  AudioBuffer short_one;
  short_one.samples.assign(100, 0.1);
  CHECK_THROWS_AS(stft(short_one, StftConfig::speech_enhancement()), ValidationError);
}

TEST_CASE("stft frame matches a direct DFT and peaks at the 1 kHz bin") {
  const auto cfg = StftConfig::speech_enhancement();
  AudioBuffer a;
  a.samples.resize(2048);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    a.samples[i] = std::sin(2.0 * std::numbers::pi * 1000.0 * i / 16000.0);
  }
  const auto s = stft(a, cfg);
  const auto w = make_window(cfg);
  const std::size_t t = 2;
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 0; k < s.bins; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < cfg.frame_len; ++n) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * n) / cfg.fft_size;
      acc += a.samples[t * cfg.hop + n] * w[n] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    CHECK(std::abs(s.at(t, k) - acc) < 1e-9);
    if (std::abs(s.at(t, k)) > best_mag) {
      best_mag = std::abs(s.at(t, k));
      best = k;
    }
  }
  CHECK(best == 32);
}

TEST_CASE("periodic hann window") {
  const auto w = make_window(StftConfig::speech_enhancement());
  REQUIRE(w.size() == 512);
  CHECK(w[0] == 0.0);
  CHECK(w[256] == doctest::Approx(1.0).epsilon(1e-15));
  for (std::size_t n = 1; n < 512; ++n) CHECK(std::abs(w[n] - w[512 - n]) < 1e-15);
}

TEST_CASE("stft/istft round trip at 50% and 75% overlap") {
  for (const auto& cfg : {StftConfig::speech_enhancement(), StftConfig::asr()}) {
    CHECK(cfg.is_cola());
    const AudioBuffer x = noise(16000, 3);
    CHECK(interior_rel_error(x, istft(stft(x, cfg)), cfg.frame_len) < 1e-6);
    const AudioBuffer sp = synthdata::gen_speech_proxy(5, 1.0);
    CHECK(interior_rel_error(sp, istft(stft(sp, cfg)), cfg.frame_len) < 1e-6);
  }
}

TEST_CASE("istft of zero spectrum is silent and non-COLA hops are rejected") {
  AudioBuffer a;
  a.samples.assign(4096, 0.0);
  const auto y = istft(stft(a, StftConfig::speech_enhancement()));
  for (double v : y.samples) CHECK(v == 0.0);

  StftConfig bad{512, 200, 512};
  AudioBuffer x = noise(4096, 1);
  CHECK_FALSE(bad.is_cola());
  CHECK_THROWS_AS(istft(stft(x, bad)), ValidationError);
}

TEST_CASE("htk mel scale") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-14));
  CHECK(hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-5));
  for (double f : {50.0, 440.0, 3000.0, 8000.0}) CHECK(mel_to_hz(hz_to_mel(f)) == doctest::Approx(f));
}

TEST_CASE("mel filterbank is triangular, non-negative and peaks at band centres") {
  const auto cfg = StftConfig::speech_enhancement();
  const auto fb = mel_filterbank(80, cfg, 16000, 0.0, 8000.0);
  REQUIRE(fb.weights.rows == 80);
  REQUIRE(fb.weights.cols == 257);
  const double step = hz_to_mel(8000.0) / 81.0;
  for (std::size_t m = 0; m < 80; ++m) {
    double peak = 0.0;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < 257; ++k) {
      CHECK(fb.weights(m, k) >= 0.0);
      if (fb.weights(m, k) > peak) {
        peak = fb.weights(m, k);
        arg = k;
      }
    }
    CHECK(peak > 0.0);
    for (std::size_t k = 1; k <= arg; ++k) CHECK(fb.weights(m, k) >= fb.weights(m, k - 1));
    for (std::size_t k = arg + 1; k < 257; ++k) CHECK(fb.weights(m, k) <= fb.weights(m, k - 1));
    // the peak bin is one of the two bins around the centre frequency
    const double centre = mel_to_hz(step * static_cast<double>(m + 1));
    CHECK(std::abs(static_cast<double>(arg) * 31.25 - centre) <= 31.25);
  }
}

TEST_CASE("mel filterbank rejects empty filters and bad ranges") {
  CHECK_THROWS_AS(mel_filterbank(200, StftConfig::speech_enhancement(), 16000, 0.0, 8000.0),
                  ValidationError);
  CHECK_THROWS_AS(mel_filterbank(80, StftConfig::speech_enhancement(), 16000, 100.0, 9000.0),
                  ValidationError);
}

TEST_CASE("log mel matches a brute-force matrix product") {
  const auto cfg = StftConfig::speech_enhancement();
  const auto fb = mel_filterbank(80, cfg, 16000, 0.0, 8000.0);
  const auto x = synthdata::gen_speech_proxy(9, 1.0);
  const auto spec = stft(x, cfg);
  const auto lm = log_mel(spec, fb);
  REQUIRE(lm.frames() == spec.frames);
  double worst = 0.0;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t m = 0; m < 80; ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k < spec.bins; ++k) {
        const auto v = spec.at(t, k);
        acc += fb.weights(m, k) * (v.real() * v.real() + v.imag() * v.imag());
      }
      worst = std::max(worst, std::abs(lm.values(t, m) - std::log(std::max(acc, 1e-5))));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("log mel floor, gain shift and monotonicity") {
  const auto cfg = StftConfig::speech_enhancement();
  const auto fb = mel_filterbank(80, cfg, 16000, 0.0, 8000.0);
  AudioBuffer z;
  z.samples.assign(4096, 0.0);
  for (double v : log_mel(stft(z, cfg), fb).values.data) CHECK(v == std::log(1e-5));

  const AudioBuffer x = noise(8000, 4, 0.1);
  AudioBuffer y = x;
  for (double& v : y.samples) v *= 2.0;
  const auto a = log_mel(stft(x, cfg), fb).values;
  const auto b = log_mel(stft(y, cfg), fb).values;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    CHECK(b.data[i] >= a.data[i]);
    if (a.data[i] > std::log(1e-5)) CHECK(b.data[i] - a.data[i] == doctest::Approx(2.0 * std::log(2.0)));
  }
  CHECK_THROWS_AS(log_mel(stft(x, StftConfig::asr()), mel_filterbank(80, StftConfig{512, 256, 1024}, 16000, 0.0, 8000.0)),
                  ValidationError);
}

TEST_CASE("peak normalization") {
  AudioBuffer a;
  a.samples = {0.1, -0.5, 0.25};
  const auto r = peak_normalize_to(a, -6.0);
  CHECK(r.gain == doctest::Approx(std::pow(10.0, -6.0 / 20.0) / 0.5).epsilon(1e-14));
  CHECK(r.gain == doctest::Approx(1.0024).epsilon(1e-4));

  AudioBuffer at;
  at.samples = {std::pow(10.0, -3.0 / 20.0), 0.1};
  CHECK(peak_normalize_to(at, -3.0).gain == doctest::Approx(1.0).epsilon(1e-15));

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto p = peak_normalize(a, seed);
    CHECK(p.audio.peak() >= std::pow(10.0, -6.0 / 20.0) - 1e-12);
    CHECK(p.audio.peak() <= std::pow(10.0, -1.0 / 20.0) + 1e-12);
    CHECK(p.gain == peak_normalize(a, seed).gain);
  }
  AudioBuffer silent;
  silent.samples.assign(10, 0.0);
  CHECK_THROWS_AS(peak_normalize(silent, 1), ValidationError);
}

TEST_CASE("griffin-lim resynthesis converges and is deterministic") {
  const auto cfg = StftConfig::speech_enhancement();
  const auto fb = mel_filterbank(80, cfg, 16000, 0.0, 8000.0);
  const auto x = synthdata::gen_speech_proxy(21, 1.0);
  const auto lm = log_mel(stft(x, cfg), fb);
  const auto r = mel_to_waveform(lm, fb, cfg, 60, 5);
  REQUIRE(r.convergence.size() == 60);
  for (std::size_t i = 1; i < r.convergence.size(); ++i) {
    CHECK(r.convergence[i] < r.convergence[i - 1]);
  }
  CHECK(r.audio.samples.size() == (lm.frames() - 1) * cfg.hop + cfg.frame_len);
  const auto again = mel_to_waveform(lm, fb, cfg, 60, 5);
  CHECK(again.audio.samples == r.audio.samples);

  LogMelSpectrogram floor_only{Matrix(lm.frames(), 80, std::log(1e-5)), 1e-5};
  CHECK(mel_to_waveform(floor_only, fb, cfg, 10, 1).audio.peak() < 1e-2);
}
