// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <random>

#include "doctest.h"
#include "melstream/error.hpp"
#include "melstream/features.hpp"

using namespace melstream;
using namespace melstream::features;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -3.0,
                     double hi = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data) v = u(rng);
  return m;
}

}  // namespace

TEST_CASE("frame_context gathers with zero padding") {
  const Matrix y = random_matrix(7, 6, 1);
  for (const ContextConfig cfg : {ContextConfig{3, 0, 2, 2}, ContextConfig{2, 2, 1, 3},
                                  ContextConfig{15, 0, 5, 5}}) {
    const auto fi = frame_context(y, cfg);
    CHECK(fi.along_freq.d2 == cfg.past_frames + cfg.future_frames + 1);
    CHECK(fi.along_time.d2 == cfg.lower_freqs + cfg.upper_freqs + 1);
    for (long t = 0; t < 7; ++t) {
      for (long f = 0; f < 6; ++f) {
        for (long j = 0; j < static_cast<long>(cfg.time_width()); ++j) {
          const long s = t - static_cast<long>(cfg.past_frames) + j;
          const double want = (s < 0 || s >= 7) ? 0.0 : y(s, f);
          CHECK(fi.along_freq(t, f, j) == want);
        }
        for (long j = 0; j < static_cast<long>(cfg.freq_width()); ++j) {
          const long s = f - static_cast<long>(cfg.lower_freqs) + j;
          const double want = (s < 0 || s >= 6) ? 0.0 : y(t, s);
          CHECK(fi.along_time(t, f, j) == want);
        }
      }
    }
  }
}

TEST_CASE("causal context never reads future frames") {
  Matrix y = random_matrix(10, 4, 2);
  const ContextConfig cfg{4, 0, 1, 1};
  const auto a = frame_context(y, cfg);
  for (std::size_t f = 0; f < 4; ++f) y(9, f) += 100.0;
  const auto b = frame_context(y, cfg);
  for (std::size_t t = 0; t < 9; ++t) {
    for (std::size_t f = 0; f < 4; ++f) {
      for (std::size_t j = 0; j < 5; ++j) CHECK(a.along_freq(t, f, j) == b.along_freq(t, f, j));
      for (std::size_t j = 0; j < 3; ++j) CHECK(a.along_time(t, f, j) == b.along_time(t, f, j));
    }
  }
}

TEST_CASE("smoothing weight") {
  CHECK(smoothing_alpha(199.0) == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(smoothing_alpha(200.0) == doctest::Approx(199.0 / 201.0));
  CHECK(smoothing_alpha(3.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(smoothing_alpha(1.0), ValidationError);
}

TEST_CASE("online normalization of a constant input returns the global mean exactly") {
  Matrix y(50, 80, -4.321);
  const auto r = online_normalize(y, NormState::with_length(200.0, -7.25));
  for (double v : r.values.data) CHECK(v == -7.25);
  for (double m : r.mu) CHECK(m == -4.321);
}

TEST_CASE("online normalization matches an unrolled recursion") {
  const Matrix y = random_matrix(40, 5, 3);
  const double alpha = smoothing_alpha(10.0);
  const double big_m = 1.5;
  const auto r = online_normalize(y, NormState::with_length(10.0, big_m));
  double mu = 0.0;
  for (std::size_t t = 0; t < y.rows; ++t) {
    double m = 0.0;
    for (std::size_t f = 0; f < y.cols; ++f) m += y(t, f);
    m /= static_cast<double>(y.cols);
    mu = t == 0 ? m : alpha * mu + (1.0 - alpha) * m;
    CHECK(std::abs(r.mu[t] - mu) < 1e-12);
    for (std::size_t f = 0; f < y.cols; ++f) {
      CHECK(std::abs(r.values(t, f) - (y(t, f) - mu + big_m)) < 1e-12);
    }
  }
}

TEST_CASE("online normalization is causal and step-equivalent") {
  Matrix y = random_matrix(30, 6, 4);
  const auto a = online_normalize(y, NormState::with_length(20.0, 0.0));
  NormState s = NormState::with_length(20.0, 0.0);
  std::vector<double> out(6);
  for (std::size_t t = 0; t < 30; ++t) {
    online_normalize_step(y.row(t), s, out);
    for (std::size_t f = 0; f < 6; ++f) CHECK(out[f] == a.values(t, f));
  }
  for (std::size_t f = 0; f < 6; ++f) y(20, f) = 50.0;
  const auto b = online_normalize(y, NormState::with_length(20.0, 0.0));
  for (std::size_t t = 0; t < 20; ++t) CHECK(a.mu[t] == b.mu[t]);
}

TEST_CASE("online normalization cancels a constant log-gain offset") {
  const Matrix y = random_matrix(25, 8, 5);
  Matrix shifted = y;
  for (double& v : shifted.data) v += 2.0 * std::log(3.0);
  const auto a = online_normalize(y, NormState::with_length(200.0, -2.0));
  const auto b = online_normalize(shifted, NormState::with_length(200.0, -2.0));
  for (std::size_t i = 0; i < a.values.data.size(); ++i) {
    CHECK(std::abs(a.values.data[i] - b.values.data[i]) < 1e-12);
  }
}

TEST_CASE("online normalization rejects non-finite frames") {
  Matrix y(2, 3, 0.0);
  y(1, 1) = INFINITY;
  CHECK_THROWS_AS(online_normalize(y, NormState{}), ValidationError);
}

TEST_CASE("mean track apply and remove are inverse") {
  const Matrix y = random_matrix(12, 7, 6);
  std::vector<double> mu(12);
  for (std::size_t t = 0; t < 12; ++t) mu[t] = 0.3 * static_cast<double>(t) - 1.0;
  const Matrix back = remove_mean_track(apply_mean_track(y, mu, 4.0), mu, 4.0);
  for (std::size_t i = 0; i < y.data.size(); ++i) CHECK(std::abs(back.data[i] - y.data[i]) < 1e-12);
  CHECK_THROWS_AS(apply_mean_track(y, std::vector<double>(3), 0.0), ValidationError);
}

TEST_CASE("asr normalization removes per-frequency means") {
  Matrix y(2, 2);
  y.data = {1.0, 3.0, 3.0, 5.0};
  const Matrix z = asr_normalize(y);
  CHECK(z.data == std::vector<double>{-1.0, -1.0, 1.0, 1.0});

  const Matrix r = asr_normalize(random_matrix(33, 9, 7));
  for (std::size_t f = 0; f < 9; ++f) {
    double acc = 0.0;
    for (std::size_t t = 0; t < 33; ++t) acc += r(t, f);
    CHECK(std::abs(acc / 33.0) < 1e-12);
  }
}

TEST_CASE("global mean averages every bin of every utterance") {
  std::vector<Matrix> corpus{random_matrix(3, 4, 8), random_matrix(5, 4, 9)};
  double acc = 0.0;
  for (const auto& m : corpus) {
    for (double v : m.data) acc += v;
  }
  CHECK(compute_global_mean(corpus) == doctest::Approx(acc / 32.0).epsilon(1e-14));
  CHECK_THROWS_AS(compute_global_mean(std::vector<Matrix>{}), ValidationError);
}

TEST_CASE("offline pair normalization applies the noisy gain to both") {
  AudioBuffer noisy, clean;
  noisy.samples = {0.1, -0.5, 0.2, 0.05};
  clean.samples = {0.05, -0.2, 0.1, 0.0};
  const auto [n, c] = normalize_offline_pair(noisy, clean, 11);
  const double g = n.samples[1] / noisy.samples[1];
  CHECK(n.peak() <= std::pow(10.0, -1.0 / 20.0) + 1e-12);
  CHECK(n.peak() >= std::pow(10.0, -6.0 / 20.0) - 1e-12);
  for (std::size_t i = 0; i < 4; ++i) CHECK(c.samples[i] == doctest::Approx(g * clean.samples[i]));

  // noisy peak 0.25 at -6 dBFS: gain 10^(-6/20) / 0.25, clean peak 0.1 follows
  AudioBuffer qn, qc;
  qn.samples = {0.25, -0.1};
  qc.samples = {0.1, 0.05};
  const auto r = dsp::peak_normalize_to(qn, -6.0);
  CHECK(r.gain == doctest::Approx(std::pow(10.0, -6.0 / 20.0) / 0.25).epsilon(1e-14));
  CHECK(r.gain == doctest::Approx(2.0047).epsilon(1e-4));
  CHECK(qc.peak() * r.gain == doctest::Approx(0.2005).epsilon(1e-3));

  const auto [same_a, same_b] = normalize_offline_pair(noisy, noisy, 5);
  CHECK(same_a.samples == same_b.samples);

  clean.samples.pop_back();
  CHECK_THROWS_AS(normalize_offline_pair(noisy, clean, 1), ValidationError);
}
