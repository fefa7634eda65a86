// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <new>
#include <random>
#include <vector>

#include "doctest.h"
#include "melstream/error.hpp"
#include "melstream/model.hpp"

using namespace melstream;
using namespace melstream::model;

namespace {

std::atomic<std::size_t> g_allocations{0};

}  // namespace

void* operator new(std::size_t n) {
  ++g_allocations;
  if (void* p = std::malloc(n == 0 ? 1 : n)) return p;
  throw std::bad_alloc();
}
void operator delete(void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }

namespace {

using Vec = std::vector<double>;
using Grid = std::vector<std::vector<Vec>>;  // [t][f] -> D vector

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec lin(const Vec& x, const NamedArray& w, const NamedArray& b) {
  const std::size_t out = b.values.size();
  Vec y(b.values);
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (std::size_t j = 0; j < out; ++j) y[j] += x[k] * w.values[k * out + j];
  }
  return y;
}

// Runs one LSTM over `seq` in the given order and returns outputs by position.
std::vector<Vec> ref_lstm(const Parameters& p, const std::string& pre, const std::vector<Vec>& seq,
                          bool reverse) {
  const NamedArray& wi = p.at(pre + "w_ih");
  const NamedArray& wh = p.at(pre + "w_hh");
  const NamedArray& b = p.at(pre + "bias");
  const std::size_t h = b.values.size() / 4;
  Vec hs(h, 0.0), cs(h, 0.0);
  std::vector<Vec> out(seq.size());
  for (std::size_t n = 0; n < seq.size(); ++n) {
    const std::size_t s = reverse ? seq.size() - 1 - n : n;
    Vec a = b.values;
    for (std::size_t k = 0; k < seq[s].size(); ++k) {
      for (std::size_t j = 0; j < 4 * h; ++j) a[j] += seq[s][k] * wi.values[k * 4 * h + j];
    }
    for (std::size_t k = 0; k < h; ++k) {
      for (std::size_t j = 0; j < 4 * h; ++j) a[j] += hs[k] * wh.values[k * 4 * h + j];
    }
    for (std::size_t j = 0; j < h; ++j) {
      cs[j] = sig(a[h + j]) * cs[j] + sig(a[j]) * std::tanh(a[2 * h + j]);
      hs[j] = sig(a[3 * h + j]) * std::tanh(cs[j]);
    }
    out[s] = hs;
  }
  return out;
}

// Straight-line reference of the whole network from its description.
Matrix ref_forward(const ModelConfig& c, const Parameters& p, const Matrix& y) {
  const long tt = static_cast<long>(y.rows), ff = static_cast<long>(y.cols);
  auto at = [&](long t, long f) {
    return (t < 0 || t >= tt || f < 0 || f >= ff) ? 0.0 : y(t, f);
  };
  Grid ef(tt, std::vector<Vec>(ff)), et(tt, std::vector<Vec>(ff));
  for (long t = 0; t < tt; ++t) {
    for (long f = 0; f < ff; ++f) {
      Vec a, b;
      for (long j = -static_cast<long>(c.context.past_frames);
           j <= static_cast<long>(c.context.future_frames); ++j) {
        a.push_back(at(t + j, f));
      }
      for (long j = -static_cast<long>(c.context.lower_freqs);
           j <= static_cast<long>(c.context.upper_freqs); ++j) {
        b.push_back(at(t, f + j));
      }
      ef[t][f] = lin(a, p.at("embed_freq.weight"), p.at("embed_freq.bias"));
      et[t][f] = lin(b, p.at("embed_time.weight"), p.at("embed_time.bias"));
    }
  }
  Grid s;
  for (std::size_t k = 0; k < c.n_blocks; ++k) {
    const std::string pre = "block" + std::to_string(k) + ".";
    Grid z = ef;
    if (k > 0) {
      for (long t = 0; t < tt; ++t) {
        for (long f = 0; f < ff; ++f) {
          for (std::size_t i = 0; i < c.hidden_d; ++i) z[t][f][i] += s[t][f][i];
        }
      }
    }
    Grid w(tt, std::vector<Vec>(ff));
    for (long t = 0; t < tt; ++t) {
      const auto fw = ref_lstm(p, pre + "fullband.fwd.", z[t], false);
      const auto bw = ref_lstm(p, pre + "fullband.bwd.", z[t], true);
      for (long f = 0; f < ff; ++f) {
        Vec h = fw[f];
        h.insert(h.end(), bw[f].begin(), bw[f].end());
        const Vec g = lin(h, p.at(pre + "gate.weight"), p.at(pre + "gate.bias"));
        w[t][f].resize(c.hidden_d);
        for (std::size_t i = 0; i < c.hidden_d; ++i) w[t][f][i] = et[t][f][i] + sig(g[i]) * h[i];
      }
    }
    s.assign(tt, std::vector<Vec>(ff));
    for (long f = 0; f < ff; ++f) {
      std::vector<Vec> seq(tt);
      for (long t = 0; t < tt; ++t) seq[t] = w[t][f];
      const auto fw = ref_lstm(p, pre + "subband.fwd.", seq, false);
      if (c.mode == Mode::kOnline) {
        for (long t = 0; t < tt; ++t) s[t][f] = fw[t];
      } else {
        const auto bw = ref_lstm(p, pre + "subband.bwd.", seq, true);
        for (long t = 0; t < tt; ++t) {
          Vec h = fw[t];
          h.insert(h.end(), bw[t].begin(), bw[t].end());
          s[t][f] = lin(h, p.at(pre + "subband.proj.weight"), p.at(pre + "subband.proj.bias"));
        }
      }
    }
  }
  Matrix out(tt, ff);
  for (long t = 0; t < tt; ++t) {
    for (long f = 0; f < ff; ++f) out(t, f) = lin(s[t][f], p.at("head.weight"), p.at("head.bias"))[0];
  }
  return out;
}

ModelConfig small(Mode mode, std::size_t f = 4, std::size_t d = 8, std::size_t blocks = 1) {
  ModelConfig c;
  c.mode = mode;
  c.f_mel = f;
  c.hidden_d = d;
  c.fullband_hidden_per_dir = d / 2;
  c.subband_hidden = mode == Mode::kOnline ? d : d - 3;
  c.n_blocks = blocks;
  c.context = {2, mode == Mode::kOnline ? 0u : 2u, 1, 1};
  c.norm_mode = mode == Mode::kOnline ? NormMode::kOnlineRecursive : NormMode::kOfflineGain;
  return c;
}

Matrix random_logmel(std::size_t t, std::size_t f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(-3.0, 2.0);
  Matrix m(t, f);
  for (double& v : m.data) v = g(rng);
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST_CASE("gate oracles") {
  const std::size_t d = 5, rows = 3;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> h(rows * d), w(d * d), b(d), out(rows * d);
  for (double& v : h) v = g(rng);
  std::vector<double> zw(d * d, 0.0), zb(d, 0.0);
  gate(h.data(), rows, d, zw.data(), zb.data(), out.data());
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(out[i] == 0.5 * h[i]);

  std::vector<double> big(d, 50.0);
  gate(h.data(), rows, d, zw.data(), big.data(), out.data());
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(std::abs(out[i] - h[i]) < 1e-10);

  for (double& v : w) v = g(rng);
  for (double& v : b) v = g(rng);
  gate(h.data(), rows, d, w.data(), b.data(), out.data());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      double a = b[j];
      for (std::size_t k = 0; k < d; ++k) a += h[r * d + k] * w[k * d + j];
      CHECK(std::abs(out[r * d + j] - sig(a) * h[r * d + j]) < 1e-12);
    }
  }
}

TEST_CASE("forward matches an independent straight-line reference") {
  for (Mode mode : {Mode::kOnline, Mode::kOffline}) {
    for (std::size_t blocks : {1u, 2u}) {
      const ModelConfig c = small(mode, 4, 8, blocks);
      const Parameters p = init_parameters(c, 42 + blocks);
      const Matrix y = random_logmel(3, 4, 7);
      const Matrix got = enhance(c, p, y);
      REQUIRE(got.rows == 3);
      REQUIRE(got.cols == 4);
      CHECK(max_abs_diff(got, ref_forward(c, p, y)) < 1e-10);
    }
  }
}

TEST_CASE("output shape follows the input for any frame count") {
  const ModelConfig c = small(Mode::kOffline, 6, 8);
  const Parameters p = init_parameters(c, 3);
  for (std::size_t t : {1u, 2u, 17u}) {
    const Matrix out = enhance(c, p, random_logmel(t, 6, t));
    CHECK(out.rows == t);
    CHECK(out.cols == 6);
  }
}

TEST_CASE("online output is exactly causal") {
  const ModelConfig c = small(Mode::kOnline, 5, 8, 2);
  const Parameters p = init_parameters(c, 4);
  Matrix y = random_logmel(12, 5, 8);
  const Matrix a = enhance(c, p, y);
  Matrix longer(13, 5);
  std::copy(y.data.begin(), y.data.end(), longer.data.begin());
  for (std::size_t f = 0; f < 5; ++f) longer(12, f) = 9.0;
  const Matrix b = enhance(c, p, longer);
  for (std::size_t f = 0; f < 5; ++f) y(8, f) += 5.0;
  const Matrix e = enhance(c, p, y);
  for (std::size_t t = 0; t < 12; ++t) {
    for (std::size_t f = 0; f < 5; ++f) {
      CHECK(a(t, f) == b(t, f));
      if (t < 8) CHECK(a(t, f) == e(t, f));
    }
  }
}

TEST_CASE("offline output sees future frames") {
  const ModelConfig c = small(Mode::kOffline, 5, 8);
  const Parameters p = init_parameters(c, 5);
  Matrix y = random_logmel(10, 5, 9);
  const Matrix a = enhance(c, p, y);
  for (std::size_t f = 0; f < 5; ++f) y(9, f) += 5.0;
  CHECK(max_abs_diff(a, enhance(c, p, y)) > 0.0);
}

TEST_CASE("streaming equals batch bit for bit") {
  const ModelConfig c = small(Mode::kOnline, 6, 8, 2);
  const Parameters p = init_parameters(c, 6);
  const Matrix y = random_logmel(100, 6, 10);
  const Matrix batch = enhance(c, p, y);
  const Matrix stream = forward_streaming(c, p, y);
  CHECK(stream == batch);

  Matrix first(1, 6);
  std::copy_n(y.data.begin(), 6, first.data.begin());
  const Matrix one = enhance(c, p, first);
  for (std::size_t f = 0; f < 6; ++f) CHECK(one(0, f) == batch(0, f));

  StreamingModel sm(c, p);
  std::vector<double> out(6);
  for (std::size_t t = 0; t < 10; ++t) sm.step(y.row(t), out);
  sm.reset();
  for (std::size_t t = 0; t < 3; ++t) {
    sm.step(y.row(t), out);
    for (std::size_t f = 0; f < 6; ++f) CHECK(out[f] == batch(t, f));
  }
}

TEST_CASE("streaming step does not allocate") {
  const ModelConfig c = small(Mode::kOnline, 6, 8, 2);
  const Parameters p = init_parameters(c, 7);
  const Matrix y = random_logmel(20, 6, 11);
  StreamingModel sm(c, p);
  std::vector<double> out(6);
  sm.step(y.row(0), out);
  const std::size_t before = g_allocations.load();
  for (std::size_t t = 1; t < 20; ++t) sm.step(y.row(t), out);
  CHECK(g_allocations.load() == before);
}

TEST_CASE("streaming refuses offline configurations") {
  const ModelConfig c = small(Mode::kOffline);
  CHECK_THROWS_AS(StreamingModel(c, init_parameters(c, 1)), ValidationError);
}

TEST_CASE("initialization is deterministic and bounded") {
  const ModelConfig c = small(Mode::kOffline, 4, 8, 2);
  CHECK(init_parameters(c, 9) == init_parameters(c, 9));
  CHECK_FALSE(init_parameters(c, 9) == init_parameters(c, 10));
  const Parameters p = init_parameters(c, 9);
  CHECK(p.scalar_count() == param_count(c));
  const NamedArray& b = p.at("block0.fullband.fwd.bias");
  const std::size_t h = c.fullband_hidden_per_dir;
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (std::size_t j = 0; j < 4 * h; ++j) {
    const double centre = (j >= h && j < 2 * h) ? 1.0 : 0.0;
    CHECK(std::abs(b.values[j] - centre) <= bound);
  }
  CHECK(parameter_layout(c).congruent_with(p));
}

TEST_CASE("full-size parameter counts") {
  const std::size_t online = param_count(ModelConfig::full(Mode::kOnline));
  const std::size_t offline = param_count(ModelConfig::full(Mode::kOffline));
  MESSAGE("online parameters: " << online << ", offline parameters: " << offline);
  CHECK(std::abs(static_cast<double>(online) / 2.2e6 - 1.0) <= 0.4);
  CHECK(std::abs(static_cast<double>(offline) / 3.3e6 - 1.0) <= 0.4);
  CHECK(online == 1669825);
  CHECK(offline == 2781505);
}

TEST_CASE("parameter count is additive in blocks") {
  for (Mode mode : {Mode::kOnline, Mode::kOffline}) {
    const std::size_t c1 = param_count(small(mode, 4, 8, 1));
    const std::size_t c2 = param_count(small(mode, 4, 8, 2));
    const std::size_t c4 = param_count(small(mode, 4, 8, 4));
    CHECK(c2 > c1);
    CHECK(c4 - c2 == 2 * (c2 - c1));
  }
}

TEST_CASE("config validation") {
  ModelConfig c = small(Mode::kOnline);
  c.hidden_d = 0;
  c.fullband_hidden_per_dir = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small(Mode::kOnline);
  c.context.future_frames = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small(Mode::kOnline);
  c.fullband_hidden_per_dir = 3;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small(Mode::kOnline);
  c.norm_mode = NormMode::kOfflineGain;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_NOTHROW(ModelConfig::full(Mode::kOnline).validate());
  CHECK_NOTHROW(ModelConfig::full(Mode::kOffline).validate());
  CHECK(parse_mode("online") == Mode::kOnline);
  CHECK_THROWS_AS(parse_mode("sideways"), ValidationError);
  CHECK(parse_norm_mode(to_string(NormMode::kAsrUtterance)) == NormMode::kAsrUtterance);
}

TEST_CASE("forward rejects mismatched shapes and parameter sets") {
  const ModelConfig c = small(Mode::kOnline, 4, 8);
  const Parameters p = init_parameters(c, 1);
  CHECK_THROWS_AS(enhance(c, p, random_logmel(3, 5, 1)), ValidationError);
  CHECK_THROWS_AS(enhance(small(Mode::kOnline, 4, 8, 2), p, random_logmel(3, 4, 1)),
                  ValidationError);
}

TEST_CASE("full-band frames are independent outside the context window") {
  // No time context: the full-band output of frame 2 only sees frame 2.
  ModelConfig c = small(Mode::kOffline, 4, 8);
  c.context = {0, 0, 1, 1};
  const Parameters p = init_parameters(c, 12);
  const Matrix y = random_logmel(5, 4, 13);
  features::FramedInput a = features::frame_context(y, c.context);
  ForwardTrace ta, tb;
  forward(c, p, a, &ta);
  Matrix z(5, 4, 0.0);
  for (std::size_t f = 0; f < 4; ++f) z(2, f) = y(2, f);
  forward(c, p, features::frame_context(z, c.context), &tb);
  const std::size_t d = 8;
  for (std::size_t f = 0; f < 4; ++f) {
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(ta.blocks[0].hidden[(2 * 4 + f) * d + i] == tb.blocks[0].hidden[(2 * 4 + f) * d + i]);
    }
  }
}
