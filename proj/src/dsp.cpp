// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/dsp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "fft.hpp"
#include "melstream/error.hpp"

namespace melstream::dsp {

void StftConfig::validate() const {
  require(hop >= 1, "stft: hop must be >= 1");
  require(hop <= frame_len, "stft: hop must not exceed frame_len");
  require(frame_len <= fft_size, "stft: frame_len must not exceed fft_size");
  require(fft_size >= 2, "stft: fft_size must be >= 2");
}

std::vector<double> make_window(const StftConfig& cfg) {
  std::vector<double> w(cfg.frame_len);
  const double n = static_cast<double>(cfg.frame_len);
  for (std::size_t i = 0; i < cfg.frame_len; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  }
  return w;
}

bool StftConfig::is_cola() const {
  if (hop == 0 || hop > frame_len) return false;
  const auto w = make_window(*this);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t n = 0; n < hop; ++n) {
    double acc = 0.0;
    for (std::size_t m = n; m < frame_len; m += hop) acc += w[m];
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
  }
  return lo > 0.0 && (hi - lo) <= 1e-9 * hi;
}

std::size_t frame_count(std::size_t length, const StftConfig& cfg) {
  if (length < cfg.frame_len) return 0;
  return 1 + (length - cfg.frame_len) / cfg.hop;
}

FrameAnalyzer::FrameAnalyzer(const StftConfig& cfg)
    : cfg_(cfg), window_(make_window(cfg)), buffer_(cfg.fft_size, 0.0) {
  cfg_.validate();
}

void FrameAnalyzer::analyze(std::span<const double> frame,
                            std::span<std::complex<double>> out) {
  for (std::size_t i = 0; i < cfg_.frame_len; ++i) buffer_[i] = frame[i] * window_[i];
  std::fill(buffer_.begin() + static_cast<std::ptrdiff_t>(cfg_.frame_len), buffer_.end(), 0.0);
  detail::rfft(cfg_.fft_size, buffer_.data(), out.data());
}

ComplexSpectrogram stft(const AudioBuffer& audio, const StftConfig& cfg) {
  cfg.validate();
  if (audio.samples.size() < cfg.frame_len) {
    throw ValidationError("stft: audio has " + std::to_string(audio.samples.size()) +
                          " samples, shorter than one frame (" +
                          std::to_string(cfg.frame_len) + ")");
  }
  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.frames = frame_count(audio.samples.size(), cfg);
  spec.bins = cfg.bins();
  spec.values.resize(spec.frames * spec.bins);
  FrameAnalyzer analyzer(cfg);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    analyzer.analyze({audio.samples.data() + t * cfg.hop, cfg.frame_len},
                     {spec.values.data() + t * spec.bins, spec.bins});
  }
  return spec;
}

AudioBuffer istft(const ComplexSpectrogram& spec, EdgeMode edges) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (!cfg.is_cola()) {
    throw ValidationError("istft: window/hop pair is not constant-overlap-add (frame_len=" +
                          std::to_string(cfg.frame_len) +
                          ", hop=" + std::to_string(cfg.hop) + ")");
  }
  require(spec.bins == cfg.bins(), "istft: bin count does not match fft_size");
  AudioBuffer out;
  if (spec.frames == 0) return out;
  const std::size_t len = (spec.frames - 1) * cfg.hop + cfg.frame_len;
  out.samples.assign(len, 0.0);
  std::vector<double> norm(len, 0.0);
  const auto w = make_window(cfg);
  std::vector<double> frame(cfg.fft_size);
  const double scale = 1.0 / static_cast<double>(cfg.fft_size);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    detail::irfft(cfg.fft_size, spec.values.data() + t * spec.bins, frame.data());
    const std::size_t off = t * cfg.hop;
    for (std::size_t i = 0; i < cfg.frame_len; ++i) {
      out.samples[off + i] += frame[i] * scale * w[i];
      norm[off + i] += w[i] * w[i];
    }
  }
  double clamp = 0.0;
  if (edges == EdgeMode::kTapered) {
    // Smallest normalizer over one fully overlapped hop.
    clamp = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < cfg.hop; ++n) {
      double acc = 0.0;
      for (std::size_t m = n; m < cfg.frame_len; m += cfg.hop) acc += w[m] * w[m];
      clamp = std::min(clamp, acc);
    }
  }
  for (std::size_t i = 0; i < len; ++i) {
    const double d = std::max(norm[i], clamp);
    out.samples[i] = d > 0.0 ? out.samples[i] / d : 0.0;
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(std::size_t n_mels, const StftConfig& cfg, int sample_rate,
                             double f_min, double f_max) {
  cfg.validate();
  require(n_mels >= 1, "mel_filterbank: n_mels must be >= 1");
  require(sample_rate > 0, "mel_filterbank: sample rate must be positive");
  require(0.0 <= f_min && f_min < f_max && f_max <= sample_rate / 2.0,
          "mel_filterbank: need 0 <= f_min < f_max <= sample_rate / 2");
  const std::size_t bins = cfg.bins();
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }
  MelFilterbank fb;
  fb.f_min = f_min;
  fb.f_max = f_max;
  fb.weights = Matrix(n_mels, bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    bool any = false;
    std::size_t first = bins, last = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(cfg.fft_size);
      const double rise = (f - lo) / (center - lo);
      const double fall = (hi - f) / (hi - center);
      const double v = std::max(0.0, std::min(rise, fall));
      fb.weights(m, k) = v;
      if (v > 0.0) {
        any = true;
        first = std::min(first, k);
        last = k + 1;
      }
    }
    if (!any) {
      throw ValidationError("mel_filterbank: filter " + std::to_string(m) +
                            " covers no FFT bin; too many mel bands (" +
                            std::to_string(n_mels) + ") for fft_size " +
                            std::to_string(cfg.fft_size));
    }
    fb.support.emplace_back(first, last);
  }
  return fb;
}

void log_mel_frame(std::span<const std::complex<double>> bins, const MelFilterbank& fb,
                   double floor, std::span<double> out) {
  const std::size_t k_count = fb.weights.cols;
  const bool ranged = fb.support.size() == fb.weights.rows;
  for (std::size_t m = 0; m < fb.weights.rows; ++m) {
    const double* w = fb.weights.data.data() + m * k_count;
    const std::size_t lo = ranged ? fb.support[m].first : 0;
    const std::size_t hi = ranged ? fb.support[m].second : k_count;
    double acc = 0.0;
    for (std::size_t k = lo; k < hi; ++k) acc += w[k] * std::norm(bins[k]);
    out[m] = std::log(std::max(acc, floor));
  }
}

LogMelSpectrogram log_mel(const ComplexSpectrogram& spec, const MelFilterbank& fb,
                          double floor) {
  require(floor > 0.0, "log_mel: floor must be positive");
  if (fb.weights.cols != spec.bins) {
    throw ValidationError("log_mel: filterbank has " + std::to_string(fb.weights.cols) +
                          " columns but spectrogram has " + std::to_string(spec.bins) +
                          " bins");
  }
  LogMelSpectrogram out;
  out.floor = floor;
  out.values = Matrix(spec.frames, fb.n_mels());
  for (std::size_t t = 0; t < spec.frames; ++t) {
    log_mel_frame({spec.values.data() + t * spec.bins, spec.bins}, fb, floor,
                  out.values.row(t));
  }
  return out;
}

PeakNormalized peak_normalize_to(const AudioBuffer& audio, double target_dbfs) {
  const double peak = audio.peak();
  if (!(peak > 0.0)) throw ValidationError("peak_normalize: input is silent");
  PeakNormalized r;
  r.target_dbfs = target_dbfs;
  r.gain = std::pow(10.0, target_dbfs / 20.0) / peak;
  r.audio.sample_rate = audio.sample_rate;
  r.audio.samples.resize(audio.samples.size());
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    r.audio.samples[i] = audio.samples[i] * r.gain;
  }
  return r;
}

PeakNormalized peak_normalize(const AudioBuffer& audio, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> level(kMinPeakDbfs, kMaxPeakDbfs);
  return peak_normalize_to(audio, level(rng));
}

GriffinLimResult griffin_lim(const Matrix& magnitude, const StftConfig& cfg,
                             std::size_t iterations, std::uint64_t seed) {
  require(iterations >= 1, "griffin_lim: iterations must be >= 1");
  require(magnitude.cols == cfg.bins(), "griffin_lim: magnitude width must equal fft bins");
  require(magnitude.rows >= 1, "griffin_lim: need at least one frame");
  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.frames = magnitude.rows;
  spec.bins = magnitude.cols;
  spec.values.resize(spec.frames * spec.bins);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    spec.values[i] = std::polar(magnitude.data[i], phase(rng));
  }
  double ref = 0.0;
  for (double m : magnitude.data) ref += m * m;
  ref = std::sqrt(ref);

  GriffinLimResult result;
  result.convergence.reserve(iterations);
  for (std::size_t it = 0; it < iterations; ++it) {
    const AudioBuffer x = istft(spec, EdgeMode::kExact);
    const ComplexSpectrogram rebuilt = stft(x, cfg);
    double err = 0.0;
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
      const double mag = std::abs(rebuilt.values[i]);
      const double d = mag - magnitude.data[i];
      err += d * d;
      // Keep the previous phase where the rebuilt bin vanished.
      const double ph = mag > 0.0 ? std::arg(rebuilt.values[i]) : std::arg(spec.values[i]);
      spec.values[i] = std::polar(magnitude.data[i], ph);
    }
    result.convergence.push_back(ref > 0.0 ? std::sqrt(err) / ref : 0.0);
  }
  result.audio = istft(spec, EdgeMode::kTapered);
  return result;
}

GriffinLimResult mel_to_waveform(const LogMelSpectrogram& logmel, const MelFilterbank& fb,
                                 const StftConfig& cfg, std::size_t iterations,
                                 std::uint64_t seed) {
  require(iterations >= 1, "mel_to_waveform: iterations must be >= 1");
  if (logmel.mels() != fb.n_mels() || fb.weights.cols != cfg.bins()) {
    throw ValidationError("mel_to_waveform: log-mel / filterbank / STFT dimensions disagree");
  }
  const std::size_t n_mels = fb.n_mels();
  const std::size_t bins = cfg.bins();
  Eigen::MatrixXd w(n_mels, bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    for (std::size_t k = 0; k < bins; ++k) w(m, k) = fb.weights(m, k);
  }
  const Eigen::MatrixXd pinv = w.completeOrthogonalDecomposition().pseudoInverse();
  Matrix magnitude(logmel.frames(), bins);
  Eigen::VectorXd mel_power(n_mels);
  for (std::size_t t = 0; t < logmel.frames(); ++t) {
    for (std::size_t m = 0; m < n_mels; ++m) mel_power(m) = std::exp(logmel.values(t, m));
    const Eigen::VectorXd lin = pinv * mel_power;
    for (std::size_t k = 0; k < bins; ++k) magnitude(t, k) = std::sqrt(std::max(0.0, lin(k)));
  }
  return griffin_lim(magnitude, cfg, iterations, seed);
}

}  // namespace melstream::dsp
