// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/features.hpp"

#include <cmath>

#include "melstream/error.hpp"

namespace melstream::features {

FramedInput frame_context(const Matrix& logmel, const ContextConfig& cfg) {
  require(logmel.rows >= 1, "frame_context: need at least one frame");
  const std::size_t frames = logmel.rows;
  const std::size_t mels = logmel.cols;
  const std::size_t nt = cfg.time_width();
  const std::size_t nf = cfg.freq_width();
  FramedInput out{Tensor3(frames, mels, nt), Tensor3(frames, mels, nf)};
  const auto past = static_cast<long>(cfg.past_frames);
  const auto lower = static_cast<long>(cfg.lower_freqs);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t f = 0; f < mels; ++f) {
      for (std::size_t j = 0; j < nt; ++j) {
        const long src = static_cast<long>(t) - past + static_cast<long>(j);
        if (src >= 0 && src < static_cast<long>(frames)) {
          out.along_freq(t, f, j) = logmel(static_cast<std::size_t>(src), f);
        }
      }
      for (std::size_t j = 0; j < nf; ++j) {
        const long src = static_cast<long>(f) - lower + static_cast<long>(j);
        if (src >= 0 && src < static_cast<long>(mels)) {
          out.along_time(t, f, j) = logmel(t, static_cast<std::size_t>(src));
        }
      }
    }
  }
  return out;
}

double smoothing_alpha(double length_frames) {
  require(length_frames > 1.0, "smoothing length must exceed one frame");
  return (length_frames - 1.0) / (length_frames + 1.0);
}

namespace {

// Mean written as x0 + mean(x - x0): algebraically the plain mean, and
// exactly x0 for a constant frame.
double frame_mean(std::span<const double> frame) {
  const double x0 = frame[0];
  double acc = 0.0;
  for (double v : frame) acc += v - x0;
  return x0 + acc / static_cast<double>(frame.size());
}

}  // namespace

void online_normalize_step(std::span<const double> frame, NormState& state,
                           std::span<double> out) {
  require(state.alpha > 0.0 && state.alpha < 1.0, "online_normalize: alpha must be in (0, 1)");
  require(!frame.empty(), "online_normalize: empty frame");
  for (double v : frame) {
    if (!std::isfinite(v)) throw ValidationError("online_normalize: non-finite input frame");
  }
  const double m = frame_mean(frame);
  if (!state.initialized) {
    state.mu = m;
    state.initialized = true;
  }
  // alpha * mu + (1 - alpha) * m, in increment form so mu stays put when m == mu.
  state.mu += (1.0 - state.alpha) * (m - state.mu);
  for (std::size_t f = 0; f < frame.size(); ++f) {
    out[f] = (frame[f] - state.mu) + state.global_mean;
  }
}

OnlineNormalized online_normalize(const Matrix& logmel, NormState state) {
  OnlineNormalized r{Matrix(logmel.rows, logmel.cols), std::vector<double>(logmel.rows)};
  for (std::size_t t = 0; t < logmel.rows; ++t) {
    online_normalize_step(logmel.row(t), state, r.values.row(t));
    r.mu[t] = state.mu;
  }
  return r;
}

Matrix apply_mean_track(const Matrix& logmel, std::span<const double> mu, double global_mean) {
  require(mu.size() == logmel.rows, "apply_mean_track: mu length must equal frame count");
  Matrix out(logmel.rows, logmel.cols);
  for (std::size_t t = 0; t < logmel.rows; ++t) {
    for (std::size_t f = 0; f < logmel.cols; ++f) {
      out(t, f) = (logmel(t, f) - mu[t]) + global_mean;
    }
  }
  return out;
}

Matrix remove_mean_track(const Matrix& normalized, std::span<const double> mu,
                         double global_mean) {
  require(mu.size() == normalized.rows, "remove_mean_track: mu length must equal frame count");
  Matrix out(normalized.rows, normalized.cols);
  for (std::size_t t = 0; t < normalized.rows; ++t) {
    for (std::size_t f = 0; f < normalized.cols; ++f) {
      out(t, f) = (normalized(t, f) - global_mean) + mu[t];
    }
  }
  return out;
}

std::pair<AudioBuffer, AudioBuffer> normalize_offline_pair(const AudioBuffer& noisy,
                                                           const AudioBuffer& clean,
                                                           std::uint64_t seed) {
  require(noisy.samples.size() == clean.samples.size(),
          "normalize_offline_pair: noisy and clean lengths differ");
  const dsp::PeakNormalized n = dsp::peak_normalize(noisy, seed);
  AudioBuffer c = clean;
  for (double& s : c.samples) s *= n.gain;
  return {n.audio, std::move(c)};
}

Matrix asr_normalize(const Matrix& logmel) {
  require(logmel.rows >= 1, "asr_normalize: need at least one frame");
  Matrix out = logmel;
  const double n = static_cast<double>(logmel.rows);
  for (std::size_t f = 0; f < logmel.cols; ++f) {
    double acc = 0.0;
    for (std::size_t t = 0; t < logmel.rows; ++t) acc += logmel(t, f);
    const double mean = acc / n;
    for (std::size_t t = 0; t < logmel.rows; ++t) out(t, f) -= mean;
  }
  return out;
}

double compute_global_mean(std::span<const Matrix> corpus) {
  if (corpus.empty()) throw ValidationError("compute_global_mean: corpus is empty");
  double acc = 0.0;
  std::size_t count = 0;
  for (const Matrix& m : corpus) {
    for (double v : m.data) acc += v;
    count += m.data.size();
  }
  if (count == 0) throw ValidationError("compute_global_mean: corpus has no bins");
  return acc / static_cast<double>(count);
}

}  // namespace melstream::features
