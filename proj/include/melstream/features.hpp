// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "melstream/audio.hpp"
#include "melstream/dsp.hpp"
#include "melstream/tensor.hpp"

namespace melstream::features {

struct ContextConfig {
  std::size_t past_frames = 15;
  std::size_t future_frames = 0;
  std::size_t lower_freqs = 5;
  std::size_t upper_freqs = 5;

  std::size_t time_width() const { return past_frames + future_frames + 1; }
  std::size_t freq_width() const { return lower_freqs + upper_freqs + 1; }

  bool operator==(const ContextConfig&) const = default;
};

/// Context-stacked views of a T x F log-mel spectrogram.
///   along_freq(t, f, j) = Y(t - past + j, f),  j in [0, time_width)
///   along_time(t, f, j) = Y(t, f - lower + j), j in [0, freq_width)
/// Out-of-range positions are zero.
struct FramedInput {
  Tensor3 along_freq;
  Tensor3 along_time;

  std::size_t frames() const { return along_freq.d0; }
  std::size_t mels() const { return along_freq.d1; }
};

FramedInput frame_context(const Matrix& logmel, const ContextConfig& cfg);

/// Smoothing weight for an L-frame effective window: (L - 1) / (L + 1).
double smoothing_alpha(double length_frames);

inline constexpr double kDefaultSmoothingFrames = 200.0;

/// Running state of the causal mean normalizer.
struct NormState {
  double mu = 0.0;
  double alpha = smoothing_alpha(kDefaultSmoothingFrames);
  double global_mean = 0.0;  // M
  bool initialized = false;

  static NormState with_length(double length_frames, double global_mean) {
    return {0.0, smoothing_alpha(length_frames), global_mean, false};
  }
};

/// One causal step: m = mean_f frame(f); mu <- alpha * mu + (1 - alpha) * m
/// with mu seeded by the first frame's mean; out = frame - mu + M.
void online_normalize_step(std::span<const double> frame, NormState& state,
                           std::span<double> out);

struct OnlineNormalized {
  Matrix values;
  std::vector<double> mu;  // mu(t) per frame
};

/// Runs online_normalize_step over every frame, starting from `state`.
OnlineNormalized online_normalize(const Matrix& logmel, NormState state);

/// Applies a precomputed mu(t) track: out(t, f) = in(t, f) - mu(t) + M.
Matrix apply_mean_track(const Matrix& logmel, std::span<const double> mu, double global_mean);

/// Inverse of apply_mean_track.
Matrix remove_mean_track(const Matrix& normalized, std::span<const double> mu,
                         double global_mean);

/// Peak-normalizes `noisy` to a random [-6, -1] dBFS level and applies the same
/// gain to `clean`.
std::pair<AudioBuffer, AudioBuffer> normalize_offline_pair(const AudioBuffer& noisy,
                                                           const AudioBuffer& clean,
                                                           std::uint64_t seed);

/// Per-utterance per-frequency mean removal.
Matrix asr_normalize(const Matrix& logmel);

/// Mean over every time-frequency bin of every utterance.
double compute_global_mean(std::span<const Matrix> corpus);

}  // namespace melstream::features
