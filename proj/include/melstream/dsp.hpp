// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "melstream/audio.hpp"
#include "melstream/tensor.hpp"

namespace melstream::dsp {

enum class Window { kHannPeriodic };

struct StftConfig {
  std::size_t frame_len = 512;
  std::size_t hop = 256;
  std::size_t fft_size = 512;
  Window window = Window::kHannPeriodic;

  std::size_t bins() const { return fft_size / 2 + 1; }

  // Speech-enhancement front-end: 32 ms frames, 16 ms hop at 16 kHz.
  static StftConfig speech_enhancement() { return {512, 256, 512}; }
  // ASR-matched front-end: 32 ms frames, 8 ms hop.
  static StftConfig asr() { return {512, 128, 512}; }

  void validate() const;
  // True when the analysis window overlap-adds to a constant at this hop.
  bool is_cola() const;

  bool operator==(const StftConfig&) const = default;
};

std::vector<double> make_window(const StftConfig& cfg);

/// Number of frames produced by stft() for a signal of `length` samples.
std::size_t frame_count(std::size_t length, const StftConfig& cfg);

struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> values;  // frames x bins, row-major
  StftConfig config;

  std::complex<double>& at(std::size_t t, std::size_t k) { return values[t * bins + k]; }
  std::complex<double> at(std::size_t t, std::size_t k) const { return values[t * bins + k]; }
};

ComplexSpectrogram stft(const AudioBuffer& audio, const StftConfig& cfg);

/// Per-frame analysis with preallocated window and transform buffers.
class FrameAnalyzer {
 public:
  explicit FrameAnalyzer(const StftConfig& cfg);
  // Windows frame_len samples, zero-pads to fft_size and writes the
  // cfg.bins() one-sided spectrum values to `out`.
  void analyze(std::span<const double> frame, std::span<std::complex<double>> out);
  const StftConfig& config() const { return cfg_; }

 private:
  StftConfig cfg_;
  std::vector<double> window_;
  std::vector<double> buffer_;
};

enum class EdgeMode {
  // Least-squares overlap-add: divide by the summed squared window
  // everywhere it is nonzero.
  kExact,
  // As kExact, but the normalizer is clamped below by its fully-overlapped
  // minimum, so partially covered edges fade instead of being amplified.
  kTapered,
};

/// Overlap-add synthesis with window-energy normalization. Output length is
/// (frames - 1) * hop + frame_len.
AudioBuffer istft(const ComplexSpectrogram& spec, EdgeMode edges = EdgeMode::kExact);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

struct MelFilterbank {
  Matrix weights;  // n_mels x bins
  double f_min = 0.0;
  double f_max = 8000.0;
  // Per filter [first, last) nonzero bin range; empty means "use every bin".
  std::vector<std::pair<std::size_t, std::size_t>> support;
  std::size_t n_mels() const { return weights.rows; }
};

MelFilterbank mel_filterbank(std::size_t n_mels, const StftConfig& cfg,
                             int sample_rate, double f_min, double f_max);

inline constexpr double kLogFloor = 1e-5;

/// Natural-log mel power spectrogram. values is frames x n_mels.
struct LogMelSpectrogram {
  Matrix values;
  double floor = kLogFloor;

  std::size_t frames() const { return values.rows; }
  std::size_t mels() const { return values.cols; }
};

LogMelSpectrogram log_mel(const ComplexSpectrogram& spec, const MelFilterbank& fb,
                          double floor = kLogFloor);

// Single-frame variant used by the streaming path; `bins` holds one STFT frame.
void log_mel_frame(std::span<const std::complex<double>> bins, const MelFilterbank& fb,
                   double floor, std::span<double> out);

struct PeakNormalized {
  AudioBuffer audio;
  double gain = 1.0;
  double target_dbfs = 0.0;
};

inline constexpr double kMinPeakDbfs = -6.0;
inline constexpr double kMaxPeakDbfs = -1.0;

/// Scales so the peak lands at a level drawn uniformly from [-6, -1] dBFS.
PeakNormalized peak_normalize(const AudioBuffer& audio, std::uint64_t seed);
/// Same, with the target level given explicitly.
PeakNormalized peak_normalize_to(const AudioBuffer& audio, double target_dbfs);

struct GriffinLimResult {
  AudioBuffer audio;
  // Spectral convergence || |STFT(x_i)| - S || / ||S|| after each iteration.
  std::vector<double> convergence;
};

/// Mel-to-waveform resynthesis: clamped pseudo-inverse of the filterbank to a
/// linear power spectrum, then Griffin-Lim phase retrieval seeded from
/// `seed`-drawn random phases.
GriffinLimResult mel_to_waveform(const LogMelSpectrogram& logmel, const MelFilterbank& fb,
                                 const StftConfig& cfg, std::size_t iterations,
                                 std::uint64_t seed);

/// Griffin-Lim on a given magnitude spectrogram (frames x bins).
GriffinLimResult griffin_lim(const Matrix& magnitude, const StftConfig& cfg,
                             std::size_t iterations, std::uint64_t seed);

}  // namespace melstream::dsp
