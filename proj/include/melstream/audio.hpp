// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <vector>

namespace melstream {

inline constexpr int kSampleRate = 16000;

/// Mono waveform. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  double peak() const;
  double power() const;  // mean square

  // Throws ValidationError if empty, non-finite or sample_rate <= 0.
  void validate() const;
};

/// Reads a mono WAV file (16-bit PCM or 32-bit float). Multichannel input is
/// rejected; any rate other than 16 kHz is resampled on load.
AudioBuffer read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono. Samples are clamped to the representable range.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

/// Band-limited (windowed-sinc) sample-rate conversion.
std::vector<double> resample(const std::vector<double>& in, int from_rate,
                             int to_rate);

}  // namespace melstream
