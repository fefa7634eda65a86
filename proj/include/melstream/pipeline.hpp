// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "melstream/audio.hpp"
#include "melstream/dsp.hpp"
#include "melstream/features.hpp"
#include "melstream/model.hpp"

// Glue between waveforms, the log-mel front-end, the normalizers and the
// network. Shared by training, evaluation and the command-line tool.
namespace melstream {

struct FrontendConfig {
  dsp::StftConfig stft = dsp::StftConfig::speech_enhancement();
  std::size_t n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double floor = dsp::kLogFloor;

  static FrontendConfig speech_enhancement() { return {}; }
  static FrontendConfig asr() {
    FrontendConfig c;
    c.stft = dsp::StftConfig::asr();
    return c;
  }
  bool operator==(const FrontendConfig&) const = default;
};

struct NormSettings {
  double global_mean = 0.0;  // M
  double smoothing_frames = features::kDefaultSmoothingFrames;  // L

  bool operator==(const NormSettings&) const = default;
};

/// Everything needed to run a trained network on audio.
struct ModelBundle {
  model::ModelConfig model;
  FrontendConfig frontend;
  NormSettings norm;
  Parameters params;
};

class Frontend {
 public:
  explicit Frontend(const FrontendConfig& cfg);

  Matrix log_mel(const AudioBuffer& audio) const;
  const FrontendConfig& config() const { return cfg_; }
  const dsp::MelFilterbank& filterbank() const { return fb_; }

 private:
  FrontendConfig cfg_;
  dsp::MelFilterbank fb_;
};

/// Network input/target pair in the normalized domain.
struct PreparedPair {
  Matrix input;
  Matrix target;
};

/// Training-time preparation of (noisy, target) waveforms per norm mode:
///   offline-gain:     shared random peak gain
///   online-recursive: shared random peak gain, then the noisy mu(t) track
///                     applied to both spectrograms
///   asr-utterance:    per-frequency mean removal on both
PreparedPair prepare_pair(const model::ModelConfig& mcfg, const NormSettings& norm,
                          const Frontend& frontend, const AudioBuffer& noisy,
                          const AudioBuffer& target, std::uint64_t gain_seed);

/// Inference-time input plus what is needed to map the output back to the
/// input's level.
struct PreparedInput {
  Matrix input;
  std::vector<double> mu;        // online-recursive: mu(t)
  std::vector<double> col_mean;  // asr-utterance: removed per-frequency means
  double log_gain = 0.0;         // offline-gain: 2 ln(gain)
};

PreparedInput prepare_input(const model::ModelConfig& mcfg, const NormSettings& norm,
                            const Frontend& frontend, const AudioBuffer& noisy,
                            std::uint64_t gain_seed);

/// Maps a network output back to the unnormalized log-mel level.
Matrix restore_level(const model::ModelConfig& mcfg, const NormSettings& norm,
                     const Matrix& output, const PreparedInput& prep);

inline double restore_online(double value, double mu, double global_mean) {
  return (value - global_mean) + mu;
}

/// Batch enhancement of a waveform to a log-mel spectrogram at input level.
Matrix enhance_audio(const ModelBundle& bundle, const AudioBuffer& noisy,
                     std::uint64_t gain_seed = 0);

/// Frame-by-frame streaming enhancement for online bundles. Consumes
/// arbitrary-size sample chunks and emits one log-mel frame per STFT hop.
class StreamProcessor {
 public:
  explicit StreamProcessor(const ModelBundle& bundle);

  // Appends samples; returns the number of frames emitted into `frames_out`
  // (each n_mels wide, appended).
  std::size_t push(std::span<const double> samples, std::vector<double>& frames_out);
  std::size_t frames_emitted() const { return emitted_; }

 private:
  model::ModelConfig mcfg_;
  NormSettings settings_;
  Frontend frontend_;
  model::StreamingModel model_;
  features::NormState norm_;
  dsp::FrameAnalyzer analyzer_;
  std::vector<double> pending_;
  std::size_t pending_start_ = 0;
  std::vector<std::complex<double>> bins_;
  std::vector<double> mel_;
  std::vector<double> normalized_;
  std::vector<double> out_;
  std::size_t emitted_ = 0;
};

}  // namespace melstream
