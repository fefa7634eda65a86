// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "melstream/features.hpp"
#include "melstream/lstm.hpp"
#include "melstream/params.hpp"
#include "melstream/tensor.hpp"

namespace melstream::model {

enum class Mode { kOnline, kOffline };

enum class NormMode {
  kOfflineGain,     // utterance peak normalization only
  kOnlineRecursive, // peak normalization in training + causal mean normalization
  kAsrUtterance,    // per-utterance per-frequency mean removal
};

std::string to_string(Mode m);
std::string to_string(NormMode m);
Mode parse_mode(const std::string& s);
NormMode parse_norm_mode(const std::string& s);

struct ModelConfig {
  std::size_t f_mel = 80;
  std::size_t hidden_d = 192;
  std::size_t n_blocks = 3;
  features::ContextConfig context;
  Mode mode = Mode::kOnline;
  std::size_t fullband_hidden_per_dir = 96;
  std::size_t subband_hidden = 192;
  NormMode norm_mode = NormMode::kOnlineRecursive;

  /// Full-size configuration: 80 mels, D = 192, three blocks, 15 past frames
  /// (plus 15 future frames offline) and 5 + 5 neighbouring mel bands.
  static ModelConfig full(Mode mode);

  // Throws ValidationError on any broken invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per array; LSTM forget-gate
/// biases get +1.
Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed);

/// Names and shapes only (all zeros).
Parameters parameter_layout(const ModelConfig& cfg);

/// Exact scalar count of init_parameters(cfg, *).
std::size_t param_count(const ModelConfig& cfg);

std::string block_prefix(std::size_t block);

/// Elementwise output gate: sigmoid(h w + b) * h, applied to `rows` D-vectors.
/// When `sig` is non-null it receives the sigmoid activations.
void gate(const double* h, std::size_t rows, std::size_t d, const double* w,
          const double* b, double* out, double* sig = nullptr);

/// Activations retained for reverse-mode differentiation.
struct BlockTrace {
  std::vector<double> fb_input;   // F x T x D (frequency-major copy of Z_k)
  std::vector<double> fb_output;  // F x T x D (forward half | backward half)
  nn::LstmTrace fb_fwd, fb_bwd;
  std::vector<double> gated;      // T x F x D, sigmoid activations of the gate
  std::vector<double> hidden;     // T x F x D, H_k
  std::vector<double> sb_input;   // T x F x D, W_k
  std::vector<double> sb_output;  // T x F x (Hs or 2 Hs), raw LSTM output
  nn::LstmTrace sb_fwd, sb_bwd;
  std::vector<double> out;        // T x F x D, S_k
};

struct ForwardTrace {
  std::vector<double> embed_freq;  // T x F x D
  std::vector<double> embed_time;  // T x F x D
  std::vector<BlockTrace> blocks;
};

/// Batch forward pass. Returns the T x F_mel enhanced log-mel estimate.
Matrix forward(const ModelConfig& cfg, const Parameters& params,
               const features::FramedInput& framed, ForwardTrace* trace = nullptr);

/// Convenience: frame_context + forward.
Matrix enhance(const ModelConfig& cfg, const Parameters& params, const Matrix& logmel);

/// Frame-synchronous inference for online configurations. Holds the past
/// context ring buffer and the sub-band recurrent states. All buffers are
/// allocated at construction; step() does not allocate.
class StreamingModel {
 public:
  StreamingModel(const ModelConfig& cfg, const Parameters& params);
  StreamingModel(const StreamingModel&) = delete;
  StreamingModel& operator=(const StreamingModel&) = delete;
  StreamingModel(StreamingModel&&) = default;
  StreamingModel& operator=(StreamingModel&&) = default;

  void reset();
  // Consumes one F_mel input frame and writes one F_mel output frame.
  void step(std::span<const double> frame, std::span<double> out);

  std::size_t frames_seen() const { return frames_seen_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  struct BlockWeights {
    nn::LstmWeights fb_fwd;
    nn::LstmWeights fb_bwd;
    nn::LstmWeights sb;
    const double* gate_w;
    const double* gate_b;
  };

  ModelConfig cfg_;
  Parameters params_;
  std::vector<BlockWeights> blocks_;
  const double* embed_freq_w_ = nullptr;
  const double* embed_freq_b_ = nullptr;
  const double* embed_time_w_ = nullptr;
  const double* embed_time_b_ = nullptr;
  const double* head_w_ = nullptr;
  const double* head_b_ = nullptr;
  std::size_t frames_seen_ = 0;
  std::vector<double> history_;     // (past + 1) x F ring buffer
  std::size_t history_head_ = 0;
  std::vector<double> ctx_freq_;    // F x N_time
  std::vector<double> ctx_time_;    // F x N_freq
  std::vector<double> embed_freq_;  // F x D
  std::vector<double> embed_time_;  // F x D
  std::vector<double> z_;           // F x D
  std::vector<double> fb_out_;      // F x D
  std::vector<double> gated_;       // F x D
  std::vector<double> sb_in_;       // F x D
  std::vector<double> s_;           // F x D
  nn::LstmScratch fb_scratch_;
  std::vector<nn::LstmScratch> sb_state_;  // per block, rows = F
};

/// Streams every row of `logmel` through a fresh StreamingModel.
Matrix forward_streaming(const ModelConfig& cfg, const Parameters& params,
                         const Matrix& logmel);

}  // namespace melstream::model
