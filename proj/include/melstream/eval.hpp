// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "melstream/model.hpp"
#include "melstream/pipeline.hpp"
#include "melstream/synthdata.hpp"

namespace melstream::eval {

struct UtteranceScore {
  std::string name;
  double logmel_mse_enhanced = 0.0;
  double logmel_mse_unprocessed = 0.0;
};

struct EvalReport {
  std::vector<UtteranceScore> utterances;
  double logmel_mse_enhanced = 0.0;    // mean over utterances
  double logmel_mse_unprocessed = 0.0;
  std::optional<double> waveform_snr_db;
  std::optional<double> rtf;
};

/// Enhanced-vs-target and noisy-vs-target log-mel MSE per utterance of
/// `split`, in the bundle's normalized domain (the training loss domain).
EvalReport logmel_mse_report(const ModelBundle& bundle, const synthdata::CorpusManifest& corpus,
                             const std::string& split = "test", bool direct_target = true);

/// Aggregates per-utterance scores into the report means.
void finalize(EvalReport& report);

/// Human-readable lines followed by a key=value block.
std::string format_report(const EvalReport& report);

/// Randomizes every frame after t_cut in `trials` random T-frame inputs and
/// returns the largest change seen in outputs at frames <= t_cut.
double causality_probe(const model::ModelConfig& cfg, const Parameters& params,
                       std::size_t t_cut, std::size_t trials, std::size_t frames,
                       std::uint64_t seed);

enum class RtfPath { kStreaming, kBatch };

struct RtfResult {
  double rtf = 0.0;
  RtfPath path = RtfPath::kBatch;
  double audio_seconds = 0.0;
  std::size_t frames = 0;
};

/// Wall-clock processing time / audio duration, median over repetitions.
/// Online bundles use the streaming path unless kBatch is forced.
RtfResult measure_rtf(const ModelBundle& bundle, double audio_seconds, std::size_t repetitions,
                      std::optional<RtfPath> path = std::nullopt);

}  // namespace melstream::eval
