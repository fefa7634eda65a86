// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "melstream/error.hpp"
#include "melstream/parallel.hpp"
#include "melstream/training.hpp"

namespace melstream::eval {

EvalReport logmel_mse_report(const ModelBundle& bundle, const synthdata::CorpusManifest& corpus,
                             const std::string& split, bool direct_target) {
  bundle.model.validate();
  if (bundle.frontend.n_mels != bundle.model.f_mel) {
    throw ValidationError("eval: front-end mel count differs from model f_mel");
  }
  const auto entries = corpus.split(split);
  if (entries.empty()) throw ValidationError("eval: corpus has no '" + split + "' entries");
  const Frontend frontend(bundle.frontend);

  EvalReport report;
  report.utterances.resize(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const auto& e = entries[i];
    const AudioBuffer noisy = read_wav(corpus.path_of(e.noisy));
    const AudioBuffer target = read_wav(corpus.path_of(direct_target ? e.direct : e.clean));
    if (noisy.samples.size() != target.samples.size()) {
      throw ValidationError("eval: noisy/target length mismatch for " + e.noisy);
    }
    const PreparedPair pair =
        prepare_pair(bundle.model, bundle.norm, frontend, noisy, target, e.spec.seed);
    const Matrix enhanced = model::enhance(bundle.model, bundle.params, pair.input);
    UtteranceScore& s = report.utterances[i];
    s.name = e.noisy;
    s.logmel_mse_enhanced = training::mse_loss(enhanced, pair.target);
    s.logmel_mse_unprocessed = training::mse_loss(pair.input, pair.target);
  });
  finalize(report);
  if (!std::isfinite(report.logmel_mse_enhanced)) {
    throw RuntimeFailure("eval: enhanced log-mel MSE is not finite");
  }
  return report;
}

void finalize(EvalReport& report) {
  double enh = 0.0, unp = 0.0;
  for (const auto& u : report.utterances) {
    enh += u.logmel_mse_enhanced;
    unp += u.logmel_mse_unprocessed;
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, report.utterances.size()));
  report.logmel_mse_enhanced = enh / n;
  report.logmel_mse_unprocessed = unp / n;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  char buf[256];
  for (const auto& u : r.utterances) {
    std::snprintf(buf, sizeof(buf), "%s  enhanced=%.6f  unprocessed=%.6f\n", u.name.c_str(),
                  u.logmel_mse_enhanced, u.logmel_mse_unprocessed);
    os << buf;
  }
  os << "# log-mel MSE is an in-repo proxy; no perceptual or ASR metric is computed\n";
  std::snprintf(buf, sizeof(buf), "utterances=%zu\nlogmel_mse_enhanced=%.9g\nlogmel_mse_unprocessed=%.9g\n",
                r.utterances.size(), r.logmel_mse_enhanced, r.logmel_mse_unprocessed);
  os << buf;
  if (r.waveform_snr_db) {
    std::snprintf(buf, sizeof(buf), "waveform_snr_db=%.6g\n", *r.waveform_snr_db);
    os << buf;
  }
  if (r.rtf) {
    std::snprintf(buf, sizeof(buf), "rtf=%.6g\n", *r.rtf);
    os << buf;
  }
  return os.str();
}

double causality_probe(const model::ModelConfig& cfg, const Parameters& params,
                       std::size_t t_cut, std::size_t trials, std::size_t frames,
                       std::uint64_t seed) {
  require(frames >= 1 && t_cut < frames, "causality probe: t_cut must be a valid frame index");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t k = 0; k < trials; ++k) {
    Matrix x(frames, cfg.f_mel);
    for (double& v : x.data) v = gauss(rng);
    const Matrix base = model::enhance(cfg, params, x);
    for (std::size_t t = t_cut + 1; t < frames; ++t) {
      for (std::size_t f = 0; f < cfg.f_mel; ++f) x(t, f) = 3.0 * gauss(rng);
    }
    const Matrix moved = model::enhance(cfg, params, x);
    for (std::size_t t = 0; t <= t_cut; ++t) {
      for (std::size_t f = 0; f < cfg.f_mel; ++f) {
        worst = std::max(worst, std::abs(moved(t, f) - base(t, f)));
      }
    }
  }
  return worst;
}

RtfResult measure_rtf(const ModelBundle& bundle, double audio_seconds, std::size_t repetitions,
                      std::optional<RtfPath> path) {
  require(audio_seconds > 0.0, "rtf: audio duration must be positive");
  require(repetitions >= 1, "rtf: need at least one repetition");
  RtfResult r;
  r.path = path.value_or(bundle.model.mode == model::Mode::kOnline ? RtfPath::kStreaming
                                                                   : RtfPath::kBatch);
  if (r.path == RtfPath::kStreaming && bundle.model.mode != model::Mode::kOnline) {
    throw ValidationError("rtf: the streaming path needs an online model");
  }
  const AudioBuffer audio = synthdata::synthesize_entry(0x52544631ULL, audio_seconds).noisy;
  r.audio_seconds = audio.duration_seconds();
  std::vector<double> times;
  for (std::size_t k = 0; k < repetitions; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    if (r.path == RtfPath::kStreaming) {
      StreamProcessor sp(bundle);
      std::vector<double> frames;
      frames.reserve((audio.samples.size() / bundle.frontend.stft.hop + 1) * bundle.frontend.n_mels);
      const std::size_t chunk = bundle.frontend.stft.hop;
      for (std::size_t pos = 0; pos < audio.samples.size(); pos += chunk) {
        const std::size_t n = std::min(chunk, audio.samples.size() - pos);
        sp.push({audio.samples.data() + pos, n}, frames);
      }
      r.frames = sp.frames_emitted();
    } else {
      r.frames = enhance_audio(bundle, audio).rows;
    }
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t m = times.size();
  const double median = m % 2 == 1 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
  r.rtf = std::max(median, 1e-12) / r.audio_seconds;
  return r;
}

}  // namespace melstream::eval
