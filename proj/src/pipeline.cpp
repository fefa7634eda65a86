// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/pipeline.hpp"

#include <cmath>

#include "melstream/error.hpp"

namespace melstream {

using model::NormMode;

Frontend::Frontend(const FrontendConfig& cfg)
    : cfg_(cfg),
      fb_(dsp::mel_filterbank(cfg.n_mels, cfg.stft, kSampleRate, cfg.f_min, cfg.f_max)) {}

Matrix Frontend::log_mel(const AudioBuffer& audio) const {
  return dsp::log_mel(dsp::stft(audio, cfg_.stft), fb_, cfg_.floor).values;
}

namespace {

features::NormState initial_state(const NormSettings& norm) {
  return features::NormState::with_length(norm.smoothing_frames, norm.global_mean);
}

}  // namespace

PreparedPair prepare_pair(const model::ModelConfig& mcfg, const NormSettings& norm,
                          const Frontend& frontend, const AudioBuffer& noisy,
                          const AudioBuffer& target, std::uint64_t gain_seed) {
  switch (mcfg.norm_mode) {
    case NormMode::kOfflineGain: {
      auto [n, c] = features::normalize_offline_pair(noisy, target, gain_seed);
      return {frontend.log_mel(n), frontend.log_mel(c)};
    }
    case NormMode::kOnlineRecursive: {
      auto [n, c] = features::normalize_offline_pair(noisy, target, gain_seed);
      auto on = features::online_normalize(frontend.log_mel(n), initial_state(norm));
      Matrix tgt = features::apply_mean_track(frontend.log_mel(c), on.mu, norm.global_mean);
      return {std::move(on.values), std::move(tgt)};
    }
    case NormMode::kAsrUtterance:
      return {features::asr_normalize(frontend.log_mel(noisy)),
              features::asr_normalize(frontend.log_mel(target))};
  }
  throw ValidationError("prepare_pair: unknown normalization mode");
}

PreparedInput prepare_input(const model::ModelConfig& mcfg, const NormSettings& norm,
                            const Frontend& frontend, const AudioBuffer& noisy,
                            std::uint64_t gain_seed) {
  PreparedInput p;
  switch (mcfg.norm_mode) {
    case NormMode::kOfflineGain: {
      const auto pn = dsp::peak_normalize(noisy, gain_seed);
      p.input = frontend.log_mel(pn.audio);
      p.log_gain = 2.0 * std::log(pn.gain);
      break;
    }
    case NormMode::kOnlineRecursive: {
      auto on = features::online_normalize(frontend.log_mel(noisy), initial_state(norm));
      p.input = std::move(on.values);
      p.mu = std::move(on.mu);
      break;
    }
    case NormMode::kAsrUtterance: {
      const Matrix y = frontend.log_mel(noisy);
      p.input = features::asr_normalize(y);
      p.col_mean.assign(y.cols, 0.0);
      for (std::size_t t = 0; t < y.rows; ++t) {
        for (std::size_t f = 0; f < y.cols; ++f) p.col_mean[f] += y(t, f);
      }
      for (double& m : p.col_mean) m /= static_cast<double>(y.rows);
      break;
    }
  }
  return p;
}

Matrix restore_level(const model::ModelConfig& mcfg, const NormSettings& norm,
                     const Matrix& output, const PreparedInput& prep) {
  Matrix out = output;
  for (std::size_t t = 0; t < out.rows; ++t) {
    for (std::size_t f = 0; f < out.cols; ++f) {
      double& v = out(t, f);
      switch (mcfg.norm_mode) {
        case NormMode::kOfflineGain: v -= prep.log_gain; break;
        case NormMode::kOnlineRecursive: v = restore_online(v, prep.mu[t], norm.global_mean); break;
        case NormMode::kAsrUtterance: v += prep.col_mean[f]; break;
      }
    }
  }
  return out;
}

Matrix enhance_audio(const ModelBundle& bundle, const AudioBuffer& noisy,
                     std::uint64_t gain_seed) {
  const Frontend frontend(bundle.frontend);
  const PreparedInput prep = prepare_input(bundle.model, bundle.norm, frontend, noisy, gain_seed);
  const Matrix out = model::enhance(bundle.model, bundle.params, prep.input);
  return restore_level(bundle.model, bundle.norm, out, prep);
}

StreamProcessor::StreamProcessor(const ModelBundle& bundle)
    : mcfg_(bundle.model),
      settings_(bundle.norm),
      frontend_(bundle.frontend),
      model_(bundle.model, bundle.params),
      norm_(initial_state(bundle.norm)),
      analyzer_(bundle.frontend.stft) {
  if (bundle.model.norm_mode != NormMode::kOnlineRecursive) {
    throw ValidationError("streaming requires online-recursive normalization");
  }
  pending_.reserve(4 * bundle.frontend.stft.frame_len);
  bins_.resize(bundle.frontend.stft.bins());
  mel_.resize(bundle.frontend.n_mels);
  normalized_.resize(bundle.frontend.n_mels);
  out_.resize(bundle.frontend.n_mels);
}

std::size_t StreamProcessor::push(std::span<const double> samples,
                                  std::vector<double>& frames_out) {
  const auto& stft = frontend_.config().stft;
  pending_.insert(pending_.end(), samples.begin(), samples.end());
  std::size_t produced = 0;
  while (pending_.size() - pending_start_ >= stft.frame_len) {
    analyzer_.analyze({pending_.data() + pending_start_, stft.frame_len}, bins_);
    dsp::log_mel_frame(bins_, frontend_.filterbank(), frontend_.config().floor, mel_);
    features::online_normalize_step(mel_, norm_, normalized_);
    model_.step(normalized_, out_);
    for (double v : out_) frames_out.push_back(restore_online(v, norm_.mu, settings_.global_mean));
    pending_start_ += stft.hop;
    ++produced;
  }
  if (pending_start_ > 0) {
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(pending_start_));
    pending_start_ = 0;
  }
  emitted_ += produced;
  return produced;
}

}  // namespace melstream
