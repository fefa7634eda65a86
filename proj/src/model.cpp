// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "melstream/error.hpp"

namespace melstream::model {

using nn::Direction;
using nn::LstmWeights;

std::string to_string(Mode m) { return m == Mode::kOnline ? "online" : "offline"; }

std::string to_string(NormMode m) {
  switch (m) {
    case NormMode::kOfflineGain: return "offline-gain";
    case NormMode::kOnlineRecursive: return "online-recursive";
    case NormMode::kAsrUtterance: return "asr-utterance";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  if (s == "online") return Mode::kOnline;
  if (s == "offline") return Mode::kOffline;
  throw ValidationError("unknown mode '" + s + "' (expected online|offline)");
}

NormMode parse_norm_mode(const std::string& s) {
  if (s == "offline-gain") return NormMode::kOfflineGain;
  if (s == "online-recursive") return NormMode::kOnlineRecursive;
  if (s == "asr-utterance" || s == "asr") return NormMode::kAsrUtterance;
  throw ValidationError("unknown norm mode '" + s +
                        "' (expected offline-gain|online-recursive|asr-utterance)");
}

ModelConfig ModelConfig::full(Mode mode) {
  ModelConfig c;
  c.mode = mode;
  c.context.past_frames = 15;
  c.context.future_frames = mode == Mode::kOffline ? 15 : 0;
  c.context.lower_freqs = 5;
  c.context.upper_freqs = 5;
  c.norm_mode = mode == Mode::kOnline ? NormMode::kOnlineRecursive : NormMode::kOfflineGain;
  return c;
}

void ModelConfig::validate() const {
  require(f_mel >= 1, "model: f_mel must be >= 1");
  require(hidden_d >= 1, "model: hidden size D must be >= 1");
  require(n_blocks >= 1, "model: need at least one block");
  require(fullband_hidden_per_dir >= 1 && subband_hidden >= 1,
          "model: recurrent hidden sizes must be >= 1");
  require(2 * fullband_hidden_per_dir == hidden_d,
          "model: full-band hidden per direction must be D / 2");
  if (mode == Mode::kOnline) {
    require(context.future_frames == 0, "model: online mode forbids future context frames");
    require(subband_hidden == hidden_d, "model: online sub-band hidden size must equal D");
    require(norm_mode == NormMode::kOnlineRecursive,
            "model: online mode requires online-recursive normalization");
  }
}

std::string block_prefix(std::size_t block) { return "block" + std::to_string(block) + "."; }

namespace {

struct ArraySpec {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t fan_in;
  std::size_t forget_hidden;  // nonzero for LSTM biases
};

void add_lstm(std::vector<ArraySpec>& out, const std::string& p, std::size_t in, std::size_t h) {
  out.push_back({p + "w_ih", {in, 4 * h}, h, 0});
  out.push_back({p + "w_hh", {h, 4 * h}, h, 0});
  out.push_back({p + "bias", {4 * h}, h, h});
}

std::vector<ArraySpec> layout_specs(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.hidden_d;
  const std::size_t hf = cfg.fullband_hidden_per_dir;
  const std::size_t hs = cfg.subband_hidden;
  const std::size_t nt = cfg.context.time_width();
  const std::size_t nf = cfg.context.freq_width();
  std::vector<ArraySpec> s;
  s.push_back({"embed_freq.weight", {nt, d}, nt, 0});
  s.push_back({"embed_freq.bias", {d}, nt, 0});
  s.push_back({"embed_time.weight", {nf, d}, nf, 0});
  s.push_back({"embed_time.bias", {d}, nf, 0});
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    const std::string p = block_prefix(b);
    add_lstm(s, p + "fullband.fwd.", d, hf);
    add_lstm(s, p + "fullband.bwd.", d, hf);
    s.push_back({p + "gate.weight", {d, d}, d, 0});
    s.push_back({p + "gate.bias", {d}, d, 0});
    add_lstm(s, p + "subband.fwd.", d, hs);
    if (cfg.mode == Mode::kOffline) {
      add_lstm(s, p + "subband.bwd.", d, hs);
      s.push_back({p + "subband.proj.weight", {2 * hs, d}, 2 * hs, 0});
      s.push_back({p + "subband.proj.bias", {d}, 2 * hs, 0});
    }
  }
  s.push_back({"head.weight", {d, 1}, d, 0});
  s.push_back({"head.bias", {1}, d, 0});
  return s;
}

void check_params(const ModelConfig& cfg, const Parameters& params) {
  const auto specs = layout_specs(cfg);
  if (params.array_count() != specs.size()) {
    throw ValidationError("model: parameter set has " + std::to_string(params.array_count()) +
                          " arrays, configuration expects " + std::to_string(specs.size()));
  }
  for (const auto& s : specs) {
    if (!params.contains(s.name) || params.at(s.name).shape != s.shape) {
      throw ValidationError("model: parameter '" + s.name + "' missing or mis-shaped");
    }
  }
}

LstmWeights lstm_weights(const Parameters& p, const std::string& prefix, std::size_t in,
                         std::size_t h) {
  return {p.data(prefix + "w_ih"), p.data(prefix + "w_hh"), p.data(prefix + "bias"), in, h};
}

void transpose_tf(const double* src, std::size_t a, std::size_t b, std::size_t d, double* dst) {
  // src is a x b x d, dst is b x a x d
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      std::copy_n(src + (i * b + j) * d, d, dst + (j * a + i) * d);
    }
  }
}

}  // namespace

Parameters parameter_layout(const ModelConfig& cfg) {
  Parameters p;
  for (auto& s : layout_specs(cfg)) p.add(s.name, s.shape);
  return p;
}

std::size_t param_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& s : layout_specs(cfg)) {
    std::size_t k = 1;
    for (auto d : s.shape) k *= d;
    n += k;
  }
  return n;
}

Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Parameters p;
  for (auto& s : layout_specs(cfg)) {
    NamedArray& a = p.add(s.name, s.shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : a.values) v = dist(rng);
    if (s.forget_hidden != 0) {
      for (std::size_t j = s.forget_hidden; j < 2 * s.forget_hidden; ++j) a.values[j] += 1.0;
    }
  }
  return p;
}

void gate(const double* h, std::size_t rows, std::size_t d, const double* w, const double* b,
          double* out, double* sig) {
  nn::affine(h, rows, d, w, b, d, out);
  for (std::size_t i = 0; i < rows * d; ++i) {
    const double s = nn::sigmoid(out[i]);
    if (sig != nullptr) sig[i] = s;
    out[i] = s * h[i];
  }
}

Matrix forward(const ModelConfig& cfg, const Parameters& params,
               const features::FramedInput& framed, ForwardTrace* trace) {
  check_params(cfg, params);
  const std::size_t frames = framed.frames();
  const std::size_t mels = framed.mels();
  const std::size_t d = cfg.hidden_d;
  const std::size_t hf = cfg.fullband_hidden_per_dir;
  const std::size_t hs = cfg.subband_hidden;
  const std::size_t nt = cfg.context.time_width();
  const std::size_t nf = cfg.context.freq_width();
  if (frames == 0 || mels != cfg.f_mel || framed.along_freq.d2 != nt ||
      framed.along_time.d0 != frames || framed.along_time.d1 != mels ||
      framed.along_time.d2 != nf) {
    throw ValidationError("model: framed input shape does not match the configuration");
  }
  const std::size_t bins = frames * mels;

  std::vector<double> ef(bins * d), et(bins * d);
  nn::affine(framed.along_freq.data.data(), bins, nt, params.data("embed_freq.weight"),
             params.data("embed_freq.bias"), d, ef.data());
  nn::affine(framed.along_time.data.data(), bins, nf, params.data("embed_time.weight"),
             params.data("embed_time.bias"), d, et.data());

  std::vector<double> s_prev;
  std::vector<double> z(bins * d), fb_in(bins * d), fb_out(bins * d), hidden(bins * d),
      sig(bins * d), gated(bins * d), w_in(bins * d);
  nn::LstmScratch scratch;
  if (trace != nullptr) trace->blocks.assign(cfg.n_blocks, {});

  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    const std::string p = block_prefix(b);
    for (std::size_t i = 0; i < bins * d; ++i) z[i] = b == 0 ? ef[i] : ef[i] + s_prev[i];

    // Full-band: T sequences running over the mel axis.
    transpose_tf(z.data(), frames, mels, d, fb_in.data());
    BlockTrace* bt = trace != nullptr ? &trace->blocks[b] : nullptr;
    const auto fwd = lstm_weights(params, p + "fullband.fwd.", d, hf);
    const auto bwd = lstm_weights(params, p + "fullband.bwd.", d, hf);
    scratch.resize(frames, hf);
    nn::lstm_scan(fwd, fb_in.data(), mels, frames, Direction::kForward, scratch, fb_out.data(),
                  d, bt != nullptr ? &bt->fb_fwd : nullptr);
    scratch.resize(frames, hf);
    nn::lstm_scan(bwd, fb_in.data(), mels, frames, Direction::kBackward, scratch,
                  fb_out.data() + hf, d, bt != nullptr ? &bt->fb_bwd : nullptr);
    transpose_tf(fb_out.data(), mels, frames, d, hidden.data());

    gate(hidden.data(), bins, d, params.data(p + "gate.weight"), params.data(p + "gate.bias"),
         gated.data(), sig.data());
    for (std::size_t i = 0; i < bins * d; ++i) w_in[i] = et[i] + gated[i];

    // Sub-band: F sequences running over time; w_in is already T x F x D.
    std::vector<double> s(bins * d);
    std::vector<double> sb_raw;
    const auto sfwd = lstm_weights(params, p + "subband.fwd.", d, hs);
    if (cfg.mode == Mode::kOnline) {
      scratch.resize(mels, hs);
      nn::lstm_scan(sfwd, w_in.data(), frames, mels, Direction::kForward, scratch, s.data(), d,
                    bt != nullptr ? &bt->sb_fwd : nullptr);
    } else {
      sb_raw.resize(bins * 2 * hs);
      const auto sbwd = lstm_weights(params, p + "subband.bwd.", d, hs);
      scratch.resize(mels, hs);
      nn::lstm_scan(sfwd, w_in.data(), frames, mels, Direction::kForward, scratch, sb_raw.data(),
                    2 * hs, bt != nullptr ? &bt->sb_fwd : nullptr);
      scratch.resize(mels, hs);
      nn::lstm_scan(sbwd, w_in.data(), frames, mels, Direction::kBackward, scratch,
                    sb_raw.data() + hs, 2 * hs, bt != nullptr ? &bt->sb_bwd : nullptr);
      nn::affine(sb_raw.data(), bins, 2 * hs, params.data(p + "subband.proj.weight"),
                 params.data(p + "subband.proj.bias"), d, s.data());
    }

    if (bt != nullptr) {
      bt->fb_input = fb_in;
      bt->fb_output = fb_out;
      bt->hidden = hidden;
      bt->gated = sig;
      bt->sb_input = w_in;
      bt->sb_output = cfg.mode == Mode::kOnline ? s : sb_raw;
      bt->out = s;
    }
    s_prev = std::move(s);
  }

  Matrix out(frames, mels);
  nn::affine(s_prev.data(), bins, d, params.data("head.weight"), params.data("head.bias"), 1,
             out.data.data());
  if (trace != nullptr) {
    trace->embed_freq = std::move(ef);
    trace->embed_time = std::move(et);
  }
  return out;
}

Matrix enhance(const ModelConfig& cfg, const Parameters& params, const Matrix& logmel) {
  return forward(cfg, params, features::frame_context(logmel, cfg.context));
}

StreamingModel::StreamingModel(const ModelConfig& cfg, const Parameters& params)
    : cfg_(cfg), params_(params) {
  if (cfg.mode != Mode::kOnline) {
    throw ValidationError("streaming inference requires an online model configuration");
  }
  check_params(cfg, params);
  const std::size_t f = cfg.f_mel;
  const std::size_t d = cfg.hidden_d;
  history_.assign((cfg.context.past_frames + 1) * f, 0.0);
  ctx_freq_.assign(f * cfg.context.time_width(), 0.0);
  ctx_time_.assign(f * cfg.context.freq_width(), 0.0);
  for (auto* v : {&embed_freq_, &embed_time_, &z_, &fb_out_, &gated_, &sb_in_, &s_}) {
    v->assign(f * d, 0.0);
  }
  fb_scratch_.resize(1, cfg.fullband_hidden_per_dir);
  sb_state_.resize(cfg.n_blocks);
  for (auto& st : sb_state_) st.resize(f, cfg.subband_hidden);
  // Resolve every weight pointer once; step() then only does arithmetic.
  embed_freq_w_ = params_.data("embed_freq.weight");
  embed_freq_b_ = params_.data("embed_freq.bias");
  embed_time_w_ = params_.data("embed_time.weight");
  embed_time_b_ = params_.data("embed_time.bias");
  head_w_ = params_.data("head.weight");
  head_b_ = params_.data("head.bias");
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    const std::string p = block_prefix(b);
    blocks_.push_back({lstm_weights(params_, p + "fullband.fwd.", d, cfg.fullband_hidden_per_dir),
                       lstm_weights(params_, p + "fullband.bwd.", d, cfg.fullband_hidden_per_dir),
                       lstm_weights(params_, p + "subband.fwd.", d, cfg.subband_hidden),
                       params_.data(p + "gate.weight"), params_.data(p + "gate.bias")});
  }
}

void StreamingModel::reset() {
  frames_seen_ = 0;
  history_head_ = 0;
  std::fill(history_.begin(), history_.end(), 0.0);
  for (auto& st : sb_state_) st.reset();
}

void StreamingModel::step(std::span<const double> frame, std::span<double> out) {
  const std::size_t f_count = cfg_.f_mel;
  const std::size_t d = cfg_.hidden_d;
  const std::size_t hf = cfg_.fullband_hidden_per_dir;
  const std::size_t past = cfg_.context.past_frames;
  const std::size_t nt = cfg_.context.time_width();
  const std::size_t nf = cfg_.context.freq_width();
  const std::size_t slots = past + 1;
  if (frame.size() != f_count || out.size() != f_count) {
    throw ValidationError("streaming: frame width must equal f_mel");
  }

  std::copy(frame.begin(), frame.end(), history_.begin() + static_cast<std::ptrdiff_t>(history_head_ * f_count));
  const std::size_t t = frames_seen_;
  for (std::size_t f = 0; f < f_count; ++f) {
    for (std::size_t j = 0; j < nt; ++j) {
      // Source frame t - past + j, zero before the stream start.
      double v = 0.0;
      if (t + j >= past) {
        const std::size_t back = past - j;  // frames before the current one
        const std::size_t slot = (history_head_ + slots - back) % slots;
        v = history_[slot * f_count + f];
      }
      ctx_freq_[f * nt + j] = v;
    }
    for (std::size_t j = 0; j < nf; ++j) {
      const long src = static_cast<long>(f) - static_cast<long>(cfg_.context.lower_freqs) +
                       static_cast<long>(j);
      ctx_time_[f * nf + j] =
          src >= 0 && src < static_cast<long>(f_count) ? frame[static_cast<std::size_t>(src)] : 0.0;
    }
  }
  history_head_ = (history_head_ + 1) % slots;

  nn::affine(ctx_freq_.data(), f_count, nt, embed_freq_w_, embed_freq_b_, d, embed_freq_.data());
  nn::affine(ctx_time_.data(), f_count, nf, embed_time_w_, embed_time_b_, d, embed_time_.data());

  for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
    const BlockWeights& bw = blocks_[b];
    for (std::size_t i = 0; i < f_count * d; ++i) {
      z_[i] = b == 0 ? embed_freq_[i] : embed_freq_[i] + s_[i];
    }
    fb_scratch_.reset();
    nn::lstm_scan(bw.fb_fwd, z_.data(), f_count, 1, Direction::kForward, fb_scratch_,
                  fb_out_.data(), d, nullptr);
    fb_scratch_.reset();
    nn::lstm_scan(bw.fb_bwd, z_.data(), f_count, 1, Direction::kBackward, fb_scratch_,
                  fb_out_.data() + hf, d, nullptr);
    gate(fb_out_.data(), f_count, d, bw.gate_w, bw.gate_b, gated_.data());
    for (std::size_t i = 0; i < f_count * d; ++i) sb_in_[i] = embed_time_[i] + gated_[i];
    nn::LstmScratch& st = sb_state_[b];
    nn::lstm_step(bw.sb, sb_in_.data(), f_count, st.h.data(), st.c.data(), st.gates.data());
    std::copy(st.h.begin(), st.h.end(), s_.begin());
  }
  nn::affine(s_.data(), f_count, d, head_w_, head_b_, 1, out.data());
  ++frames_seen_;
}

Matrix forward_streaming(const ModelConfig& cfg, const Parameters& params, const Matrix& logmel) {
  StreamingModel sm(cfg, params);
  Matrix out(logmel.rows, logmel.cols);
  for (std::size_t t = 0; t < logmel.rows; ++t) sm.step(logmel.row(t), out.row(t));
  return out;
}

}  // namespace melstream::model
