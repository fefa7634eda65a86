// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "melstream/checkpoint.hpp"
#include "melstream/error.hpp"
#include "melstream/parallel.hpp"

namespace melstream::training {

using model::Mode;
using nn::Direction;

void TrainConfig::validate() const {
  require(epochs >= 1, "train: epochs must be >= 1");
  require(batch_size >= 1, "train: batch size must be >= 1");
  require(segment_seconds > 0.0, "train: segment length must be positive");
  require(lr_init > 0.0 && lr_peak > 0.0 && lr_final > 0.0, "train: learning rates must be positive");
  require(warmup_epochs >= 0.0 && warmup_epochs < static_cast<double>(epochs),
          "train: warmup must lie within [0, epochs)");
  require(lr_init <= lr_peak && lr_final <= lr_peak, "train: lr_init and lr_final must not exceed lr_peak");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "train: Adam betas must be in [0, 1)");
  require(eps > 0.0, "train: Adam eps must be positive");
  require(smoothing_frames > 1.0, "train: smoothing length must exceed one frame");
}

TrainConfig full_schedule() { return {}; }

model::ModelConfig desk_model(Mode mode) {
  model::ModelConfig c = model::ModelConfig::full(mode);
  c.hidden_d = 16;
  c.fullband_hidden_per_dir = 8;
  c.subband_hidden = 16;
  c.n_blocks = 1;
  return c;
}

TrainConfig desk_schedule() {
  TrainConfig t;
  t.epochs = 20;
  t.batch_size = 4;
  t.lr_init = 1e-3;
  t.lr_peak = 3e-3;
  t.warmup_epochs = 2;
  t.lr_final = 3e-4;
  t.average_last_k = 5;
  return t;
}

double mse_loss(const Matrix& pred, const Matrix& target) {
  require(pred.rows == target.rows && pred.cols == target.cols, "mse_loss: shape mismatch");
  require(!pred.data.empty(), "mse_loss: empty spectrogram");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double e = pred.data[i] - target.data[i];
    acc += e * e;
  }
  return acc / static_cast<double>(pred.data.size());
}

namespace {

void transpose_tf(const double* src, std::size_t a, std::size_t b, std::size_t d, double* dst) {
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      std::copy_n(src + (i * b + j) * d, d, dst + (j * a + i) * d);
    }
  }
}

nn::LstmWeights weights(const Parameters& p, const std::string& prefix, std::size_t in,
                        std::size_t h) {
  return {p.data(prefix + "w_ih"), p.data(prefix + "w_hh"), p.data(prefix + "bias"), in, h};
}

nn::LstmGradRefs grad_refs(GradientSet& g, const std::string& prefix) {
  return {g.data(prefix + "w_ih"), g.data(prefix + "w_hh"), g.data(prefix + "bias")};
}

void check_finite(const std::vector<double>& v, const std::string& where) {
  for (double x : v) {
    if (!std::isfinite(x)) throw RuntimeFailure("backward: non-finite value in " + where);
  }
}

}  // namespace

LossAndGrads backward(const model::ModelConfig& cfg, const Parameters& params,
                      const features::FramedInput& framed, const Matrix& target) {
  model::ForwardTrace tr;
  const Matrix pred = model::forward(cfg, params, framed, &tr);
  check_finite(pred.data, "head output");
  LossAndGrads res;
  res.loss = mse_loss(pred, target);
  res.grads = params.zeros_like();
  GradientSet& g = res.grads;

  const std::size_t frames = framed.frames();
  const std::size_t mels = framed.mels();
  const std::size_t bins = frames * mels;
  const std::size_t d = cfg.hidden_d;
  const std::size_t hf = cfg.fullband_hidden_per_dir;
  const std::size_t hs = cfg.subband_hidden;
  const double scale = 2.0 / static_cast<double>(bins);

  std::vector<double> dout(bins);
  for (std::size_t i = 0; i < bins; ++i) dout[i] = scale * (pred.data[i] - target.data[i]);

  const std::vector<double>& s_last = tr.blocks.back().out;
  nn::affine_backward_params(s_last.data(), dout.data(), bins, d, 1, g.data("head.weight"),
                             g.data("head.bias"));
  std::vector<double> ds(bins * d, 0.0);
  nn::affine_backward_input(dout.data(), bins, 1, params.data("head.weight"), d, ds.data());

  std::vector<double> d_ef(bins * d, 0.0), d_et(bins * d, 0.0);
  std::vector<double> dw(bins * d), dh(bins * d), dfb_out(bins * d), dfb_in(bins * d),
      da(bins * d);

  for (std::size_t bi = cfg.n_blocks; bi-- > 0;) {
    const model::BlockTrace& bt = tr.blocks[bi];
    const std::string p = model::block_prefix(bi);

    // Sub-band recurrence (over time, one sequence per mel band).
    std::fill(dw.begin(), dw.end(), 0.0);
    const auto sfwd = weights(params, p + "subband.fwd.", d, hs);
    if (cfg.mode == Mode::kOnline) {
      nn::lstm_scan_backward(sfwd, bt.sb_input.data(), frames, mels, Direction::kForward,
                             bt.sb_fwd, bt.sb_output.data(), d, ds.data(), d,
                             grad_refs(g, p + "subband.fwd."), dw.data());
    } else {
      std::vector<double> draw(bins * 2 * hs, 0.0);
      nn::affine_backward_params(bt.sb_output.data(), ds.data(), bins, 2 * hs, d,
                                 g.data(p + "subband.proj.weight"), g.data(p + "subband.proj.bias"));
      nn::affine_backward_input(ds.data(), bins, d, params.data(p + "subband.proj.weight"), 2 * hs,
                                draw.data());
      const auto sbwd = weights(params, p + "subband.bwd.", d, hs);
      nn::lstm_scan_backward(sfwd, bt.sb_input.data(), frames, mels, Direction::kForward,
                             bt.sb_fwd, bt.sb_output.data(), 2 * hs, draw.data(), 2 * hs,
                             grad_refs(g, p + "subband.fwd."), dw.data());
      nn::lstm_scan_backward(sbwd, bt.sb_input.data(), frames, mels, Direction::kBackward,
                             bt.sb_bwd, bt.sb_output.data() + hs, 2 * hs, draw.data() + hs, 2 * hs,
                             grad_refs(g, p + "subband.bwd."), dw.data());
    }
    check_finite(dw, p + "subband");

    // W = E_t + sigmoid(H Wg + bg) * H
    for (std::size_t i = 0; i < bins * d; ++i) {
      d_et[i] += dw[i];
      const double sg = bt.gated[i];
      dh[i] = dw[i] * sg;
      da[i] = dw[i] * bt.hidden[i] * sg * (1.0 - sg);
    }
    nn::affine_backward_params(bt.hidden.data(), da.data(), bins, d, d, g.data(p + "gate.weight"),
                               g.data(p + "gate.bias"));
    nn::affine_backward_input(da.data(), bins, d, params.data(p + "gate.weight"), d, dh.data());

    // Full-band recurrence (over mel bands, one sequence per frame).
    transpose_tf(dh.data(), frames, mels, d, dfb_out.data());
    std::fill(dfb_in.begin(), dfb_in.end(), 0.0);
    nn::lstm_scan_backward(weights(params, p + "fullband.fwd.", d, hf), bt.fb_input.data(), mels,
                           frames, Direction::kForward, bt.fb_fwd, bt.fb_output.data(), d,
                           dfb_out.data(), d, grad_refs(g, p + "fullband.fwd."), dfb_in.data());
    nn::lstm_scan_backward(weights(params, p + "fullband.bwd.", d, hf), bt.fb_input.data(), mels,
                           frames, Direction::kBackward, bt.fb_bwd, bt.fb_output.data() + hf, d,
                           dfb_out.data() + hf, d, grad_refs(g, p + "fullband.bwd."),
                           dfb_in.data());
    check_finite(dfb_in, p + "fullband");

    // Z = E_f (+ S_prev)
    transpose_tf(dfb_in.data(), mels, frames, d, ds.data());
    for (std::size_t i = 0; i < bins * d; ++i) d_ef[i] += ds[i];
  }

  nn::affine_backward_params(framed.along_freq.data.data(), d_ef.data(), bins,
                             cfg.context.time_width(), d, g.data("embed_freq.weight"),
                             g.data("embed_freq.bias"));
  nn::affine_backward_params(framed.along_time.data.data(), d_et.data(), bins,
                             cfg.context.freq_width(), d, g.data("embed_time.weight"),
                             g.data("embed_time.bias"));
  for (const auto& a : g.arrays()) check_finite(a.values, "gradient of " + a.name);
  return res;
}

GradCheckResult gradient_check(const model::ModelConfig& cfg, const Parameters& params,
                               const features::FramedInput& framed, const Matrix& target,
                               double h, double floor, bool corrupt_weights) {
  Parameters analytic_at = params;
  if (corrupt_weights) {
    for (auto& a : analytic_at.arrays()) {
      for (double& v : a.values) v += 0.25;
    }
  }
  const GradientSet g = backward(cfg, analytic_at, framed, target).grads;
  Parameters probe = params;
  GradCheckResult r;
  auto ps = probe.arrays();
  auto gs = g.arrays();
  for (std::size_t a = 0; a < ps.size(); ++a) {
    for (std::size_t i = 0; i < ps[a].values.size(); ++i) {
      const double orig = ps[a].values[i];
      ps[a].values[i] = orig + h;
      const double lp = mse_loss(model::forward(cfg, probe, framed), target);
      ps[a].values[i] = orig - h;
      const double lm = mse_loss(model::forward(cfg, probe, framed), target);
      ps[a].values[i] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double an = gs[a].values[i];
      const double rel =
          std::abs(an - numeric) / std::max({std::abs(an), std::abs(numeric), floor});
      ++r.checked;
      if (rel >= r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_array = ps[a].name;
        r.worst_index = i;
      }
    }
  }
  return r;
}

TinyProblem tiny_problem(model::Mode mode, std::uint64_t seed) {
  TinyProblem t;
  t.cfg.f_mel = 4;
  t.cfg.hidden_d = 6;
  t.cfg.n_blocks = 1;
  t.cfg.fullband_hidden_per_dir = 3;
  t.cfg.subband_hidden = 6;
  t.cfg.mode = mode;
  t.cfg.context.past_frames = 2;
  t.cfg.context.future_frames = mode == Mode::kOffline ? 1 : 0;
  t.cfg.context.lower_freqs = 1;
  t.cfg.context.upper_freqs = 1;
  t.cfg.norm_mode = mode == Mode::kOnline ? model::NormMode::kOnlineRecursive
                                          : model::NormMode::kOfflineGain;
  if (mode == Mode::kOffline) t.cfg.subband_hidden = 4;
  t.params = model::init_parameters(t.cfg, seed);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  t.input = Matrix(3, 4);
  t.target = Matrix(3, 4);
  for (double& v : t.input.data) v = gauss(rng);
  for (double& v : t.target.data) v = gauss(rng);
  t.framed = features::frame_context(t.input, t.cfg.context);
  return t;
}

OptimizerState make_optimizer_state(const Parameters& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(Parameters& params, const GradientSet& grads, OptimizerState& opt, double lr,
               double beta1, double beta2, double eps) {
  require(params.congruent_with(grads), "adam: gradients are not congruent with parameters");
  require(params.congruent_with(opt.m) && params.congruent_with(opt.v),
          "adam: optimizer state is not congruent with parameters");
  ++opt.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(opt.step));
  auto ps = params.arrays();
  auto gs = grads.arrays();
  auto ms = opt.m.arrays();
  auto vs = opt.v.arrays();
  for (std::size_t a = 0; a < ps.size(); ++a) {
    auto& p = ps[a].values;
    const auto& gr = gs[a].values;
    auto& m = ms[a].values;
    auto& v = vs[a].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * gr[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * gr[i] * gr[i];
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      p[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
}

double clip_grad_norm(GradientSet& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& a : grads.arrays()) {
    for (double v : a.values) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& a : grads.arrays()) {
      for (double& v : a.values) v *= s;
    }
  }
  return norm;
}

double lr_at(double epoch, const TrainConfig& tc) {
  const double total = static_cast<double>(tc.epochs);
  const double e = std::clamp(epoch, 0.0, total);
  if (e <= tc.warmup_epochs) {
    if (tc.warmup_epochs <= 0.0) return tc.lr_peak;
    return tc.lr_init + (tc.lr_peak - tc.lr_init) * (e / tc.warmup_epochs);
  }
  const double span = total - tc.warmup_epochs;
  const double progress = span > 0.0 ? (e - tc.warmup_epochs) / span : 1.0;
  return tc.lr_final + (tc.lr_peak - tc.lr_final) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

ModelBundle average_checkpoints(const std::vector<std::filesystem::path>& paths) {
  require(!paths.empty(), "average: need at least one checkpoint");
  ModelBundle avg = checkpoint::load(paths.front()).bundle;
  for (std::size_t i = 1; i < paths.size(); ++i) {
    const ModelBundle b = checkpoint::load(paths[i]).bundle;
    if (!(b.model == avg.model) || !(b.frontend == avg.frontend) || !(b.norm == avg.norm) ||
        !b.params.congruent_with(avg.params)) {
      throw ValidationError("average: checkpoint " + paths[i].string() +
                            " has a different configuration");
    }
    auto dst = avg.params.arrays();
    auto src = b.params.arrays();
    for (std::size_t a = 0; a < dst.size(); ++a) {
      for (std::size_t k = 0; k < dst[a].values.size(); ++k) dst[a].values[k] += src[a].values[k];
    }
  }
  const double n = static_cast<double>(paths.size());
  for (auto& a : avg.params.arrays()) {
    for (double& v : a.values) v /= n;
  }
  return avg;
}

std::string format_log_line(const EpochLog& e) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu\t%.9g\t%.9g\t%.9g", e.epoch, e.lr, e.train_mse, e.val_mse);
  return buf;
}

double evaluate_loss(const model::ModelConfig& cfg, const Parameters& params,
                     const std::vector<Example>& examples) {
  require(!examples.empty(), "evaluate_loss: no examples");
  std::vector<double> losses(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) {
    losses[i] = mse_loss(model::forward(cfg, params, examples[i].framed), examples[i].target);
  });
  double acc = 0.0;
  for (double l : losses) acc += l;
  return acc / static_cast<double>(examples.size());
}

namespace {

// Mean loss and summed-then-averaged gradients over examples[idx...], reduced
// in index order.
double batch_gradients(const model::ModelConfig& cfg, const Parameters& params,
                       const std::vector<Example>& examples, const std::vector<std::size_t>& idx,
                       GradientSet& grads) {
  std::vector<LossAndGrads> parts(idx.size());
  parallel_for(idx.size(), [&](std::size_t i) {
    const Example& ex = examples[idx[i]];
    parts[i] = backward(cfg, params, ex.framed, ex.target);
  });
  grads = params.zeros_like();
  double loss = 0.0;
  for (const auto& part : parts) {
    loss += part.loss;
    auto dst = grads.arrays();
    auto src = part.grads.arrays();
    for (std::size_t a = 0; a < dst.size(); ++a) {
      for (std::size_t k = 0; k < dst[a].values.size(); ++k) dst[a].values[k] += src[a].values[k];
    }
  }
  const double n = static_cast<double>(idx.size());
  for (auto& a : grads.arrays()) {
    for (double& v : a.values) v /= n;
  }
  return loss / n;
}

Example make_example(const model::ModelConfig& cfg, PreparedPair pair) {
  Example ex;
  ex.framed = features::frame_context(pair.input, cfg.context);
  ex.input = std::move(pair.input);
  ex.target = std::move(pair.target);
  return ex;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return synthdata::entry_seed(synthdata::entry_seed(a, static_cast<std::size_t>(b)),
                               static_cast<std::size_t>(c));
}

AudioBuffer crop(const AudioBuffer& a, std::size_t offset, std::size_t len) {
  AudioBuffer out;
  out.sample_rate = a.sample_rate;
  out.samples.assign(len, 0.0);
  for (std::size_t i = 0; i < len && offset + i < a.samples.size(); ++i) {
    out.samples[i] = a.samples[offset + i];
  }
  return out;
}

struct LoadedPair {
  AudioBuffer noisy;
  AudioBuffer target;
};

std::vector<LoadedPair> load_split(const synthdata::CorpusManifest& corpus, const std::string& split,
                                   Target target) {
  const auto entries = corpus.split(split);
  std::vector<LoadedPair> out(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const auto& e = entries[i];
    out[i].noisy = read_wav(corpus.path_of(e.noisy));
    out[i].target = read_wav(corpus.path_of(target == Target::kDirectPath ? e.direct : e.clean));
    if (out[i].noisy.samples.size() != out[i].target.samples.size()) {
      throw ValidationError("train: noisy/target length mismatch for entry " + std::to_string(e.index));
    }
  });
  return out;
}

std::filesystem::path epoch_path(const std::filesystem::path& dir, std::size_t epoch) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "ckpt_epoch_%03zu.mfsn", epoch);
  return dir / buf;
}

}  // namespace

std::vector<double> fit_steps(const model::ModelConfig& cfg, Parameters& params,
                              OptimizerState& opt, const std::vector<Example>& examples,
                              std::size_t steps, std::size_t batch, double lr, double clip_norm) {
  require(!examples.empty(), "fit_steps: no examples");
  require(batch >= 1, "fit_steps: batch must be >= 1");
  std::vector<double> losses;
  losses.reserve(steps);
  GradientSet grads;
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<std::size_t> idx(std::min(batch, examples.size()));
    for (auto& i : idx) i = cursor++ % examples.size();
    losses.push_back(batch_gradients(cfg, params, examples, idx, grads));
    clip_grad_norm(grads, clip_norm);
    adam_step(params, grads, opt, lr);
  }
  return losses;
}

TrainResult train(const TrainConfig& tc, const model::ModelConfig& mcfg,
                  const FrontendConfig& fcfg, const synthdata::CorpusManifest& corpus,
                  const std::filesystem::path& out_dir) {
  tc.validate();
  mcfg.validate();
  require(fcfg.n_mels == mcfg.f_mel, "train: front-end mel count differs from model f_mel");
  const auto train_pairs = load_split(corpus, "train", tc.target);
  const auto val_pairs = load_split(corpus, "val", tc.target);
  require(!train_pairs.empty(), "train: corpus has no training entries");
  require(!val_pairs.empty(), "train: corpus has no validation entries");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw RuntimeFailure("train: cannot create output directory " + out_dir.string());
  }

  const Frontend frontend(fcfg);
  const std::size_t seg_len =
      static_cast<std::size_t>(std::llround(tc.segment_seconds * kSampleRate));

  ModelBundle bundle;
  bundle.model = mcfg;
  bundle.frontend = fcfg;
  bundle.norm.smoothing_frames = tc.smoothing_frames;
  if (mcfg.norm_mode == model::NormMode::kOnlineRecursive) {
    std::vector<Matrix> mels(train_pairs.size());
    parallel_for(train_pairs.size(), [&](std::size_t i) {
      mels[i] = frontend.log_mel(dsp::peak_normalize(train_pairs[i].noisy, mix_seed(tc.seed, 0, i)).audio);
    });
    bundle.norm.global_mean = features::compute_global_mean(mels);
  }

  // Validation set is fixed across epochs (full utterances, fixed gains).
  std::vector<Example> val(val_pairs.size());
  parallel_for(val_pairs.size(), [&](std::size_t i) {
    val[i] = make_example(mcfg, prepare_pair(mcfg, bundle.norm, frontend, val_pairs[i].noisy,
                                             val_pairs[i].target, mix_seed(tc.seed, 1, i)));
  });
  TrainResult result;
  result.global_mean = bundle.norm.global_mean;
  {
    double acc = 0.0;
    for (const auto& ex : val) acc += mse_loss(ex.input, ex.target);
    result.unprocessed_val_mse = acc / static_cast<double>(val.size());
  }

  bundle.params = model::init_parameters(mcfg, tc.seed);
  OptimizerState opt = make_optimizer_state(bundle.params);
  std::mt19937_64 order_rng(mix_seed(tc.seed, 2, 0));
  std::ofstream log(out_dir / "loss.log", std::ios::trunc);
  if (!log) throw RuntimeFailure("train: cannot write loss.log in " + out_dir.string());

  std::vector<std::filesystem::path> epoch_files;
  GradientSet grads;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const double lr = lr_at(static_cast<double>(epoch - 1), tc);
    std::vector<Example> examples(train_pairs.size());
    parallel_for(train_pairs.size(), [&](std::size_t i) {
      const std::uint64_t s = mix_seed(tc.seed, 3 + epoch, i);
      const auto& tp = train_pairs[i];
      std::size_t offset = 0;
      if (tp.noisy.samples.size() > seg_len) {
        offset = static_cast<std::size_t>(s % (tp.noisy.samples.size() - seg_len + 1));
      }
      examples[i] = make_example(mcfg, prepare_pair(mcfg, bundle.norm, frontend,
                                                    crop(tp.noisy, offset, seg_len),
                                                    crop(tp.target, offset, seg_len), s >> 1));
    });
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), order_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::vector<std::size_t> idx(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + tc.batch_size)));
      const double l = batch_gradients(mcfg, bundle.params, examples, idx, grads);
      if (!std::isfinite(l)) {
        throw RuntimeFailure("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += l * static_cast<double>(idx.size());
      ++batches;
      clip_grad_norm(grads, tc.clip_norm);
      adam_step(bundle.params, grads, opt, lr, tc.beta1, tc.beta2, tc.eps);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.train_mse = loss_sum / static_cast<double>(order.size());
    entry.val_mse = evaluate_loss(mcfg, bundle.params, val);
    if (!std::isfinite(entry.val_mse)) {
      throw RuntimeFailure("train: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.log.push_back(entry);
    log << format_log_line(entry) << "\n" << std::flush;

    const auto path = epoch_path(out_dir, epoch);
    checkpoint::save(path, bundle);
    epoch_files.push_back(path);
  }

  result.final_checkpoint = out_dir / "final.mfsn";
  checkpoint::save(result.final_checkpoint, bundle, &opt);
  if (tc.average_last_k > 0) {
    const std::size_t k = std::min(tc.average_last_k, epoch_files.size());
    const std::vector<std::filesystem::path> last(epoch_files.end() - static_cast<std::ptrdiff_t>(k),
                                                  epoch_files.end());
    result.averaged_checkpoint = out_dir / "averaged.mfsn";
    checkpoint::save(result.averaged_checkpoint, average_checkpoints(last));
  }
  return result;
}

}  // namespace melstream::training
