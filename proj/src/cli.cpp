// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>

#include "CLI11.hpp"
#include "melstream/checkpoint.hpp"
#include "melstream/error.hpp"
#include "melstream/eval.hpp"
#include "melstream/synthdata.hpp"
#include "melstream/training.hpp"

namespace melstream::cli {
namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ValidationError(what + " not found: " + path);
}

// ---- synth-data ----------------------------------------------------------

struct SynthArgs {
  std::size_t n_train = 200;
  std::size_t n_val = 20;
  std::size_t n_test = 20;
  std::uint64_t seed = 1;
  double duration = 3.0;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto m = synthdata::build_corpus(a.n_train, a.n_val, a.n_test, a.seed, a.out, a.duration);
  std::size_t reverb = 0;
  for (const auto& e : m.entries) reverb += e.spec.reverberant ? 1 : 0;
  out << "wrote " << m.entries.size() << " entries to " << a.out << " (" << reverb
      << " reverberant)\n";
  return kOk;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string corpus;
  std::string out;
  std::string mode = "online";
  std::string preset = "full";
  std::string target = "direct";
  std::optional<std::string> norm_mode;
  bool asr_frontend = false;
  std::optional<std::size_t> epochs, batch_size, hidden, blocks, fullband_hidden, subband_hidden,
      past_frames, future_frames, lower_freqs, upper_freqs, n_mels, average_last;
  std::optional<double> lr_init, lr_peak, lr_final, warmup_epochs, smoothing_len, clip_norm;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const model::Mode mode = model::parse_mode(a.mode);
  model::ModelConfig mc;
  training::TrainConfig tc;
  if (a.preset == "full") {
    mc = model::ModelConfig::full(mode);
    tc = training::full_schedule();
  } else if (a.preset == "desk") {
    mc = training::desk_model(mode);
    tc = training::desk_schedule();
  } else {
    throw ValidationError("unknown preset '" + a.preset + "' (expected full|desk)");
  }
  if (a.norm_mode) mc.norm_mode = model::parse_norm_mode(*a.norm_mode);
  if (a.hidden) {
    mc.hidden_d = *a.hidden;
    mc.fullband_hidden_per_dir = *a.hidden / 2;
    mc.subband_hidden = *a.hidden;
  }
  if (a.blocks) mc.n_blocks = *a.blocks;
  if (a.fullband_hidden) mc.fullband_hidden_per_dir = *a.fullband_hidden;
  if (a.subband_hidden) mc.subband_hidden = *a.subband_hidden;
  if (a.past_frames) mc.context.past_frames = *a.past_frames;
  if (a.future_frames) mc.context.future_frames = *a.future_frames;
  if (a.lower_freqs) mc.context.lower_freqs = *a.lower_freqs;
  if (a.upper_freqs) mc.context.upper_freqs = *a.upper_freqs;
  if (a.n_mels) mc.f_mel = *a.n_mels;
  mc.validate();

  if (a.epochs) tc.epochs = *a.epochs;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.lr_init) tc.lr_init = *a.lr_init;
  if (a.lr_peak) tc.lr_peak = *a.lr_peak;
  if (a.lr_final) tc.lr_final = *a.lr_final;
  if (a.warmup_epochs) tc.warmup_epochs = *a.warmup_epochs;
  else tc.warmup_epochs = std::min(tc.warmup_epochs, static_cast<double>(tc.epochs - 1));
  if (a.average_last) tc.average_last_k = *a.average_last;
  if (a.clip_norm) tc.clip_norm = *a.clip_norm;
  tc.seed = a.seed;
  if (a.target == "direct") tc.target = training::Target::kDirectPath;
  else if (a.target == "clean") tc.target = training::Target::kReverberantClean;
  else throw ValidationError("unknown target '" + a.target + "' (expected direct|clean)");

  FrontendConfig fc = a.asr_frontend ? FrontendConfig::asr() : FrontendConfig::speech_enhancement();
  fc.n_mels = mc.f_mel;
  if (a.smoothing_len) tc.smoothing_frames = *a.smoothing_len;
  tc.validate();

  const auto corpus = synthdata::read_manifest(a.corpus);
  out << "model: " << model::to_string(mc.mode) << ", " << model::param_count(mc)
      << " parameters, norm " << model::to_string(mc.norm_mode) << "\n";
  const auto r = training::train(tc, mc, fc, corpus, a.out);
  for (const auto& e : r.log) out << training::format_log_line(e) << "\n";
  out << "unprocessed_val_mse=" << fmt("%.9g", r.unprocessed_val_mse) << "\n";
  out << "final_val_mse=" << fmt("%.9g", r.log.back().val_mse) << "\n";
  out << "final_checkpoint=" << r.final_checkpoint.string() << "\n";
  if (!r.averaged_checkpoint.empty()) {
    out << "averaged_checkpoint=" << r.averaged_checkpoint.string() << "\n";
  }
  return kOk;
}

// ---- enhance -------------------------------------------------------------

struct EnhanceArgs {
  std::string checkpoint;
  std::string input;
  std::string out;
  std::string emit = "mel";
  std::size_t gl_iters = 32;
  std::uint64_t seed = 0;
};

int cmd_enhance(const EnhanceArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.input, "input");
  if (a.emit != "mel" && a.emit != "wav" && a.emit != "asr-mel") {
    throw ValidationError("unknown --emit '" + a.emit + "' (expected mel|wav|asr-mel)");
  }
  const ModelBundle bundle = checkpoint::load(a.checkpoint).bundle;
  const AudioBuffer noisy = read_wav(a.input);
  const Matrix enhanced = enhance_audio(bundle, noisy, a.seed);
  if (a.emit == "mel") {
    checkpoint::save_logmel(a.out, enhanced, "enhanced-logmel");
  } else if (a.emit == "asr-mel") {
    checkpoint::save_logmel(a.out, features::asr_normalize(enhanced), "asr-logmel");
  } else {
    const Frontend frontend(bundle.frontend);
    auto gl = dsp::mel_to_waveform({enhanced, bundle.frontend.floor}, frontend.filterbank(),
                                   bundle.frontend.stft, a.gl_iters, a.seed);
    gl.audio.samples.resize(noisy.samples.size(), 0.0);
    write_wav(a.out, gl.audio);
  }
  out << "frames=" << enhanced.rows << " mels=" << enhanced.cols << " emit=" << a.emit
      << " out=" << a.out << "\n";
  return kOk;
}

// ---- stream --------------------------------------------------------------

struct StreamArgs {
  std::string checkpoint;
  std::string input;
  std::string out;
  std::size_t chunk = 0;
};

int cmd_stream(const StreamArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.input, "input");
  const ModelBundle bundle = checkpoint::load(a.checkpoint).bundle;
  if (bundle.model.mode != model::Mode::kOnline) {
    throw ValidationError("stream: checkpoint holds an offline model; streaming needs --mode online");
  }
  const AudioBuffer noisy = read_wav(a.input);
  StreamProcessor sp(bundle);
  const std::size_t chunk = a.chunk > 0 ? a.chunk : bundle.frontend.stft.hop;
  std::vector<double> frames;
  frames.reserve((noisy.samples.size() / bundle.frontend.stft.hop + 1) * bundle.frontend.n_mels);
  double total = 0.0, worst = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t pos = 0; pos < noisy.samples.size(); pos += chunk) {
    const std::size_t n = std::min(chunk, noisy.samples.size() - pos);
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t got = sp.push({noisy.samples.data() + pos, n}, frames);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (got > 0) {
      total += dt;
      worst = std::max(worst, dt / static_cast<double>(got));
    }
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::size_t count = sp.frames_emitted();
  Matrix m(count, bundle.frontend.n_mels);
  std::copy(frames.begin(), frames.end(), m.data.begin());
  checkpoint::save_logmel(a.out, m, "enhanced-logmel");
  out << "frames=" << count << "\n";
  out << "mean_frame_latency_ms=" << fmt("%.4f", count > 0 ? 1e3 * total / count : 0.0) << "\n";
  out << "max_frame_latency_ms=" << fmt("%.4f", 1e3 * worst) << "\n";
  out << "algorithmic_latency_ms="
      << fmt("%.1f", 1e3 * bundle.frontend.stft.frame_len / kSampleRate) << "\n";
  out << "rtf=" << fmt("%.6g", wall / noisy.duration_seconds()) << "\n";
  return kOk;
}

// ---- verify --------------------------------------------------------------

struct VerifyArgs {
  std::string probe = "all";
  std::string mode = "both";
  bool inject_fault = false;
  std::uint64_t seed = 7;
};

constexpr double kGradTolerance = 1e-4;

bool probe_gradcheck(model::Mode mode, const VerifyArgs& a, std::ostream& out) {
  const auto tp = training::tiny_problem(mode, a.seed);
  const auto r = training::gradient_check(tp.cfg, tp.params, tp.framed, tp.target, 1e-5, 1e-6,
                                          a.inject_fault);
  const bool ok = r.max_rel_error < kGradTolerance;
  out << (ok ? "PASS" : "FAIL") << " gradcheck[" << model::to_string(mode)
      << "] max_rel_error=" << fmt("%.3e", r.max_rel_error) << " worst=" << r.worst_array << "["
      << r.worst_index << "] entries=" << r.checked << "\n";
  return ok;
}

bool probe_causality(model::Mode mode, const VerifyArgs& a, std::ostream& out) {
  const auto tp = training::tiny_problem(mode, a.seed);
  const std::size_t frames = 24;
  double influence = 0.0;
  for (std::size_t cut : {std::size_t{3}, std::size_t{11}}) {
    influence = std::max(influence, eval::causality_probe(tp.cfg, tp.params, cut, 3, frames, a.seed + cut));
  }
  const double at_end = eval::causality_probe(tp.cfg, tp.params, frames - 1, 2, frames, a.seed);
  const bool ok = mode == model::Mode::kOnline ? influence == 0.0 && at_end == 0.0
                                               : influence > 0.0 && at_end == 0.0;
  out << (ok ? "PASS" : "FAIL") << " causality[" << model::to_string(mode)
      << "] influence=" << fmt("%.1f", influence) << (influence != 0.0 ? fmt(" (%.3e)", influence) : "")
      << "\n";
  return ok;
}

bool probe_dsp(std::ostream& out) {
  bool ok = true;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.3);
  for (const auto& cfg : {dsp::StftConfig::speech_enhancement(), dsp::StftConfig::asr()}) {
    AudioBuffer x;
    x.samples.resize(kSampleRate);
    for (double& v : x.samples) v = g(rng);
    const AudioBuffer y = dsp::istft(dsp::stft(x, cfg));
    double err = 0.0;
    // Interior only: the first sample sits under a zero window value.
    const std::size_t covered = std::min(y.samples.size(), x.samples.size()) - cfg.frame_len;
    for (std::size_t i = cfg.frame_len; i < covered; ++i) err = std::max(err, std::abs(y.samples[i] - x.samples[i]));
    const bool pass = err < 1e-6;
    ok = ok && pass;
    out << (pass ? "PASS" : "FAIL") << " stft-roundtrip[hop=" << cfg.hop
        << "] max_abs_error=" << fmt("%.3e", err) << "\n";
  }
  const auto fb = dsp::mel_filterbank(80, dsp::StftConfig::speech_enhancement(), kSampleRate, 0.0, 8000.0);
  bool tri = true;
  for (std::size_t m = 0; m < fb.n_mels(); ++m) {
    // each filter rises then falls
    bool falling = false;
    double prev = 0.0;
    for (std::size_t k = 0; k < fb.weights.cols; ++k) {
      const double w = fb.weights(m, k);
      if (w < 0.0) tri = false;
      if (w < prev) falling = true;
      else if (falling && w > prev && prev > 0.0) tri = false;
      prev = w;
    }
  }
  ok = ok && tri;
  out << (tri ? "PASS" : "FAIL") << " mel-filterbank[80] triangular\n";
  return ok;
}

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  if (a.probe != "all" && a.probe != "gradcheck" && a.probe != "causality" && a.probe != "dsp") {
    throw ValidationError("unknown --probe '" + a.probe + "' (expected all|gradcheck|causality|dsp)");
  }
  std::vector<model::Mode> modes;
  if (a.mode == "both") modes = {model::Mode::kOnline, model::Mode::kOffline};
  else modes = {model::parse_mode(a.mode)};
  bool ok = true;
  if (a.probe == "all" || a.probe == "gradcheck") {
    for (auto m : modes) ok = probe_gradcheck(m, a, out) && ok;
  }
  if (a.probe == "all" || a.probe == "causality") {
    for (auto m : modes) ok = probe_causality(m, a, out) && ok;
  }
  if (a.probe == "all" || a.probe == "dsp") ok = probe_dsp(out) && ok;
  out << (ok ? "verify: all probes passed" : "verify: FAILED") << "\n";
  return ok ? kOk : kRuntime;
}

// ---- eval / rtf ----------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string corpus;
  std::string split = "test";
  std::string target = "direct";
  std::string out;
  bool rtf = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  if (a.target != "direct" && a.target != "clean") {
    throw ValidationError("unknown target '" + a.target + "' (expected direct|clean)");
  }
  const ModelBundle bundle = checkpoint::load(a.checkpoint).bundle;
  const auto corpus = synthdata::read_manifest(a.corpus);
  auto report = eval::logmel_mse_report(bundle, corpus, a.split, a.target == "direct");
  if (a.rtf) report.rtf = eval::measure_rtf(bundle, 3.0, 3).rtf;
  const std::string text = eval::format_report(report);
  out << text;
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw RuntimeFailure("eval: cannot write " + a.out);
    f << text;
  }
  return kOk;
}

struct RtfArgs {
  std::string checkpoint;
  double seconds = 3.0;
  std::size_t reps = 5;
  std::string path = "auto";
};

int cmd_rtf(const RtfArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  const ModelBundle bundle = checkpoint::load(a.checkpoint).bundle;
  std::optional<eval::RtfPath> p;
  if (a.path == "streaming") p = eval::RtfPath::kStreaming;
  else if (a.path == "batch") p = eval::RtfPath::kBatch;
  else if (a.path != "auto") throw ValidationError("unknown --path '" + a.path + "'");
  const auto r = eval::measure_rtf(bundle, a.seconds, a.reps, p);
  out << "path=" << (r.path == eval::RtfPath::kStreaming ? "streaming" : "batch") << "\n";
  out << "audio_seconds=" << fmt("%.3f", r.audio_seconds) << "\n";
  out << "frames=" << r.frames << "\n";
  out << "rtf=" << fmt("%.6g", r.rtf) << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"melstream: streaming log-mel speech enhancement"};
  app.name(args.empty() ? "melstream" : fs::path(args[0]).filename().string());
  app.require_subcommand(1, 1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic noisy/reverberant corpus");
  synth->add_option("--n-train", sa.n_train)->check(CLI::PositiveNumber);
  synth->add_option("--n-val", sa.n_val)->check(CLI::PositiveNumber);
  synth->add_option("--n-test", sa.n_test)->check(CLI::PositiveNumber);
  synth->add_option("--seed", sa.seed);
  synth->add_option("--duration", sa.duration, "Seconds per utterance")->check(CLI::PositiveNumber);
  synth->add_option("--out", sa.out, "Output directory")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on a corpus manifest");
  train->add_option("--corpus,--manifest", ta.corpus, "Corpus directory or manifest.tsv")->required();
  train->add_option("--out", ta.out, "Output directory")->required();
  train->add_option("--mode", ta.mode)->check(CLI::IsMember({"online", "offline"}));
  train->add_option("--preset", ta.preset)->check(CLI::IsMember({"full", "desk"}));
  train->add_option("--target", ta.target)->check(CLI::IsMember({"direct", "clean"}));
  train->add_option("--norm-mode", ta.norm_mode);
  train->add_flag("--asr-frontend", ta.asr_frontend, "32 ms / 8 ms STFT front-end");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--batch-size", ta.batch_size);
  train->add_option("--lr-init", ta.lr_init);
  train->add_option("--lr-peak", ta.lr_peak);
  train->add_option("--lr-final", ta.lr_final);
  train->add_option("--warmup-epochs", ta.warmup_epochs);
  train->add_option("--clip-norm", ta.clip_norm);
  train->add_option("--average-last", ta.average_last);
  train->add_option("--hidden", ta.hidden);
  train->add_option("--blocks", ta.blocks);
  train->add_option("--fullband-hidden", ta.fullband_hidden);
  train->add_option("--subband-hidden", ta.subband_hidden);
  train->add_option("--past-frames", ta.past_frames);
  train->add_option("--future-frames", ta.future_frames);
  train->add_option("--lower-freqs", ta.lower_freqs);
  train->add_option("--upper-freqs", ta.upper_freqs);
  train->add_option("--n-mels", ta.n_mels);
  train->add_option("--smoothing-len", ta.smoothing_len);
  train->add_option("--seed", ta.seed);

  EnhanceArgs ea;
  auto* enhance = app.add_subcommand("enhance", "Enhance a WAV file in batch");
  enhance->add_option("--checkpoint", ea.checkpoint)->required();
  enhance->add_option("--input", ea.input)->required();
  enhance->add_option("--out", ea.out)->required();
  enhance->add_option("--emit", ea.emit)->check(CLI::IsMember({"mel", "wav", "asr-mel"}));
  enhance->add_option("--gl-iters", ea.gl_iters);
  enhance->add_option("--seed", ea.seed);

  StreamArgs sta;
  auto* stream = app.add_subcommand("stream", "Enhance a WAV file frame by frame (online models)");
  stream->add_option("--checkpoint", sta.checkpoint)->required();
  stream->add_option("--input", sta.input)->required();
  stream->add_option("--out", sta.out)->required();
  stream->add_option("--chunk", sta.chunk, "Samples per push (default: one hop)");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run gradient, causality and DSP self-checks");
  verify->add_option("--probe", va.probe)->check(CLI::IsMember({"all", "gradcheck", "causality", "dsp"}));
  verify->add_option("--mode", va.mode)->check(CLI::IsMember({"online", "offline", "both"}));
  verify->add_option("--seed", va.seed);
  verify->add_flag("--inject-fault", va.inject_fault, "Corrupt the weights seen by the analytic gradient");

  EvalArgs eva;
  auto* evalc = app.add_subcommand("eval", "Log-mel MSE report over a corpus split");
  evalc->add_option("--checkpoint", eva.checkpoint)->required();
  evalc->add_option("--corpus,--manifest", eva.corpus)->required();
  evalc->add_option("--split", eva.split)->check(CLI::IsMember({"train", "val", "test"}));
  evalc->add_option("--target", eva.target)->check(CLI::IsMember({"direct", "clean"}));
  evalc->add_option("--out", eva.out, "Also write the report here");
  evalc->add_flag("--rtf", eva.rtf, "Append a real-time-factor measurement");

  RtfArgs ra;
  auto* rtf = app.add_subcommand("rtf", "Measure the real-time factor of a checkpoint");
  rtf->add_option("--checkpoint", ra.checkpoint)->required();
  rtf->add_option("--seconds", ra.seconds)->check(CLI::PositiveNumber);
  rtf->add_option("--reps", ra.reps)->check(CLI::PositiveNumber);
  rtf->add_option("--path", ra.path)->check(CLI::IsMember({"auto", "streaming", "batch"}));

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(sa, out);
    if (train->parsed()) return cmd_train(ta, out);
    if (enhance->parsed()) return cmd_enhance(ea, out);
    if (stream->parsed()) return cmd_stream(sta, out);
    if (verify->parsed()) return cmd_verify(va, out);
    if (evalc->parsed()) return cmd_eval(eva, out);
    if (rtf->parsed()) return cmd_rtf(ra, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  err << app.help();
  return kUsage;
}

}  // namespace melstream::cli
