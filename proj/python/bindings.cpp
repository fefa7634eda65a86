// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "melstream/checkpoint.hpp"
#include "melstream/cli.hpp"
#include "melstream/error.hpp"
#include "melstream/eval.hpp"
#include "melstream/features.hpp"
#include "melstream/pipeline.hpp"
#include "melstream/synthdata.hpp"
#include "melstream/training.hpp"

namespace py = pybind11;
using namespace melstream;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

AudioBuffer to_audio(const Array& a, int rate) {
  if (a.ndim() != 1) throw ValidationError("expected a 1-D sample array");
  AudioBuffer b;
  b.samples.assign(a.data(), a.data() + a.size());
  b.sample_rate = rate;
  return b;
}

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ValidationError("expected a 2-D (frames x mels) array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

py::array_t<double> from_matrix(const Matrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

py::array_t<double> from_vector(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

model::ModelConfig config_for(const std::string& mode, const std::string& preset) {
  const model::Mode m = model::parse_mode(mode);
  if (preset == "full") return model::ModelConfig::full(m);
  if (preset == "desk") return training::desk_model(m);
  throw ValidationError("unknown preset '" + preset + "' (expected full|desk)");
}

class PyStream {
 public:
  explicit PyStream(const ModelBundle& b) : sp_(b), mels_(b.frontend.n_mels) {}
  py::array_t<double> push(const Array& samples) {
    if (samples.ndim() != 1) throw ValidationError("expected a 1-D sample array");
    std::vector<double> frames;
    const std::size_t n = sp_.push({samples.data(), static_cast<std::size_t>(samples.size())}, frames);
    Matrix m(n, mels_);
    std::copy(frames.begin(), frames.end(), m.data.begin());
    return from_matrix(m);
  }
  std::size_t frames_emitted() const { return sp_.frames_emitted(); }

 private:
  StreamProcessor sp_;
  std::size_t mels_;
};

}  // namespace

PYBIND11_MODULE(_melstream, m) {
  m.doc() = "Log-mel speech enhancement core";
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  m.def("read_wav", [](const std::filesystem::path& p) { return from_vector(read_wav(p).samples); },
        py::arg("path"), "Mono WAV as float64 samples at 16 kHz.");
  m.def("write_wav",
        [](const std::filesystem::path& p, const Array& s, int rate) { write_wav(p, to_audio(s, rate)); },
        py::arg("path"), py::arg("samples"), py::arg("sample_rate") = kSampleRate);

  m.def("log_mel",
        [](const Array& s, bool asr_frontend, std::size_t n_mels) {
          FrontendConfig fc = asr_frontend ? FrontendConfig::asr() : FrontendConfig::speech_enhancement();
          fc.n_mels = n_mels;
          return from_matrix(Frontend(fc).log_mel(to_audio(s, kSampleRate)));
        },
        py::arg("samples"), py::arg("asr_frontend") = false, py::arg("n_mels") = 80,
        "Natural-log mel power spectrogram, frames x n_mels.");
  m.def("frame_count",
        [](std::size_t length, bool asr_frontend) {
          return dsp::frame_count(length, asr_frontend ? dsp::StftConfig::asr()
                                                       : dsp::StftConfig::speech_enhancement());
        },
        py::arg("length"), py::arg("asr_frontend") = false);
  m.def("mel_to_waveform",
        [](const Array& logmel, std::size_t iterations, std::uint64_t seed) {
          const FrontendConfig fc;
          const Frontend fe(fc);
          return from_vector(
              dsp::mel_to_waveform({to_matrix(logmel), fc.floor}, fe.filterbank(), fc.stft, iterations, seed)
                  .audio.samples);
        },
        py::arg("logmel"), py::arg("iterations") = 32, py::arg("seed") = 0);

  m.def("smoothing_alpha", &features::smoothing_alpha, py::arg("length_frames"));
  m.def("online_normalize",
        [](const Array& logmel, double smoothing_frames, double global_mean) {
          auto r = features::online_normalize(to_matrix(logmel),
                                              features::NormState::with_length(smoothing_frames, global_mean));
          return py::make_tuple(from_matrix(r.values), from_vector(r.mu));
        },
        py::arg("logmel"), py::arg("smoothing_frames") = features::kDefaultSmoothingFrames,
        py::arg("global_mean") = 0.0, "Returns (normalized, mu).");
  m.def("asr_normalize", [](const Array& logmel) { return from_matrix(features::asr_normalize(to_matrix(logmel))); },
        py::arg("logmel"));

  m.def("param_count", [](const std::string& mode, const std::string& preset) {
          return model::param_count(config_for(mode, preset));
        },
        py::arg("mode") = "online", py::arg("preset") = "full");
  m.def("gradient_check",
        [](const std::string& mode, std::uint64_t seed, bool inject_fault) {
          const auto t = training::tiny_problem(model::parse_mode(mode), seed);
          return training::gradient_check(t.cfg, t.params, t.framed, t.target, 1e-5, 1e-6, inject_fault)
              .max_rel_error;
        },
        py::arg("mode") = "online", py::arg("seed") = 7, py::arg("inject_fault") = false,
        "Largest relative error between analytic and central-difference gradients.");
  m.def("causality_probe",
        [](const std::string& mode, std::size_t t_cut, std::size_t trials, std::size_t frames,
           std::uint64_t seed) {
          const auto cfg = training::desk_model(model::parse_mode(mode));
          return eval::causality_probe(cfg, model::init_parameters(cfg, seed), t_cut, trials, frames, seed);
        },
        py::arg("mode") = "online", py::arg("t_cut") = 5, py::arg("trials") = 4, py::arg("frames") = 16,
        py::arg("seed") = 1);

  m.def("build_corpus",
        [](std::size_t n_train, std::size_t n_val, std::size_t n_test, std::uint64_t seed,
           const std::filesystem::path& out, double duration) {
          return synthdata::build_corpus(n_train, n_val, n_test, seed, out, duration).entries.size();
        },
        py::arg("n_train"), py::arg("n_val"), py::arg("n_test"), py::arg("seed"), py::arg("out"),
        py::arg("duration") = 3.0, "Writes a corpus and returns the number of entries.");
  m.def("verify_corpus",
        [](const std::filesystem::path& p) { return synthdata::verify_corpus(synthdata::read_manifest(p)); },
        py::arg("path"));

  py::class_<ModelBundle>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return checkpoint::load(p).bundle; },
                  py::arg("path"))
      .def_static("init",
                  [](const std::string& mode, const std::string& preset, std::uint64_t seed) {
                    ModelBundle b;
                    b.model = config_for(mode, preset);
                    b.params = model::init_parameters(b.model, seed);
                    return b;
                  },
                  py::arg("mode") = "online", py::arg("preset") = "desk", py::arg("seed") = 0)
      .def("save", [](const ModelBundle& b, const std::filesystem::path& p) { checkpoint::save(p, b); },
           py::arg("path"))
      .def_property_readonly("mode", [](const ModelBundle& b) { return model::to_string(b.model.mode); })
      .def_property_readonly("n_mels", [](const ModelBundle& b) { return b.model.f_mel; })
      .def_property_readonly("param_count", [](const ModelBundle& b) { return b.params.scalar_count(); })
      .def("enhance_logmel",
           [](const ModelBundle& b, const Array& logmel) {
             return from_matrix(model::enhance(b.model, b.params, to_matrix(logmel)));
           },
           py::arg("logmel"), "Network output for an already normalized log-mel input.")
      .def("enhance",
           [](const ModelBundle& b, const Array& samples, std::uint64_t seed) {
             return from_matrix(enhance_audio(b, to_audio(samples, kSampleRate), seed));
           },
           py::arg("samples"), py::arg("seed") = 0, "Enhanced log-mel at the input level.")
      .def("stream", [](const ModelBundle& b) { return std::make_unique<PyStream>(b); })
      .def("rtf", [](const ModelBundle& b, double seconds, std::size_t reps) {
             return eval::measure_rtf(b, seconds, reps).rtf;
           },
           py::arg("seconds") = 2.0, py::arg("reps") = 3);

  py::class_<PyStream>(m, "Stream")
      .def("push", &PyStream::push, py::arg("samples"), "Returns the frames completed by these samples.")
      .def_property_readonly("frames_emitted", &PyStream::frames_emitted);

  m.def("cli",
        [](std::vector<std::string> args) {
          args.insert(args.begin(), "melstream");
          std::ostringstream out, err;
          const int code = cli::run(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a command line; returns (exit_code, stdout, stderr).");
}
