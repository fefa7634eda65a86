// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "fft.hpp"
#include "melstream/error.hpp"
#include "melstream/parallel.hpp"

namespace melstream::synthdata {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSpeechPeak = 0.5;
constexpr double kHeadroomPeak = 0.99;
constexpr double kMaxDirectDelayS = 0.010;
constexpr double kTailOffsetS = 0.001;
constexpr double kTailLevel = 0.05;
constexpr double kMinDecayS = 0.2;
constexpr double kMaxDecayS = 0.8;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t to_samples(double seconds, int rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

void scale(std::vector<double>& x, double g) {
  for (double& v : x) v *= g;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::string entry_name(std::size_t index, const char* kind) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%06zu_%s.wav", index, kind);
  return buf;
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw RuntimeFailure("corpus: cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void MixSpec::validate() const {
  require(snr_db >= kMinSnrDb && snr_db <= kMaxSnrDb, "mix: snr_db outside [-5, 20]");
  require(!reverberant || rir_decay_s > 0.0, "mix: reverberant entry needs rir_decay_s > 0");
}

AudioBuffer gen_speech_proxy(std::uint64_t seed, double duration_s) {
  require(duration_s > 0.0, "speech proxy: duration must be positive");
  std::mt19937_64 rng(seed);
  const int sr = kSampleRate;
  const std::size_t n = to_samples(duration_s, sr);
  require(n > 0, "speech proxy: duration shorter than one sample");

  const double f0 = uniform(rng, 110.0, 280.0);
  const int n_harm = std::uniform_int_distribution<int>(3, 8)(rng);
  std::vector<double> amp(n_harm);
  for (int k = 0; k < n_harm; ++k) amp[k] = uniform(rng, 0.5, 1.0) / (k + 1);
  const double vib_rate = uniform(rng, 3.0, 6.0);
  const double vib_depth = uniform(rng, 0.01, 0.03);
  const double am_rate = uniform(rng, 2.0, 5.0);

  // Syllable layout: voiced segments separated by exact-zero gaps; the first
  // gap is always at least 150 ms.
  std::vector<double> env(n, 0.0);
  std::size_t pos = to_samples(uniform(rng, 0.05, 0.15), sr);
  bool long_gap_done = false;
  while (pos < n) {
    const std::size_t len = to_samples(uniform(rng, 0.15, 0.40), sr);
    const std::size_t ramp = std::min<std::size_t>(to_samples(0.02, sr), len / 2);
    for (std::size_t i = 0; i < len && pos + i < n; ++i) {
      double e = 1.0;
      if (i < ramp) e = 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
      if (len - 1 - i < ramp) e = 0.5 - 0.5 * std::cos(std::numbers::pi * (len - 1 - i) / ramp);
      env[pos + i] = e;
    }
    pos += len;
    const double gap_s = long_gap_done ? uniform(rng, 0.12, 0.30) : uniform(rng, 0.15, 0.30);
    long_gap_done = true;
    pos += to_samples(gap_s, sr);
  }

  AudioBuffer out;
  out.samples.assign(n, 0.0);
  double phase = 0.0;
  const double am_phase = uniform(rng, 0.0, kTwoPi);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double f = f0 * (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * t));
    phase += kTwoPi * f / sr;
    if (env[i] == 0.0) continue;
    double s = 0.0;
    for (int k = 0; k < n_harm; ++k) s += amp[k] * std::sin((k + 1) * phase);
    const double am = 0.75 + 0.25 * std::sin(kTwoPi * am_rate * t + am_phase);
    out.samples[i] = env[i] * am * s;
  }
  const double pk = out.peak();
  if (pk > 0.0) scale(out.samples, kSpeechPeak / pk);
  return out;
}

AudioBuffer gen_noise(std::uint64_t seed, double duration_s) {
  require(duration_s > 0.0, "noise: duration must be positive");
  std::mt19937_64 rng(seed);
  const std::size_t n = to_samples(duration_s, kSampleRate);
  const double pole = uniform(rng, -0.5, 0.95);
  const double mod_rate = uniform(rng, 0.2, 2.0);
  const double mod_depth = uniform(rng, 0.0, 0.3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  AudioBuffer out;
  out.samples.resize(n);
  double y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y = pole * y + gauss(rng);
    out.samples[i] = y;
  }
  const double rms = std::sqrt(out.power());
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    out.samples[i] *= (1.0 + mod_depth * std::sin(kTwoPi * mod_rate * t)) / rms;
  }
  return out;
}

RoomResponse gen_rir(std::uint64_t seed, double decay_s, int sample_rate) {
  require(decay_s > 0.0, "rir: decay_s must be positive");
  require(sample_rate > 0, "rir: sample rate must be positive");
  std::mt19937_64 rng(seed);
  const std::size_t max_delay = to_samples(kMaxDirectDelayS, sample_rate);
  const std::size_t delay = std::uniform_int_distribution<std::size_t>(0, max_delay)(rng);
  const std::size_t offset = std::max<std::size_t>(1, to_samples(kTailOffsetS, sample_rate));
  const std::size_t tail_len = std::max<std::size_t>(1, to_samples(decay_s, sample_rate));
  const double tau = decay_s / (3.0 * std::log(10.0));

  RoomResponse r;
  r.direct_delay = delay;
  r.response.sample_rate = sample_rate;
  r.response.samples.assign(delay + offset + tail_len, 0.0);
  r.response.samples[delay] = 1.0;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = offset; i < offset + tail_len; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    r.response.samples[delay + i] = kTailLevel * std::exp(-t / tau) * gauss(rng);
  }
  return r;
}

std::vector<double> convolve_same(const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);
  if (n == 0 || h.empty()) return y;
  if (h.size() <= 64) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      const std::size_t kmax = std::min(h.size() - 1, i);
      for (std::size_t k = 0; k <= kmax; ++k) acc += h[k] * x[i - k];
      y[i] = acc;
    }
    return y;
  }
  const std::size_t m = next_pow2(n + h.size() - 1);
  std::vector<double> a(m, 0.0), b(m, 0.0), out(m);
  std::copy(x.begin(), x.end(), a.begin());
  std::copy(h.begin(), h.end(), b.begin());
  std::vector<std::complex<double>> fa(m / 2 + 1), fb(m / 2 + 1);
  dsp::detail::rfft(m, a.data(), fa.data());
  dsp::detail::rfft(m, b.data(), fb.data());
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  dsp::detail::irfft(m, fa.data(), out.data());
  for (std::size_t i = 0; i < n; ++i) y[i] = out[i] / static_cast<double>(m);
  return y;
}

Mixture mix_at_snr(const AudioBuffer& clean, const AudioBuffer& noise, double snr) {
  require(clean.samples.size() == noise.samples.size(), "mix: clean and noise lengths differ");
  require(clean.sample_rate == noise.sample_rate, "mix: sample rates differ");
  const double pc = clean.power();
  const double pn = noise.power();
  require(pc > 0.0, "mix: clean signal has zero power");
  require(pn > 0.0, "mix: noise signal has zero power");
  require(std::isfinite(snr), "mix: snr must be finite");
  Mixture m;
  m.noise_gain = std::sqrt(pc / (pn * std::pow(10.0, snr / 10.0)));
  m.scaled_noise.sample_rate = clean.sample_rate;
  m.scaled_noise.samples = noise.samples;
  scale(m.scaled_noise.samples, m.noise_gain);
  m.noisy.sample_rate = clean.sample_rate;
  m.noisy.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    m.noisy.samples[i] = clean.samples[i] + m.scaled_noise.samples[i];
  }
  return m;
}

double snr_db(const AudioBuffer& signal, const AudioBuffer& noise) {
  const double pn = noise.power();
  require(pn > 0.0, "snr: noise has zero power");
  return 10.0 * std::log10(signal.power() / pn);
}

std::uint64_t entry_seed(std::uint64_t global_seed, std::size_t index) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = global_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SynthEntry synthesize_entry(std::uint64_t seed, double duration_s) {
  std::mt19937_64 rng(seed);
  const std::uint64_t speech_seed = rng();
  const std::uint64_t noise_seed = rng();
  const std::uint64_t rir_seed = rng();

  SynthEntry e;
  e.spec.seed = seed;
  e.spec.snr_db = uniform(rng, kMinSnrDb, kMaxSnrDb);
  e.spec.reverberant = uniform(rng, 0.0, 1.0) < kReverbProbability;
  const double decay = uniform(rng, kMinDecayS, kMaxDecayS);

  const AudioBuffer dry = gen_speech_proxy(speech_seed, duration_s);
  e.clean.sample_rate = e.direct.sample_rate = dry.sample_rate;
  if (e.spec.reverberant) {
    e.spec.rir_decay_s = decay;
    const RoomResponse rir = gen_rir(rir_seed, decay);
    e.clean.samples = convolve_same(dry.samples, rir.response.samples);
    e.direct.samples.assign(dry.samples.size(), 0.0);
    for (std::size_t i = rir.direct_delay; i < dry.samples.size(); ++i) {
      e.direct.samples[i] = dry.samples[i - rir.direct_delay];
    }
  } else {
    e.clean.samples = dry.samples;
    e.direct.samples = dry.samples;
  }

  const AudioBuffer noise = gen_noise(noise_seed, duration_s);
  Mixture mix = mix_at_snr(e.clean, noise, e.spec.snr_db);
  e.noisy = std::move(mix.noisy);
  e.noise = std::move(mix.scaled_noise);

  const double pk = std::max({e.noisy.peak(), e.clean.peak(), e.direct.peak(), e.noise.peak()});
  if (pk > kHeadroomPeak) {
    const double g = kHeadroomPeak / pk;
    for (auto* b : {&e.noisy, &e.clean, &e.direct, &e.noise}) scale(b->samples, g);
  }
  return e;
}

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<CorpusEntry> CorpusManifest::split(const std::string& name) const {
  std::vector<CorpusEntry> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(e);
  }
  return out;
}

CorpusManifest build_corpus(std::size_t n_train, std::size_t n_val, std::size_t n_test,
                            std::uint64_t seed, const std::filesystem::path& out_dir,
                            double duration_s) {
  require(n_train > 0 && n_val > 0 && n_test > 0, "corpus: split counts must be positive");
  require(duration_s > 0.0, "corpus: duration must be positive");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  for (const char* s : {"train", "val", "test"}) fs::create_directories(out_dir / s, ec);
  if (ec || !fs::is_directory(out_dir / "test")) {
    throw RuntimeFailure("corpus: cannot create output directory " + out_dir.string());
  }

  CorpusManifest m;
  m.root = out_dir;
  m.seed = seed;
  m.n_train = n_train;
  m.n_val = n_val;
  m.n_test = n_test;
  m.duration_s = duration_s;
  const std::size_t total = n_train + n_val + n_test;
  m.entries.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    CorpusEntry& c = m.entries[i];
    c.index = i;
    c.split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    c.noisy = c.split + "/" + entry_name(i, "noisy");
    c.clean = c.split + "/" + entry_name(i, "clean");
    c.direct = c.split + "/" + entry_name(i, "direct");
  }

  std::vector<std::string> checksum_lines(total);
  parallel_for(total, [&](std::size_t i) {
    CorpusEntry& c = m.entries[i];
    const SynthEntry e = synthesize_entry(entry_seed(seed, i), duration_s);
    c.spec = e.spec;
    std::string lines;
    for (auto [rel, audio] : {std::pair{&c.noisy, &e.noisy}, std::pair{&c.clean, &e.clean},
                              std::pair{&c.direct, &e.direct}}) {
      const fs::path p = out_dir / *rel;
      write_wav(p, *audio);
      lines += *rel + "\t" + std::to_string(audio->samples.size()) + "\t" +
               std::to_string(audio->sample_rate) + "\t" + hex64(fnv1a64(file_bytes(p))) + "\n";
    }
    checksum_lines[i] = std::move(lines);
  });

  std::ofstream man(out_dir / kManifestName, std::ios::trunc);
  if (!man) throw RuntimeFailure("corpus: cannot write manifest in " + out_dir.string());
  man << "# melstream corpus\n";
  man << "# seed=" << seed << "\n";
  man << "# n_train=" << n_train << " n_val=" << n_val << " n_test=" << n_test << "\n";
  char dur[32];
  std::snprintf(dur, sizeof(dur), "%.17g", duration_s);
  man << "# duration_s=" << dur << "\n";
  man << "# index\tnoisy\tclean\tdirect\tsnr_db\treverb_flag\tseed\n";
  for (const auto& c : m.entries) {
    char snr[40];
    std::snprintf(snr, sizeof(snr), "%.17g", c.spec.snr_db);
    man << c.index << '\t' << c.noisy << '\t' << c.clean << '\t' << c.direct << '\t' << snr
        << '\t' << (c.spec.reverberant ? 1 : 0) << '\t' << c.spec.seed << "\n";
  }
  if (!man) throw RuntimeFailure("corpus: manifest write failed");

  std::ofstream sums(out_dir / kChecksumName, std::ios::trunc);
  if (!sums) throw RuntimeFailure("corpus: cannot write checksums in " + out_dir.string());
  sums << "# path\tsamples\tsample_rate\tfnv1a64\n";
  for (const auto& l : checksum_lines) sums << l;
  return m;
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  fs::path file = path;
  if (fs::is_directory(path)) file = path / kManifestName;
  std::ifstream in(file);
  if (!in) throw RuntimeFailure("manifest: cannot open " + file.string());
  CorpusManifest m;
  m.root = file.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "seed") m.seed = std::stoull(val);
        if (key == "n_train") m.n_train = std::stoull(val);
        if (key == "n_val") m.n_val = std::stoull(val);
        if (key == "n_test") m.n_test = std::stoull(val);
        if (key == "duration_s") m.duration_s = std::stod(val);
      }
      continue;
    }
    std::vector<std::string> cols;
    std::istringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 7) {
      throw ValidationError("manifest: line " + std::to_string(lineno) + " has " +
                            std::to_string(cols.size()) + " columns, expected 7");
    }
    CorpusEntry e;
    try {
      e.index = std::stoull(cols[0]);
      e.noisy = cols[1];
      e.clean = cols[2];
      e.direct = cols[3];
      e.spec.snr_db = std::stod(cols[4]);
      e.spec.reverberant = cols[5] == "1";
      e.spec.seed = std::stoull(cols[6]);
    } catch (const std::exception&) {
      throw ValidationError("manifest: malformed line " + std::to_string(lineno));
    }
    const auto slash = e.noisy.find('/');
    e.split = slash == std::string::npos ? "train" : e.noisy.substr(0, slash);
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw ValidationError("manifest: no entries in " + file.string());
  return m;
}

std::vector<std::string> verify_corpus(const CorpusManifest& m) {
  namespace fs = std::filesystem;
  std::vector<std::string> problems;
  std::ifstream in(m.root / kChecksumName);
  if (!in) {
    problems.push_back("missing " + std::string(kChecksumName));
    return problems;
  }
  std::string line;
  std::size_t checked = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string rel, samples, rate, hash;
    std::getline(ss, rel, '\t');
    std::getline(ss, samples, '\t');
    std::getline(ss, rate, '\t');
    std::getline(ss, hash, '\t');
    const fs::path p = m.root / rel;
    if (!fs::exists(p)) {
      problems.push_back("missing file " + rel);
      continue;
    }
    ++checked;
    if (hex64(fnv1a64(file_bytes(p))) != hash) problems.push_back("checksum mismatch " + rel);
    try {
      const AudioBuffer a = read_wav(p);
      if (std::to_string(a.samples.size()) != samples) problems.push_back("length mismatch " + rel);
      if (std::to_string(a.sample_rate) != rate) problems.push_back("rate mismatch " + rel);
    } catch (const std::exception& ex) {
      problems.push_back("unreadable " + rel + ": " + ex.what());
    }
  }
  for (const auto& e : m.entries) {
    std::size_t len = 0;
    for (const auto* rel : {&e.noisy, &e.clean, &e.direct}) {
      if (!fs::exists(m.root / *rel)) {
        problems.push_back("manifest references missing file " + *rel);
        continue;
      }
      const std::size_t n = read_wav(m.root / *rel).samples.size();
      if (len != 0 && n != len) problems.push_back("triplet length mismatch at index " + std::to_string(e.index));
      len = n;
    }
  }
  if (checked != 3 * m.entries.size()) problems.push_back("checksum list does not cover the manifest");
  return problems;
}

}  // namespace melstream::synthdata
