// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "melstream/audio.hpp"

namespace melstream::synthdata {

inline constexpr double kMinSnrDb = -5.0;
inline constexpr double kMaxSnrDb = 20.0;
inline constexpr double kReverbProbability = 0.75;

struct MixSpec {
  double snr_db = 0.0;
  bool reverberant = false;
  double rir_decay_s = 0.0;  // time to -60 dB; 0 when dry
  std::uint64_t seed = 0;

  void validate() const;
};

/// Harmonic speech stand-in: 3-8 harmonics of a 100-300 Hz fundamental with
/// slow pitch and amplitude modulation, separated by silent gaps. Peak 0.5.
AudioBuffer gen_speech_proxy(std::uint64_t seed, double duration_s);

/// Stationary-to-slowly-varying coloured noise, unit-ish RMS.
AudioBuffer gen_noise(std::uint64_t seed, double duration_s);

struct RoomResponse {
  AudioBuffer response;
  std::size_t direct_delay = 0;  // samples; the direct path has unit gain
};

/// Unit direct impulse at a random delay <= 10 ms followed (1 ms later) by
/// exponentially decaying white noise reaching -60 dB at decay_s.
RoomResponse gen_rir(std::uint64_t seed, double decay_s, int sample_rate = kSampleRate);

/// Linear convolution truncated to the length of `x`.
std::vector<double> convolve_same(const std::vector<double>& x, const std::vector<double>& h);

struct Mixture {
  AudioBuffer noisy;
  AudioBuffer scaled_noise;
  double noise_gain = 1.0;
};

/// Scales noise so that 10 log10(P_clean / P_noise) = snr_db and adds it.
Mixture mix_at_snr(const AudioBuffer& clean, const AudioBuffer& noise, double snr_db);

double snr_db(const AudioBuffer& signal, const AudioBuffer& noise);

/// One fully synthesized corpus entry, before quantization.
struct SynthEntry {
  AudioBuffer noisy;
  AudioBuffer clean;   // reverberant (or dry) speech component of `noisy`
  AudioBuffer direct;  // direct-path target
  AudioBuffer noise;   // scaled noise component of `noisy`
  MixSpec spec;
};

SynthEntry synthesize_entry(std::uint64_t entry_seed, double duration_s);

/// Per-entry seed derived from (global seed, index).
std::uint64_t entry_seed(std::uint64_t global_seed, std::size_t index);

struct CorpusEntry {
  std::size_t index = 0;
  std::string split;
  std::string noisy;   // relative to the manifest directory
  std::string clean;
  std::string direct;
  MixSpec spec;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  double duration_s = 3.0;
  std::vector<CorpusEntry> entries;

  std::vector<CorpusEntry> split(const std::string& name) const;
  std::filesystem::path path_of(const std::string& rel) const { return root / rel; }
};

inline constexpr const char* kManifestName = "manifest.tsv";
inline constexpr const char* kChecksumName = "checksums.tsv";

/// Writes train/, val/, test/ WAV triplets, manifest.tsv and checksums.tsv
/// under out_dir. Entry i uses entry_seed(seed, i), so the result does not
/// depend on the worker count.
CorpusManifest build_corpus(std::size_t n_train, std::size_t n_val, std::size_t n_test,
                            std::uint64_t seed, const std::filesystem::path& out_dir,
                            double duration_s = 3.0);

/// Accepts the manifest file or its directory.
CorpusManifest read_manifest(const std::filesystem::path& path);

/// Recomputes lengths, rates and checksums. Returns a list of problems
/// (empty when consistent).
std::vector<std::string> verify_corpus(const CorpusManifest& manifest);

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes);

}  // namespace melstream::synthdata
