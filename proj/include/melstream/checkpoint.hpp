// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "melstream/params.hpp"
#include "melstream/pipeline.hpp"

// Named-array container ("MFSN"):
//   magic "MFSN" | u32 version | u32 len + UTF-8 config | then until EOF:
//   u32 len + UTF-8 name | u32 rank | u64 dims[rank] | f32 data (little endian)
namespace melstream::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr const char* kAdamFirstPrefix = "__adam_m/";
inline constexpr const char* kAdamSecondPrefix = "__adam_v/";
inline constexpr const char* kAdamStepName = "__adam_step";

struct Record {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> data;
};

struct Container {
  std::string config;  // UTF-8, JSON in practice
  std::vector<Record> records;
};

std::vector<std::uint8_t> encode(const Container& c);
Container decode(const std::vector<std::uint8_t>& bytes);
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

/// Serializes bundle config (model, front-end, normalization) as JSON.
std::string bundle_config_json(const ModelBundle& bundle);
/// Parses the JSON written by bundle_config_json into `bundle` (params untouched).
void parse_bundle_config(const std::string& json, ModelBundle& bundle);

void save(const std::filesystem::path& path, const ModelBundle& bundle,
          const OptimizerState* opt = nullptr);

struct Loaded {
  ModelBundle bundle;
  std::optional<OptimizerState> optimizer;
};

/// Throws if the layout does not match the stored model configuration.
Loaded load(const std::filesystem::path& path);

/// Enhanced log-mel on disk uses the same container, holding one "logmel"
/// array (frames x n_mels).
void save_logmel(const std::filesystem::path& path, const Matrix& logmel,
                 const std::string& kind);
Matrix load_logmel(const std::filesystem::path& path);

}  // namespace melstream::checkpoint
