// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace melstream {

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Ordered collection of uniquely named real arrays. Used for model
/// parameters, gradients and optimizer moments.
class ParamSet {
 public:
  NamedArray& add(std::string name, std::vector<std::size_t> shape, double fill = 0.0);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  NamedArray& at(const std::string& name);
  const NamedArray& at(const std::string& name) const;
  double* data(const std::string& name) { return at(name).values.data(); }
  const double* data(const std::string& name) const { return at(name).values.data(); }

  std::span<NamedArray> arrays() { return arrays_; }
  std::span<const NamedArray> arrays() const { return arrays_; }
  std::size_t array_count() const { return arrays_.size(); }
  std::size_t scalar_count() const;

  // Same names and shapes, all zeros.
  ParamSet zeros_like() const;
  bool congruent_with(const ParamSet& other) const;

  bool operator==(const ParamSet& other) const { return arrays_ == other.arrays_; }

 private:
  std::vector<NamedArray> arrays_;
  std::map<std::string, std::size_t> index_;
};

inline bool operator==(const NamedArray& a, const NamedArray& b) {
  return a.name == b.name && a.shape == b.shape && a.values == b.values;
}

using Parameters = ParamSet;
using GradientSet = ParamSet;

}  // namespace melstream

namespace melstream {

/// Adam first/second moments, shape-congruent with the parameters.
struct OptimizerState {
  ParamSet m;
  ParamSet v;
  std::uint64_t step = 0;
};

}  // namespace melstream
