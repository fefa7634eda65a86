// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/params.hpp"

#include <functional>
#include <numeric>

#include "melstream/error.hpp"

namespace melstream {

NamedArray& ParamSet::add(std::string name, std::vector<std::size_t> shape, double fill) {
  if (contains(name)) throw ValidationError("duplicate parameter name: " + name);
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  index_.emplace(name, arrays_.size());
  arrays_.push_back({std::move(name), std::move(shape), std::vector<double>(n, fill)});
  return arrays_.back();
}

NamedArray& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter: " + name);
  return arrays_[it->second];
}

const NamedArray& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter: " + name);
  return arrays_[it->second];
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& a : arrays_) n += a.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (const auto& a : arrays_) z.add(a.name, a.shape);
  return z;
}

bool ParamSet::congruent_with(const ParamSet& other) const {
  if (arrays_.size() != other.arrays_.size()) return false;
  for (std::size_t i = 0; i < arrays_.size(); ++i) {
    if (arrays_[i].name != other.arrays_[i].name || arrays_[i].shape != other.arrays_[i].shape) {
      return false;
    }
  }
  return true;
}

}  // namespace melstream
