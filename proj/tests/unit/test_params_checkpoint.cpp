// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "melstream/checkpoint.hpp"
#include "melstream/error.hpp"
#include "melstream/training.hpp"

using namespace melstream;
using namespace melstream::checkpoint;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "melstream_test_ckpt" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

ModelBundle small_bundle(model::Mode mode) {
  ModelBundle b;
  b.model = training::desk_model(mode);
  b.model.f_mel = 12;
  b.frontend.n_mels = 12;
  b.norm.global_mean = -3.25;
  b.norm.smoothing_frames = 150;
  b.params = model::init_parameters(b.model, 5);
  return b;
}

}  // namespace

TEST_CASE("param set bookkeeping") {
  ParamSet p;
  p.add("a", {2, 3}, 1.0);
  p.add("b", {4});
  CHECK(p.scalar_count() == 10);
  CHECK(p.array_count() == 2);
  CHECK(p.contains("a"));
  CHECK_FALSE(p.contains("c"));
  CHECK_THROWS(p.add("a", {1}));
  CHECK_THROWS(p.at("c"));
  const ParamSet z = p.zeros_like();
  CHECK(z.congruent_with(p));
  for (double v : z.at("a").values) CHECK(v == 0.0);
  ParamSet q;
  q.add("a", {3, 2});
  q.add("b", {4});
  CHECK_FALSE(q.congruent_with(p));
}

TEST_CASE("container encode/decode is lossless") {
  Container c;
  c.config = "{\"kind\":\"x\"}";
  c.records.push_back({"alpha", {2, 2}, {1.0f, -2.0f, 3.5f, 0.25f}});
  c.records.push_back({"scalar", {}, {7.0f}});
  const auto bytes = encode(c);
  CHECK(std::memcmp(bytes.data(), "MFSN", 4) == 0);
  CHECK(bytes[4] == 1);
  const Container d = decode(bytes);
  CHECK(d.config == c.config);
  REQUIRE(d.records.size() == 2);
  CHECK(d.records[0].dims == c.records[0].dims);
  CHECK(d.records[0].data == c.records[0].data);
  CHECK(d.records[1].data == c.records[1].data);
  CHECK(encode(d) == bytes);
}

TEST_CASE("save, load, save is byte identical") {
  const fs::path dir = temp_dir("rt");
  for (model::Mode mode : {model::Mode::kOnline, model::Mode::kOffline}) {
    const ModelBundle b = small_bundle(mode);
    save(dir / "a.mfsn", b);
    const Loaded l = load(dir / "a.mfsn");
    CHECK(l.bundle.model == b.model);
    CHECK(l.bundle.frontend == b.frontend);
    CHECK(l.bundle.norm == b.norm);
    CHECK_FALSE(l.optimizer.has_value());
    for (std::size_t a = 0; a < b.params.array_count(); ++a) {
      const auto& x = b.params.arrays()[a].values;
      const auto& y = l.bundle.params.arrays()[a].values;
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == static_cast<double>(static_cast<float>(x[i])));
    }
    save(dir / "b.mfsn", l.bundle);
    CHECK(slurp(dir / "a.mfsn") == slurp(dir / "b.mfsn"));
  }
}

TEST_CASE("optimizer state round trip") {
  const fs::path dir = temp_dir("opt");
  const ModelBundle b = small_bundle(model::Mode::kOnline);
  OptimizerState opt = training::make_optimizer_state(b.params);
  opt.step = 17;
  opt.m.at("head.bias").values[0] = 0.5;
  opt.v.at("head.bias").values[0] = 0.125;
  save(dir / "o.mfsn", b, &opt);
  const Loaded l = load(dir / "o.mfsn");
  REQUIRE(l.optimizer.has_value());
  CHECK(l.optimizer->step == 17);
  CHECK(l.optimizer->m.at("head.bias").values[0] == 0.5);
  CHECK(l.optimizer->v.at("head.bias").values[0] == 0.125);
  CHECK(l.optimizer->m.congruent_with(b.params));
  save(dir / "o2.mfsn", l.bundle, &*l.optimizer);
  CHECK(slurp(dir / "o.mfsn") == slurp(dir / "o2.mfsn"));
}

TEST_CASE("bad magic, truncation and version are rejected") {
  const fs::path dir = temp_dir("bad");
  save(dir / "ok.mfsn", small_bundle(model::Mode::kOnline));
  auto bytes = slurp(dir / "ok.mfsn");

  auto magic = bytes;
  magic[0] = 'X';
  spit(dir / "magic.mfsn", magic);
  CHECK_THROWS_AS(load(dir / "magic.mfsn"), ValidationError);

  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    spit(dir / "trunc.mfsn", t);
    CHECK_THROWS_AS(load(dir / "trunc.mfsn"), ValidationError);
  }

  auto ver = bytes;
  ver[4] = 9;
  spit(dir / "ver.mfsn", ver);
  CHECK_THROWS_AS(load(dir / "ver.mfsn"), ValidationError);
  CHECK_THROWS(load(dir / "missing.mfsn"));
}

TEST_CASE("layout mismatches are rejected") {
  const fs::path dir = temp_dir("layout");
  ModelBundle b = small_bundle(model::Mode::kOnline);
  Container c = decode(encode(Container{bundle_config_json(b), {}}));
  for (const auto& a : b.params.arrays()) {
    Record r{a.name, {}, {}};
    for (auto d : a.shape) r.dims.push_back(d);
    for (double v : a.values) r.data.push_back(static_cast<float>(v));
    c.records.push_back(r);
  }
  write_container(dir / "base.mfsn", c);
  CHECK_NOTHROW(load(dir / "base.mfsn"));

  Container missing = c;
  missing.records.pop_back();
  write_container(dir / "m.mfsn", missing);
  CHECK_THROWS_AS(load(dir / "m.mfsn"), ValidationError);

  Container extra = c;
  extra.records.push_back({"rogue", {1}, {1.0f}});
  write_container(dir / "e.mfsn", extra);
  CHECK_THROWS_AS(load(dir / "e.mfsn"), ValidationError);

  Container shape = c;
  auto rect = std::find_if(shape.records.begin(), shape.records.end(), [](const Record& r) {
    return r.dims.size() == 2 && r.dims[0] != r.dims[1];
  });
  REQUIRE(rect != shape.records.end());
  rect->dims = {rect->dims[1], rect->dims[0]};
  write_container(dir / "s.mfsn", shape);
  CHECK_THROWS_AS(load(dir / "s.mfsn"), ValidationError);

  Container cfg = c;
  cfg.config = "{not json";
  write_container(dir / "j.mfsn", cfg);
  CHECK_THROWS_AS(load(dir / "j.mfsn"), ValidationError);
}

TEST_CASE("log-mel container round trip") {
  const fs::path dir = temp_dir("logmel");
  Matrix m(3, 4);
  for (std::size_t i = 0; i < 12; ++i) m.data[i] = 0.5 * static_cast<double>(i) - 2.0;
  save_logmel(dir / "x.mfsn", m, "enhanced-logmel");
  CHECK(load_logmel(dir / "x.mfsn") == m);
  save(dir / "model.mfsn", small_bundle(model::Mode::kOnline));
  CHECK_THROWS_AS(load_logmel(dir / "model.mfsn"), ValidationError);
}
