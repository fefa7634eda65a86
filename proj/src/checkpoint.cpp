// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "melstream/error.hpp"

namespace melstream::checkpoint {
namespace {

using nlohmann::json;

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_string(std::vector<std::uint8_t>& b, const std::string& s) {
  put_u32(b, static_cast<std::uint32_t>(s.size()));
  b.insert(b.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  bool done() const { return pos_ == b_.size(); }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  void floats(std::vector<float>& out, std::uint64_t n) {
    if (n > (b_.size() - pos_) / 4) throw ValidationError("checkpoint: truncated array data");
    out.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint32_t raw = u32();
      std::memcpy(&out[i], &raw, 4);
    }
  }
  void magic(const char* m) {
    need(4);
    if (std::memcmp(b_.data() + pos_, m, 4) != 0) {
      throw ValidationError("checkpoint: bad magic (not an MFSN file)");
    }
    pos_ += 4;
  }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw ValidationError("checkpoint: truncated file");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

bool is_reserved(const std::string& name) { return name.rfind("__", 0) == 0; }

}  // namespace

std::vector<std::uint8_t> encode(const Container& c) {
  std::vector<std::uint8_t> b = {'M', 'F', 'S', 'N'};
  put_u32(b, kFormatVersion);
  put_string(b, c.config);
  for (const Record& r : c.records) {
    put_string(b, r.name);
    put_u32(b, static_cast<std::uint32_t>(r.dims.size()));
    std::uint64_t n = 1;
    for (auto d : r.dims) {
      put_u64(b, d);
      n *= d;
    }
    if (n != r.data.size()) throw ValidationError("checkpoint: dims do not match data for " + r.name);
    for (float f : r.data) {
      std::uint32_t raw;
      std::memcpy(&raw, &f, 4);
      put_u32(b, raw);
    }
  }
  return b;
}

Container decode(const std::vector<std::uint8_t>& bytes) {
  Reader rd(bytes);
  rd.magic("MFSN");
  const std::uint32_t version = rd.u32();
  if (version != kFormatVersion) {
    throw ValidationError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Container c;
  c.config = rd.str();
  while (!rd.done()) {
    Record r;
    r.name = rd.str();
    const std::uint32_t rank = rd.u32();
    std::uint64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      r.dims.push_back(rd.u64());
      n *= r.dims.back();
    }
    rd.floats(r.data, n);
    c.records.push_back(std::move(r));
  }
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const auto bytes = encode(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("checkpoint: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeFailure("checkpoint: write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode(bytes);
}

std::string bundle_config_json(const ModelBundle& bundle) {
  const auto& m = bundle.model;
  const auto& f = bundle.frontend;
  json j;
  j["kind"] = "melstream-model";
  j["model"] = {{"f_mel", m.f_mel},
                {"hidden_d", m.hidden_d},
                {"n_blocks", m.n_blocks},
                {"mode", model::to_string(m.mode)},
                {"fullband_hidden_per_dir", m.fullband_hidden_per_dir},
                {"subband_hidden", m.subband_hidden},
                {"norm_mode", model::to_string(m.norm_mode)},
                {"context",
                 {{"past_frames", m.context.past_frames},
                  {"future_frames", m.context.future_frames},
                  {"lower_freqs", m.context.lower_freqs},
                  {"upper_freqs", m.context.upper_freqs}}}};
  j["frontend"] = {{"frame_len", f.stft.frame_len}, {"hop", f.stft.hop},
                   {"fft_size", f.stft.fft_size},   {"window", "hann-periodic"},
                   {"n_mels", f.n_mels},            {"f_min", f.f_min},
                   {"f_max", f.f_max},              {"floor", f.floor},
                   {"sample_rate", kSampleRate}};
  j["norm"] = {{"global_mean", bundle.norm.global_mean},
               {"smoothing_frames", bundle.norm.smoothing_frames}};
  return j.dump();
}

void parse_bundle_config(const std::string& text, ModelBundle& bundle) {
  try {
    const json j = json::parse(text);
    const auto& m = j.at("model");
    auto& mc = bundle.model;
    mc.f_mel = m.at("f_mel").get<std::size_t>();
    mc.hidden_d = m.at("hidden_d").get<std::size_t>();
    mc.n_blocks = m.at("n_blocks").get<std::size_t>();
    mc.mode = model::parse_mode(m.at("mode").get<std::string>());
    mc.fullband_hidden_per_dir = m.at("fullband_hidden_per_dir").get<std::size_t>();
    mc.subband_hidden = m.at("subband_hidden").get<std::size_t>();
    mc.norm_mode = model::parse_norm_mode(m.at("norm_mode").get<std::string>());
    const auto& c = m.at("context");
    mc.context.past_frames = c.at("past_frames").get<std::size_t>();
    mc.context.future_frames = c.at("future_frames").get<std::size_t>();
    mc.context.lower_freqs = c.at("lower_freqs").get<std::size_t>();
    mc.context.upper_freqs = c.at("upper_freqs").get<std::size_t>();
    const auto& f = j.at("frontend");
    auto& fc = bundle.frontend;
    fc.stft.frame_len = f.at("frame_len").get<std::size_t>();
    fc.stft.hop = f.at("hop").get<std::size_t>();
    fc.stft.fft_size = f.at("fft_size").get<std::size_t>();
    fc.n_mels = f.at("n_mels").get<std::size_t>();
    fc.f_min = f.at("f_min").get<double>();
    fc.f_max = f.at("f_max").get<double>();
    fc.floor = f.at("floor").get<double>();
    const auto& n = j.at("norm");
    bundle.norm.global_mean = n.at("global_mean").get<double>();
    bundle.norm.smoothing_frames = n.at("smoothing_frames").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed config block: ") + e.what());
  }
  bundle.model.validate();
  bundle.frontend.stft.validate();
  if (bundle.frontend.n_mels != bundle.model.f_mel) {
    throw ValidationError("checkpoint: front-end mel count differs from model f_mel");
  }
}

namespace {

Record to_record(const std::string& name, const NamedArray& a) {
  Record r;
  r.name = name;
  r.dims.assign(a.shape.begin(), a.shape.end());
  r.data.resize(a.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) r.data[i] = static_cast<float>(a.values[i]);
  return r;
}

void fill_from(NamedArray& a, const Record& r) {
  if (std::vector<std::size_t>(r.dims.begin(), r.dims.end()) != a.shape) {
    throw ValidationError("checkpoint: array '" + r.name + "' has unexpected shape");
  }
  for (std::size_t i = 0; i < r.data.size(); ++i) a.values[i] = r.data[i];
}

}  // namespace

void save(const std::filesystem::path& path, const ModelBundle& bundle,
          const OptimizerState* opt) {
  Container c;
  c.config = bundle_config_json(bundle);
  for (const auto& a : bundle.params.arrays()) c.records.push_back(to_record(a.name, a));
  if (opt != nullptr) {
    for (const auto& a : opt->m.arrays()) c.records.push_back(to_record(kAdamFirstPrefix + a.name, a));
    for (const auto& a : opt->v.arrays()) c.records.push_back(to_record(kAdamSecondPrefix + a.name, a));
    c.records.push_back({kAdamStepName, {1}, {static_cast<float>(opt->step)}});
  }
  write_container(path, c);
}

Loaded load(const std::filesystem::path& path) {
  const Container c = read_container(path);
  Loaded out;
  parse_bundle_config(c.config, out.bundle);
  out.bundle.params = model::parameter_layout(out.bundle.model);
  std::size_t seen = 0;
  bool has_opt = false;
  OptimizerState opt{out.bundle.params.zeros_like(), out.bundle.params.zeros_like(), 0};
  const std::string m_prefix = kAdamFirstPrefix, v_prefix = kAdamSecondPrefix;
  for (const Record& r : c.records) {
    if (r.name == kAdamStepName) {
      has_opt = true;
      opt.step = r.data.empty() ? 0 : static_cast<std::uint64_t>(r.data[0]);
    } else if (r.name.rfind(m_prefix, 0) == 0) {
      has_opt = true;
      fill_from(opt.m.at(r.name.substr(m_prefix.size())), r);
    } else if (r.name.rfind(v_prefix, 0) == 0) {
      has_opt = true;
      fill_from(opt.v.at(r.name.substr(v_prefix.size())), r);
    } else if (is_reserved(r.name)) {
      continue;
    } else {
      if (!out.bundle.params.contains(r.name)) {
        throw ValidationError("checkpoint: unexpected array '" + r.name + "' for this configuration");
      }
      fill_from(out.bundle.params.at(r.name), r);
      ++seen;
    }
  }
  if (seen != out.bundle.params.array_count()) {
    throw ValidationError("checkpoint: " + path.string() + " is missing parameter arrays");
  }
  if (has_opt) out.optimizer = std::move(opt);
  return out;
}

void save_logmel(const std::filesystem::path& path, const Matrix& logmel,
                 const std::string& kind) {
  Container c;
  c.config = json{{"kind", kind}, {"frames", logmel.rows}, {"n_mels", logmel.cols}}.dump();
  Record r;
  r.name = "logmel";
  r.dims = {logmel.rows, logmel.cols};
  r.data.resize(logmel.data.size());
  for (std::size_t i = 0; i < logmel.data.size(); ++i) r.data[i] = static_cast<float>(logmel.data[i]);
  c.records.push_back(std::move(r));
  write_container(path, c);
}

Matrix load_logmel(const std::filesystem::path& path) {
  const Container c = read_container(path);
  for (const Record& r : c.records) {
    if (r.name == "logmel" && r.dims.size() == 2) {
      Matrix m(r.dims[0], r.dims[1]);
      for (std::size_t i = 0; i < r.data.size(); ++i) m.data[i] = r.data[i];
      return m;
    }
  }
  throw ValidationError("logmel file has no 2-D 'logmel' array: " + path.string());
}

}  // namespace melstream::checkpoint
