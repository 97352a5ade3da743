// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include "mfm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace mfm {

namespace {

constexpr const char* kMagic = "MFMCKPT 1";

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= std::uint32_t(static_cast<unsigned char>(p[i])) << (8 * i);
  float v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

template <typename Scalar>
std::string serialize_checkpoint(const ParameterStore<Scalar>& params) {
  std::string header = std::string(kMagic) + "\n";
  std::string payload;
  for (const auto& t : params) {
    header += t.spec.name + ' ' + std::to_string(t.value.rows()) + ' ' + std::to_string(t.value.cols()) + ' ' +
              (t.frozen ? "1" : "0") + ' ' + std::to_string(payload.size()) + '\n';
    for (Eigen::Index i = 0; i < t.value.size(); ++i) put_f32(payload, static_cast<float>(t.value.data()[i]));
  }
  header += "end\n";
  return header + payload;
}

template <typename Scalar>
ParameterStore<Scalar> deserialize_checkpoint(const std::string& bytes, const ModelConfig& config) {
  ParameterStore<Scalar> params(config);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw ParseError("checkpoint: truncated manifest", line_no + 1);
    auto line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    return line;
  };
  if (next_line() != kMagic) throw ParseError("checkpoint: bad header", 1);
  struct Entry {
    std::size_t index;
    long rows, cols;
    bool frozen;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  std::vector<bool> seen(params.size(), false);
  for (std::string line = next_line(); line != "end"; line = next_line()) {
    std::istringstream in(line);
    std::string name;
    Entry e{};
    int frozen = 0;
    if (!(in >> name >> e.rows >> e.cols >> frozen >> e.offset)) {
      throw ParseError("checkpoint: malformed manifest line", line_no);
    }
    if (!params.contains(name)) throw DimensionError("checkpoint: tensor " + name + " is not in the model layout");
    e.index = params.index_of(name);
    const auto& t = params[e.index];
    if (e.rows != t.value.rows() || e.cols != t.value.cols()) {
      throw DimensionError("checkpoint: " + name + " is " + std::to_string(e.rows) + "x" + std::to_string(e.cols) +
                           ", model expects " + std::to_string(t.value.rows()) + "x" +
                           std::to_string(t.value.cols()));
    }
    if (seen[e.index]) throw ParseError("checkpoint: duplicate tensor " + name, line_no);
    seen[e.index] = true;
    e.frozen = frozen != 0;
    entries.push_back(e);
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw DimensionError("checkpoint: missing tensor " + params[i].spec.name);
  }
  const std::size_t payload = pos;
  for (const auto& e : entries) {
    auto& t = params[e.index];
    const std::size_t need = static_cast<std::size_t>(t.value.size()) * 4;
    if (payload + e.offset + need > bytes.size()) {
      throw ParseError("checkpoint: payload of " + t.spec.name + " is truncated", line_no);
    }
    const char* p = bytes.data() + payload + e.offset;
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = static_cast<Scalar>(get_f32(p + 4 * i));
    t.frozen = e.frozen;
  }
  return params;
}

template <typename Scalar>
void save_checkpoint(const ParameterStore<Scalar>& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const auto bytes = serialize_checkpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

template <typename Scalar>
ParameterStore<Scalar> load_checkpoint(const std::filesystem::path& path, const ModelConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint<Scalar>(buf.str(), config);
}

#define MFM_INSTANTIATE(S)                                                                      \
  template std::string serialize_checkpoint<S>(const ParameterStore<S>&);                       \
  template ParameterStore<S> deserialize_checkpoint<S>(const std::string&, const ModelConfig&); \
  template void save_checkpoint<S>(const ParameterStore<S>&, const std::filesystem::path&);     \
  template ParameterStore<S> load_checkpoint<S>(const std::filesystem::path&, const ModelConfig&);

MFM_INSTANTIATE(float)
MFM_INSTANTIATE(double)

}  // namespace mfm
