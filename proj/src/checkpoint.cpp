// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hierdoc::heads {

namespace {

constexpr char kMagic[8] = {'H', 'D', 'C', 'K', 'P', 'T', '\0', '\1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& s, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{static_cast<unsigned char>(s[pos + i])} << (8 * i);
  return v;
}

}  // namespace

template <typename T>
std::string serialize_checkpoint(HeadModel<T>& model) {
  nlohmann::ordered_json header;
  header["model"] = model.name();
  header["input_dim"] = model.input_dim();
  header["num_classes"] = model.num_classes();
  header["layers"] = nlohmann::ordered_json::array();
  for (const auto& s : model.specs()) header["layers"].push_back(s.to_json());
  header["tensors"] = nlohmann::ordered_json::array();
  const auto tensors = model.state_tensors();
  for (const auto& [name, t] : tensors) header["tensors"].push_back({{"name", name}, {"shape", t->shape()}});
  const std::string json = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u64(out, json.size());
  out += json;
  for (const auto& [name, t] : tensors) {
    for (T v : t->values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

template <typename T>
HeadModel<T> deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const std::uint64_t json_len = get_le(bytes, 8, 8);
  if (16 + json_len > bytes.size()) throw FormatError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, json_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  std::vector<LayerSpec> specs;
  for (const auto& j : header.at("layers")) specs.push_back(LayerSpec::from_json(j));
  HeadModel<T> model(header.at("model").get<std::string>(), header.at("input_dim").get<std::size_t>(),
                     header.at("num_classes").get<std::size_t>(), std::move(specs), 0);

  const auto tensors = model.state_tensors();
  const auto& listed = header.at("tensors");
  if (listed.size() != tensors.size()) throw FormatError("checkpoint: tensor count does not match architecture");
  std::size_t pos = 16 + json_len;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& [name, t] = tensors[i];
    if (listed[i].at("name").get<std::string>() != name ||
        listed[i].at("shape").get<nn::Shape>() != t->shape()) {
      throw FormatError("checkpoint: tensor " + name + " does not match architecture");
    }
    if (pos + 4 * t->size() > bytes.size()) throw FormatError("checkpoint: truncated payload");
    for (auto& v : t->values()) {
      v = static_cast<T>(std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, pos, 4))));
      pos += 4;
    }
  }
  if (pos != bytes.size()) throw FormatError("checkpoint: trailing bytes");
  return model;
}

template <typename T>
void save_checkpoint(HeadModel<T>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path);
  const std::string bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path);
}

template <typename T>
HeadModel<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint<T>(buf.str());
}

template <typename T>
void copy_state(HeadModel<T>& from, HeadModel<T>& to) {
  auto src = from.state_tensors();
  auto dst = to.state_tensors();
  if (src.size() != dst.size()) throw Error("copy_state: architecture mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].second->shape() != dst[i].second->shape()) throw Error("copy_state: shape mismatch");
    *dst[i].second = *src[i].second;
  }
}

#define HIERDOC_INSTANTIATE(T)                                             \
  template std::string serialize_checkpoint(HeadModel<T>&);                \
  template HeadModel<T> deserialize_checkpoint<T>(const std::string&);     \
  template void save_checkpoint(HeadModel<T>&, const std::string&);        \
  template HeadModel<T> load_checkpoint<T>(const std::string&);            \
  template void copy_state(HeadModel<T>&, HeadModel<T>&);

HIERDOC_INSTANTIATE(float)
HIERDOC_INSTANTIATE(double)
#undef HIERDOC_INSTANTIATE

}  // namespace hierdoc::heads
