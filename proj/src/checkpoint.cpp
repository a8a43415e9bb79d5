// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <utility>
#include <vector>

#include "json.hpp"
#include "robustnmt/error.hpp"

namespace robustnmt {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'R', 'N', 'M', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

std::uint32_t get_u32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + i]);
  return v;
}

std::uint64_t get_u64(const std::string& s, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + i]);
  return v;
}

double get_f64(const std::string& s, std::size_t at) {
  return std::bit_cast<double>(get_u64(s, at));
}

DataError bad(const std::string& path, const std::string& why) {
  return DataError("checkpoint " + path + ": " + why);
}

// Every tensor the container carries, in serialization order.
std::vector<NamedTensor> registry(const CheckpointData& data) {
  std::vector<NamedTensor> all = data.model.all();
  if (data.has_discriminator) {
    std::vector<NamedTensor> dis = data.dis.group();
    all.insert(all.end(), dis.begin(), dis.end());
  }
  return all;
}

json config_to_json(const ModelConfig& c) {
  return json{{"src_vocab", c.src_vocab},   {"tgt_vocab", c.tgt_vocab},
              {"embed_dim", c.embed_dim},   {"hidden_dim", c.hidden_dim},
              {"layers", c.layers},         {"dropout", c.dropout},
              {"max_decode_len", c.max_decode_len}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.src_vocab = j.at("src_vocab").get<std::size_t>();
  c.tgt_vocab = j.at("tgt_vocab").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.max_decode_len = j.at("max_decode_len").get<std::size_t>();
  return c;
}

}  // namespace

void save_checkpoint(const CheckpointData& data, const std::string& path) {
  json header;
  header["step"] = data.step;
  header["model_config"] = config_to_json(data.config);
  header["discriminator"] = {{"present", data.has_discriminator},
                             {"channels", data.dis.channels}};
  header["adam"] = {{"t", data.adam_t}};

  std::vector<NamedTensor> tensors = registry(data);
  json list = json::array();
  std::string payload;
  for (const NamedTensor& np : tensors) {
    list.push_back({{"name", np.name}, {"shape", np.tensor.shape()}});
    for (double v : np.tensor.values()) put_f64(payload, v);
  }
  for (const auto& [name, slot] : data.adam_slots) {
    list.push_back({{"name", "adam.m." + name}, {"shape", {slot.m.size()}}});
    for (double v : slot.m) put_f64(payload, v);
    list.push_back({{"name", "adam.v." + name}, {"shape", {slot.v.size()}}});
    for (double v : slot.v) put_f64(payload, v);
  }
  header["tensors"] = std::move(list);
  const std::string head = header.dump();

  std::string blob;
  blob.reserve(8 + 4 + 8 + head.size() + payload.size());
  blob.append(kMagic, sizeof(kMagic));
  put_u32(blob, kVersion);
  put_u64(blob, head.size());
  blob += head;
  blob += payload;

  const std::filesystem::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path(), ec);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw bad(path, "cannot open for writing");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    out.flush();
    if (!out) throw bad(path, "write failed");
  }
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw bad(path, "rename failed: " + ec.message());
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bad(path, "cannot open");
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (blob.size() < 20) throw bad(path, "truncated header");
  if (std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) throw bad(path, "bad magic");
  const std::uint32_t version = get_u32(blob, 8);
  if (version != kVersion)
    throw bad(path, "unsupported version " + std::to_string(version));
  const std::uint64_t head_len = get_u64(blob, 12);
  if (20 + head_len > blob.size()) throw bad(path, "truncated header");

  json header;
  try {
    header = json::parse(blob.substr(20, head_len));
  } catch (const json::exception& e) {
    throw bad(path, std::string("malformed header: ") + e.what());
  }

  CheckpointData data;
  try {
    data.step = header.at("step").get<std::uint64_t>();
    data.config = config_from_json(header.at("model_config"));
    data.has_discriminator = header.at("discriminator").at("present").get<bool>();
    data.adam_t = header.at("adam").at("t").get<std::uint64_t>();
    data.config.validate();
    RngStream dummy("checkpoint", 0);
    data.model = ModelParams::init(data.config, dummy);
    if (data.has_discriminator) {
      const auto channels = header.at("discriminator").at("channels").get<std::size_t>();
      data.dis = DiscriminatorParams::init(data.config.hidden_dim, channels, dummy);
    }
  } catch (const json::exception& e) {
    throw bad(path, std::string("malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw bad(path, std::string("bad config: ") + e.what());
  }

  std::map<std::string, Tensor> want;
  for (const NamedTensor& np : registry(data)) want.emplace(np.name, np.tensor);

  std::size_t cursor = 20 + head_len;
  std::map<std::string, std::size_t> seen;
  auto take = [&](std::size_t count) {
    if (cursor + 8 * count > blob.size()) throw bad(path, "truncated payload");
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = get_f64(blob, cursor + 8 * i);
    cursor += 8 * count;
    return v;
  };

  for (const json& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::vector<double> values = take(shape_numel(shape));
    if (name.rfind("adam.m.", 0) == 0 || name.rfind("adam.v.", 0) == 0) {
      const std::string param = name.substr(7);
      auto it = want.find(param);
      if (it == want.end()) throw bad(path, "optimizer slot for unknown tensor " + param);
      if (values.size() != it->second.numel())
        throw bad(path, "optimizer slot size mismatch for " + param);
      AdamSlot& slot = data.adam_slots[param];
      (name[5] == 'm' ? slot.m : slot.v) = std::move(values);
      continue;
    }
    auto it = want.find(name);
    if (it == want.end()) throw bad(path, "unknown tensor " + name);
    if (++seen[name] > 1) throw bad(path, "duplicate tensor " + name);
    if (it->second.shape() != shape)
      throw bad(path, "shape mismatch for " + name + ": stored " + shape_to_string(shape) +
                          ", config wants " + it->second.shape_str());
    it->second.values() = std::move(values);
  }
  if (seen.size() != want.size()) throw bad(path, "missing tensors");
  if (cursor != blob.size()) throw bad(path, "trailing bytes");
  return data;
}

}  // namespace robustnmt
