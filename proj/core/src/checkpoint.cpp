#include "anr/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <unordered_map>

namespace anr {
namespace {

using json = nlohmann::json;

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

void put_le(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

double get_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, const ParamList& params) {
  json index;
  index["format"] = kCheckpointFormat;
  index["entries"] = json::array();
  std::ofstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw CheckpointError("cannot open " + with_ext(stem, ".bin").string());
  std::size_t offset = 0;
  for (const auto& p : params) {
    index["entries"].push_back({{"name", p.name}, {"shape", p.tensor->shape}, {"offset", offset},
                                {"count", p.tensor->size()}});
    for (double v : p.tensor->data) put_le(bin, v);
    offset += p.tensor->size();
  }
  if (!bin) throw CheckpointError("short write to " + with_ext(stem, ".bin").string());
  std::ofstream idx(with_ext(stem, ".json"));
  idx << index.dump(2) << '\n';
  if (!idx) throw CheckpointError("cannot write " + with_ext(stem, ".json").string());
}

void load_checkpoint(const std::filesystem::path& stem, const ParamList& params) {
  std::ifstream idx(with_ext(stem, ".json"));
  if (!idx) throw CheckpointError("cannot open " + with_ext(stem, ".json").string());
  json index;
  try {
    index = json::parse(idx);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint index: ") + e.what());
  }
  if (index.value("format", "") != kCheckpointFormat) throw CheckpointError("unsupported checkpoint format");

  std::ifstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw CheckpointError("cannot open " + with_ext(stem, ".bin").string());
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  std::unordered_map<std::string, json> by_name;
  for (const auto& e : index.at("entries")) by_name.emplace(e.at("name").get<std::string>(), e);

  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw CheckpointError("checkpoint has no entry named " + p.name);
    const auto shape = it->second.at("shape").get<Shape>();
    if (shape != p.tensor->shape) {
      throw CheckpointError(p.name + ": checkpoint shape " + to_string(shape) + " != model shape " +
                            to_string(p.tensor->shape));
    }
    const auto offset = it->second.at("offset").get<std::size_t>();
    const auto count = it->second.at("count").get<std::size_t>();
    if (count != p.tensor->size() || (offset + count) * 8 > raw.size()) {
      throw CheckpointError(p.name + ": payload truncated or inconsistent");
    }
    for (std::size_t i = 0; i < count; ++i) p.tensor->data[i] = get_le(raw.data() + (offset + i) * 8);
  }
}

}  // namespace anr
