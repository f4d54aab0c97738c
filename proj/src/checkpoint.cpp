#include <bit>
#include <cstring>
#include <fstream>
#include <span>

#include "tvae/model.hpp"

namespace tvae {
namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

std::uint32_t to_le(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(x);
  return x;
}

void write_floats(std::ostream& os, std::span<const float> v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  } else {
    for (float f : v) {
      const std::uint32_t u = to_le(std::bit_cast<std::uint32_t>(f));
      os.write(reinterpret_cast<const char*>(&u), 4);
    }
  }
}

void read_floats(std::istream& is, std::span<float> v) {
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float))))
    throw CheckpointError("checkpoint payload is truncated");
  if constexpr (std::endian::native == std::endian::big)
    for (float& f : v) f = std::bit_cast<float>(to_le(std::bit_cast<std::uint32_t>(f)));
}

}  // namespace

void save_checkpoint(const fs::path& path, const Model& model, const nlohmann::json& extra) {
  nlohmann::json tensors = nlohmann::json::array();
  const auto& p = model.params();
  std::uint64_t offset = 0;  // relative to the end of the header
  for (std::size_t i = 0; i < p.count(); ++i) {
    const Shape s = p[i].shape;
    const std::uint64_t bytes = p[i].size() * sizeof(float);
    tensors.push_back({{"name", p.name(i)}, {"shape", {s.n, s.c, s.h, s.w}}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  const nlohmann::json header = {{"format", "tvae-checkpoint"},
                                 {"format_version", kFormatVersion},
                                 {"config", model.config()},
                                 {"ranges", model.ranges},
                                 {"tensors", tensors},
                                 {"extra", extra}};
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot write " + path.string());
  std::uint64_t len = text.size();
  unsigned char lb[8];
  for (int b = 0; b < 8; ++b) lb[b] = static_cast<unsigned char>(len >> (8 * b));
  os.write(reinterpret_cast<const char*>(lb), 8);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < p.count(); ++i) write_floats(os, p[i].data);
  if (!os) throw CheckpointError("failed writing " + path.string());
}

Model load_checkpoint(const fs::path& path, nlohmann::json* extra) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path.string());
  unsigned char lb[8];
  if (!is.read(reinterpret_cast<char*>(lb), 8)) throw CheckpointError(path.string() + " is too short");
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b) len |= static_cast<std::uint64_t>(lb[b]) << (8 * b);
  if (len > (1u << 26)) throw CheckpointError(path.string() + " has an implausible header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint header: " + std::string(e.what()));
  }
  if (header.value("format", std::string{}) != "tvae-checkpoint") throw CheckpointError("not a tvae checkpoint");
  const int version = header.value("format_version", 0);
  if (version != kFormatVersion)
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version));

  const ModelConfig config = header.at("config").get<ModelConfig>();
  nn::ParameterSet<float> params;
  std::uint64_t offset = 0;
  for (const auto& t : header.at("tensors")) {
    const auto s = t.at("shape").get<std::vector<int>>();
    if (s.size() != 4) throw CheckpointError("tensor shape must have four entries");
    const std::string name = t.at("name").get<std::string>();
    const std::size_t i = params.add(name, Shape{s[0], s[1], s[2], s[3]});
    const std::uint64_t bytes = params[i].size() * sizeof(float);
    if (t.value("offset", offset) != offset || t.value("bytes", bytes) != bytes)
      throw CheckpointError("tensor directory entry for " + name + " disagrees with its shape");
    read_floats(is, params[i].data);
    offset += bytes;
  }
  if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint has trailing bytes");
  Model model(config, params);
  model.ranges = header.value("ranges", EmpiricalRanges{});
  if (extra) *extra = header.value("extra", nlohmann::json{});
  return model;
}

}  // namespace tvae
