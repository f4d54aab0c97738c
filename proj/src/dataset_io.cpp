#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tvae/data.hpp"

namespace tvae {
namespace fs = std::filesystem;

namespace {

constexpr char kVideoMagic[8] = {'T', 'V', 'A', 'E', 'V', 'I', 'D', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated video header");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) throw DataError("truncated video header");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace

void write_video(const fs::path& path, const RawVideo& v) {
  if (v.pixels.size() != static_cast<std::size_t>(v.frames) * v.frame_size())
    throw DataError("video '" + v.id + "' pixel buffer does not match its shape");
  if (v.has_mask() && v.mask.size() != v.pixels.size()) throw DataError("video '" + v.id + "' mask size mismatch");
  if (v.fps <= 0 || v.fps > 65535) throw DataError("video fps does not fit the container format");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.write(kVideoMagic, 8);
  put_u32(os, static_cast<std::uint32_t>(v.frames));
  put_u32(os, static_cast<std::uint32_t>(v.height));
  put_u32(os, static_cast<std::uint32_t>(v.width));
  put_u16(os, static_cast<std::uint16_t>(v.fps));
  os.put(v.has_mask() ? 1 : 0);
  os.write(reinterpret_cast<const char*>(v.pixels.data()), static_cast<std::streamsize>(v.pixels.size()));
  if (v.has_mask()) os.write(reinterpret_cast<const char*>(v.mask.data()), static_cast<std::streamsize>(v.mask.size()));
  if (!os) throw DataError("failed writing " + path.string());
}

RawVideo read_video(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kVideoMagic))
    throw DataError(path.string() + " is not a TVAEVID1 container");
  RawVideo v;
  v.id = path.stem().string();
  v.frames = static_cast<int>(get_u32(is));
  v.height = static_cast<int>(get_u32(is));
  v.width = static_cast<int>(get_u32(is));
  v.fps = get_u16(is);
  const int has_mask = is.get();
  if (has_mask != 0 && has_mask != 1) throw DataError(path.string() + ": invalid mask flag");
  const std::size_t n = static_cast<std::size_t>(v.frames) * v.frame_size();
  v.pixels.resize(n);
  if (!is.read(reinterpret_cast<char*>(v.pixels.data()), static_cast<std::streamsize>(n)))
    throw DataError(path.string() + ": truncated frame data");
  if (has_mask) {
    v.mask.resize(n);
    if (!is.read(reinterpret_cast<char*>(v.mask.data()), static_cast<std::streamsize>(n)))
      throw DataError(path.string() + ": truncated mask data");
  }
  if (is.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes");
  return v;
}

// ---------------------------------------------------------------------------
// Manifest

void to_json(nlohmann::json& j, const DatasetManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries)
    entries.push_back({{"file", e.file}, {"id", e.id}, {"label", e.label}, {"split", e.split}});
  j = {{"format", "tvae-dataset"},
       {"version", 1},
       {"seed", m.seed},
       {"preprocess", {{"height", m.preprocess.height}, {"width", m.preprocess.width}, {"equalize", m.preprocess.equalize}}},
       {"source", m.source},
       {"entries", entries}};
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
  if (j.value("format", std::string{}) != "tvae-dataset") throw DataError("manifest is not a tvae-dataset");
  m.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    m.preprocess.height = p.value("height", m.preprocess.height);
    m.preprocess.width = p.value("width", m.preprocess.width);
    m.preprocess.equalize = p.value("equalize", m.preprocess.equalize);
  }
  m.source = j.value("source", nlohmann::json{});
  m.entries.clear();
  for (const auto& e : j.at("entries")) {
    ManifestEntry me;
    me.file = e.at("file").get<std::string>();
    me.id = e.value("id", fs::path(me.file).stem().string());
    me.label = e.value("label", std::string(kNormalLabel));
    me.split = e.value("split", std::string("train"));
    m.entries.push_back(std::move(me));
  }
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.id).second) throw DataError("identifier '" + e.id + "' appears more than once");
    if (e.split == "train" && e.label != kNormalLabel)
      throw DataError("label leakage: anomalous entry '" + e.id + "' (" + e.label + ") is in the training split");
  }
}

std::vector<const ManifestEntry*> DatasetManifest::split(const std::string& name) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (name.empty() || e.split == name) out.push_back(&e);
  return out;
}

void write_manifest(const fs::path& dir, const DatasetManifest& manifest) {
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw DataError("cannot write manifest in " + dir.string());
  os << nlohmann::json(manifest).dump(2) << '\n';
}

DatasetManifest read_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw DataError("no manifest.json in " + dir.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest: " + std::string(e.what()));
  }
  return j.get<DatasetManifest>();
}

DatasetManifest write_dataset(const fs::path& dir, const std::vector<RawVideo>& videos,
                              const std::vector<std::string>& splits, const PreprocessParams& preprocess,
                              std::uint64_t seed, nlohmann::json source) {
  if (splits.size() != videos.size()) throw DataError("one split assignment per video required");
  DatasetManifest m;
  m.preprocess = preprocess;
  m.seed = seed;
  m.source = std::move(source);
  for (std::size_t i = 0; i < videos.size(); ++i)
    m.entries.push_back({videos[i].id + ".tvv", videos[i].id, videos[i].label, splits[i]});
  m.validate();
  fs::create_directories(dir);
  for (std::size_t i = 0; i < videos.size(); ++i) write_video(dir / m.entries[i].file, videos[i]);
  write_manifest(dir, m);
  return m;
}

std::vector<Video> load_split(const fs::path& dir, const DatasetManifest& manifest, const std::string& split) {
  std::vector<Video> out;
  for (const ManifestEntry* e : manifest.split(split)) {
    RawVideo raw = read_video(dir / e->file);
    raw.id = e->id;
    raw.label = e->label;
    out.push_back(preprocess(raw, manifest.preprocess));
  }
  return out;
}

DatasetManifest resplit(const DatasetManifest& manifest, int test_normals, std::uint64_t seed) {
  DatasetManifest out = manifest;
  std::vector<std::size_t> normals;
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    if (out.entries[i].label == kNormalLabel)
      normals.push_back(i);
    else
      out.entries[i].split = "test";
  }
  if (test_normals < 0 || static_cast<std::size_t>(test_normals) > normals.size())
    throw DataError("cannot hold out " + std::to_string(test_normals) + " normals from " +
                    std::to_string(normals.size()));
  Rng rng(seed);
  std::shuffle(normals.begin(), normals.end(), rng);
  for (std::size_t k = 0; k < normals.size(); ++k)
    out.entries[normals[k]].split = static_cast<int>(k) < test_normals ? "test" : "train";
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// PGM ingestion

namespace {

std::string next_token(std::istream& is) {
  std::string tok;
  while (is) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  is >> tok;
  return tok;
}

std::vector<std::uint8_t> read_pgm(const fs::path& path, int& height, int& width) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  const std::string magic = next_token(is);
  if (magic != "P5" && magic != "P2") throw DataError(path.string() + " is not a grayscale PGM");
  width = std::stoi(next_token(is));
  height = std::stoi(next_token(is));
  const int maxval = std::stoi(next_token(is));
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
    throw DataError(path.string() + ": only 8-bit PGM files are supported");
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height);
  if (magic == "P5") {
    is.get();  // single whitespace after maxval
    if (!is.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size())))
      throw DataError(path.string() + ": truncated pixel data");
  } else {
    for (auto& p : px) p = static_cast<std::uint8_t>(std::stoi(next_token(is)));
  }
  if (maxval != 255)
    for (auto& p : px) p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
  return px;
}

}  // namespace

RawVideo read_pgm_sequence(const fs::path& dir, int fps, const std::string& id, const std::string& label) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .pgm frames in " + dir.string());
  RawVideo v;
  v.id = id;
  v.label = label;
  v.fps = fps;
  for (const auto& f : files) {
    int h = 0, w = 0;
    auto px = read_pgm(f, h, w);
    if (v.frames == 0) {
      v.height = h;
      v.width = w;
    } else if (h != v.height || w != v.width) {
      throw DataError(f.string() + ": frame size differs from the first frame");
    }
    v.pixels.insert(v.pixels.end(), px.begin(), px.end());
    ++v.frames;
  }
  return v;
}

}  // namespace tvae
