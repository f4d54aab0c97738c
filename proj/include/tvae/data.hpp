#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tvae/clip.hpp"
#include "tvae/config.hpp"
#include "tvae/rng.hpp"

namespace tvae {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ClipError : public DataError {
 public:
  using DataError::DataError;
};

inline constexpr const char* kNormalLabel = "normal";

/// 8-bit grayscale video as stored on disk. Pixels are frame-major.
struct RawVideo {
  std::string id;
  std::string label = kNormalLabel;
  int fps = 25;
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> mask;  // empty or same size as pixels; nonzero marks anomalous pixels

  bool has_mask() const { return !mask.empty(); }
  bool is_normal() const { return label == kNormalLabel; }
  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width; }
};

/// Preprocessed video with intensities in [0, 1].
struct Video {
  std::string id;
  std::string label = kNormalLabel;
  double fps = 25;
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;
  std::vector<std::uint8_t> mask;

  bool has_mask() const { return !mask.empty(); }
  bool is_normal() const { return label == kNormalLabel; }
  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width; }
};

struct PreprocessParams {
  int height = 128;
  int width = 128;
  bool equalize = true;
};

/// Bilinear resize to the target size, per-frame 256-bin histogram
/// equalization, then scaling to [0, 1]. Masks are resized nearest-neighbour.
Video preprocess(const RawVideo& video, const PreprocessParams& params);

/// Histogram equalization of one 8-bit frame via its cumulative histogram.
std::vector<std::uint8_t> equalize_histogram(std::span<const std::uint8_t> frame);

/// Bilinear resize of one 8-bit frame (pixel-centre aligned, edge-clamped).
std::vector<std::uint8_t> resize_bilinear(std::span<const std::uint8_t> frame, int height, int width, int out_height,
                                          int out_width);

/// Frame stride used to subsample `source_fps` down to `target_fps`.
int subsample_stride(double source_fps, double target_fps);

/// Largest valid start index, or -1 when the video is too short.
int max_clip_start(const Video& video, int frames, double target_fps);

/// Frames start, start + s, ..., start + (frames - 1) s with s = round(fps / target_fps).
EchoClip extract_clip(const Video& video, int start, int frames = 25, double target_fps = 12.0);

/// Matching per-frame mask selection (all zeros when the video has no mask).
std::vector<std::uint8_t> extract_clip_mask(const Video& video, int start, int frames = 25, double target_fps = 12.0);

/// The parameters drawn for one augmentation call.
struct AugmentDraw {
  double rotation_rad = 0, translate_x = 0, translate_y = 0, scale = 1;
  double brightness = 0, gamma = 1, blur_sigma = 0, salt_pepper_rate = 0;
};

AugmentDraw draw_augmentation(const AugmentConfig& config, Rng& rng);
EchoClip apply_augmentation(const EchoClip& clip, const AugmentDraw& draw, Rng& rng);
EchoClip augment(const EchoClip& clip, const AugmentConfig& config, Rng& rng);

// ---------------------------------------------------------------------------
// Synthetic benchmark

enum class AnomalyType { none, wall_gap, dilation, displacement };

std::string to_string(AnomalyType t);
AnomalyType anomaly_type_from_string(const std::string& name);

struct SyntheticSpec {
  int count = 10;
  std::uint64_t seed = 0;
  int fps = 24;
  int frames = 60;
  int height = 64;
  int width = 64;
  double heart_rate_min = 1.0;  // Hz
  double heart_rate_max = 2.0;
  double phase_min = 0.0;
  double phase_max = 6.283185307179586;
  double drift_min = -0.03;  // frame widths per second
  double drift_max = 0.03;
  int chambers_min = 2;
  int chambers_max = 4;
  double chamber_radius_min = 0.10;  // fraction of the frame width
  double chamber_radius_max = 0.12;
  double contraction_min = 0.12;  // relative radius oscillation amplitude
  double contraction_max = 0.22;
  double wall_motion = 0.03;  // relative oscillation of the outer heart boundary
  double noise_level = 0.03;
  AnomalyType anomaly = AnomalyType::none;
  double severity = 1.0;
  double anomaly_fraction = 1.0;  // share of videos that receive the anomaly
  std::string id_prefix = "synth";
  /// Offset added to the video index when deriving per-video seeds; lets
  /// disjoint datasets share a seed without sharing videos.
  int index_offset = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

/// Scene parameters drawn for one synthetic video (exposed for tests).
struct SyntheticScene {
  double heart_rate = 1.5;
  double phase = 0;
  double drift_x = 0, drift_y = 0;
  int chambers = 4;
  bool anomalous = false;
};

SyntheticScene synthetic_scene(const SyntheticSpec& spec, int index);
RawVideo generate_synthetic_video(const SyntheticSpec& spec, int index);
std::vector<RawVideo> generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Dataset directory

struct ManifestEntry {
  std::string file;
  std::string id;
  std::string label = kNormalLabel;
  std::string split = "train";
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  PreprocessParams preprocess;
  std::uint64_t seed = 0;
  nlohmann::json source;  // generator spec or converter settings

  /// Throws DataError on duplicate identifiers or anomalous entries in a training split.
  void validate() const;
  std::vector<const ManifestEntry*> split(const std::string& name) const;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

/// Binary container: "TVAEVID1", u32 N, H, W, u16 fps, u8 has_mask, frames, [mask].
void write_video(const std::filesystem::path& path, const RawVideo& video);
RawVideo read_video(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& dir);

/// Writes every video as <id>.tvv plus manifest.json.
DatasetManifest write_dataset(const std::filesystem::path& dir, const std::vector<RawVideo>& videos,
                              const std::vector<std::string>& splits, const PreprocessParams& preprocess,
                              std::uint64_t seed, nlohmann::json source = {});

/// Loads and preprocesses the entries of one split ("" loads all).
std::vector<Video> load_split(const std::filesystem::path& dir, const DatasetManifest& manifest,
                              const std::string& split);

/// Reassigns splits: `test_normals` normal entries plus every anomalous entry go to "test".
DatasetManifest resplit(const DatasetManifest& manifest, int test_normals, std::uint64_t seed);

/// Reads a directory of 8-bit PGM frames (sorted by filename) as one video.
RawVideo read_pgm_sequence(const std::filesystem::path& dir, int fps, const std::string& id,
                           const std::string& label);

}  // namespace tvae
