#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "tvae/data.hpp"

using namespace tvae;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("tvae_data_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Video constant_video(int frames, double fps, int h = 4, int w = 4) {
  Video v;
  v.id = "v";
  v.fps = fps;
  v.frames = frames;
  v.height = h;
  v.width = w;
  v.pixels.resize(static_cast<std::size_t>(frames) * h * w);
  for (int f = 0; f < frames; ++f)
    std::fill(v.pixels.begin() + f * h * w, v.pixels.begin() + (f + 1) * h * w, static_cast<float>(f) / frames);
  return v;
}

}  // namespace

TEST(Equalize, MatchesCumulativeHistogramFormula) {
  Rng rng(3);
  std::vector<std::uint8_t> frame(200);
  for (auto& p : frame) p = static_cast<std::uint8_t>(std::uniform_int_distribution<int>(40, 120)(rng));
  const auto out = equalize_histogram(frame);
  // Oracle: count values <= v directly for every pixel.
  std::size_t cdf_min = frame.size();
  const std::uint8_t lo = *std::min_element(frame.begin(), frame.end());
  cdf_min = std::count(frame.begin(), frame.end(), lo);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const std::size_t le = std::count_if(frame.begin(), frame.end(), [&](std::uint8_t x) { return x <= frame[i]; });
    const double expect = std::round(255.0 * (le - cdf_min) / (frame.size() - cdf_min));
    EXPECT_EQ(out[i], expect);
  }
  EXPECT_EQ(*std::min_element(out.begin(), out.end()), 0);
  EXPECT_EQ(*std::max_element(out.begin(), out.end()), 255);
}

TEST(Equalize, ConstantFrameUnchanged) {
  std::vector<std::uint8_t> frame(16, 77);
  EXPECT_EQ(equalize_histogram(frame), frame);
}

TEST(Resize, IdentityAndConstant) {
  std::vector<std::uint8_t> f(12);
  for (int i = 0; i < 12; ++i) f[i] = static_cast<std::uint8_t>(i * 20);
  EXPECT_EQ(resize_bilinear(f, 3, 4, 3, 4), f);
  std::vector<std::uint8_t> c(64, 9);
  auto r = resize_bilinear(c, 8, 8, 3, 5);
  EXPECT_TRUE(std::all_of(r.begin(), r.end(), [](auto v) { return v == 9; }));
}

TEST(Preprocess, ScalesToUnitInterval) {
  RawVideo raw;
  raw.id = "a";
  raw.frames = 2;
  raw.height = raw.width = 8;
  raw.pixels.resize(128);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) raw.pixels[i] = static_cast<std::uint8_t>(i * 2);
  const Video v = preprocess(raw, {4, 4, true});
  ASSERT_EQ(v.pixels.size(), 32u);
  for (float p : v.pixels) EXPECT_TRUE(p >= 0 && p <= 1);
  EXPECT_FLOAT_EQ(*std::max_element(v.pixels.begin(), v.pixels.end()), 1.0f);
}

TEST(ClipExtraction, StrideExample) {
  // 25 fps source, 12 fps target: stride 2, frames 0, 2, ..., 48.
  const Video v = constant_video(122, 25.0);
  EXPECT_EQ(subsample_stride(25, 12), 2);
  const EchoClip c = extract_clip(v, 0);
  ASSERT_EQ(c.frames_count, 25);
  for (int j = 0; j < 25; ++j) EXPECT_FLOAT_EQ(c.frame(j)[0], static_cast<float>(2 * j) / 122);
  for (int j = 0; j < 25; ++j) EXPECT_DOUBLE_EQ(c.timestamps[j], j / 12.0);
  EXPECT_EQ(max_clip_start(v, 25, 12), 73);
  EXPECT_NO_THROW(extract_clip(v, 73));
  EXPECT_THROW(extract_clip(v, 74), ClipError);
  EXPECT_THROW(extract_clip(constant_video(40, 25.0), 0), ClipError);
}

TEST(ClipExtraction, FastSourceUsesLargerStride) {
  EXPECT_EQ(subsample_stride(50, 12), 4);
  EXPECT_EQ(subsample_stride(12, 12), 1);
  EXPECT_EQ(subsample_stride(8, 12), 1);
}

TEST(Augmentation, DisabledIsIdentityAndSeeded) {
  Video v = constant_video(60, 24.0, 16, 16);
  Rng rng(1);
  for (auto& p : v.pixels) p = static_cast<float>(uniform(rng, 0.2, 0.8));
  const EchoClip clip = extract_clip(v, 0);
  Rng r0(4);
  EXPECT_EQ(augment(clip, AugmentConfig::disabled(), r0).frames, clip.frames);

  AugmentConfig on;
  Rng a(9), b(9);
  const EchoClip x = augment(clip, on, a), y = augment(clip, on, b);
  EXPECT_EQ(x.frames, y.frames);
  for (float p : x.frames) EXPECT_TRUE(p >= 0 && p <= 1);
}

TEST(Augmentation, TogglesDoNotShiftOtherDraws) {
  AugmentConfig all;
  AugmentConfig no_affine = all;
  no_affine.affine = false;
  Rng a(5), b(5);
  const AugmentDraw da = draw_augmentation(all, a), db = draw_augmentation(no_affine, b);
  EXPECT_EQ(db.scale, 1.0);
  EXPECT_EQ(da.gamma, db.gamma);
  EXPECT_EQ(da.brightness, db.brightness);
  EXPECT_EQ(da.blur_sigma, db.blur_sigma);
}

TEST(Synthetic, Deterministic) {
  SyntheticSpec s;
  s.count = 2;
  s.seed = 17;
  const auto a = generate_synthetic(s), b = generate_synthetic(s);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].pixels, b[0].pixels);
  EXPECT_NE(a[0].pixels, a[1].pixels);
}

TEST(Synthetic, ZeroSeverityMatchesNormal) {
  SyntheticSpec normal;
  normal.count = 3;
  normal.seed = 8;
  for (AnomalyType t : {AnomalyType::wall_gap, AnomalyType::dilation, AnomalyType::displacement}) {
    SyntheticSpec s = normal;
    s.anomaly = t;
    s.severity = 0.0;
    for (int i = 0; i < 3; ++i) {
      const RawVideo x = generate_synthetic_video(normal, i), y = generate_synthetic_video(s, i);
      EXPECT_EQ(x.pixels, y.pixels) << to_string(t);
      EXPECT_TRUE(std::all_of(y.mask.begin(), y.mask.end(), [](auto m) { return m == 0; }));
    }
  }
}

TEST(Synthetic, AnomalyMaskNonEmptyAndLabelled) {
  SyntheticSpec s;
  s.count = 4;
  s.seed = 2;
  s.anomaly = AnomalyType::wall_gap;
  s.severity = 0.6;
  s.anomaly_fraction = 0.5;
  int anomalous = 0;
  for (int i = 0; i < 4; ++i) {
    const RawVideo v = generate_synthetic_video(s, i);
    const bool any = std::any_of(v.mask.begin(), v.mask.end(), [](auto m) { return m != 0; });
    EXPECT_EQ(any, !v.is_normal());
    anomalous += !v.is_normal();
    if (!v.is_normal()) EXPECT_EQ(v.label, "wall-gap");
  }
  EXPECT_EQ(anomalous, 2);
}

TEST(Synthetic, PeriodicAtHeartRate) {
  // Without drift or noise a frame repeats one heart period later. Checked
  // by the autocorrelation of the mean-intensity series peaking at the
  // lag closest to fps / heart_rate.
  SyntheticSpec s;
  s.count = 1;
  s.seed = 4;
  s.frames = 120;
  s.drift_min = s.drift_max = 0;
  s.noise_level = 0;
  const SyntheticScene sc = synthetic_scene(s, 0);
  const RawVideo v = generate_synthetic_video(s, 0);
  std::vector<double> m(v.frames);
  for (int f = 0; f < v.frames; ++f) {
    double acc = 0;
    for (std::size_t i = 0; i < v.frame_size(); ++i) acc += v.pixels[f * v.frame_size() + i];
    m[f] = acc / v.frame_size();
  }
  double mean = 0;
  for (double x : m) mean += x / m.size();
  auto ac = [&](int lag) {
    double num = 0, den = 0;
    for (int i = 0; i + lag < v.frames; ++i) num += (m[i] - mean) * (m[i + lag] - mean);
    for (double x : m) den += (x - mean) * (x - mean);
    return num / den * v.frames / (v.frames - lag);
  };
  const double period = s.fps / sc.heart_rate;
  int best = 0;
  double best_ac = -2;
  for (int lag = static_cast<int>(0.6 * period); lag <= static_cast<int>(1.5 * period) + 1; ++lag)
    if (ac(lag) > best_ac) best_ac = ac(lag), best = lag;
  EXPECT_LE(std::abs(best - period), 1.0);
  EXPECT_GT(best_ac, 0.8);
}

TEST(DatasetIo, VideoRoundTripBitExact) {
  const fs::path dir = temp_dir("video");
  SyntheticSpec s;
  s.count = 1;
  s.anomaly = AnomalyType::dilation;
  const RawVideo v = generate_synthetic_video(s, 0);
  write_video(dir / "a.tvv", v);
  const RawVideo r = read_video(dir / "a.tvv");
  EXPECT_EQ(r.pixels, v.pixels);
  EXPECT_EQ(r.mask, v.mask);
  EXPECT_EQ(r.fps, v.fps);
  EXPECT_EQ(r.frames, v.frames);
  write_video(dir / "b.tvv", r);
  std::ifstream fa(dir / "a.tvv", std::ios::binary), fb(dir / "b.tvv", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(fa), {}), std::string(std::istreambuf_iterator<char>(fb), {}));
}

TEST(DatasetIo, CorruptFilesRejected) {
  const fs::path dir = temp_dir("corrupt");
  std::ofstream(dir / "x.tvv", std::ios::binary) << "NOTAVIDEO";
  EXPECT_THROW(read_video(dir / "x.tvv"), DataError);
  SyntheticSpec s;
  s.count = 1;
  s.frames = 3;
  write_video(dir / "y.tvv", generate_synthetic_video(s, 0));
  fs::resize_file(dir / "y.tvv", fs::file_size(dir / "y.tvv") - 5);
  EXPECT_THROW(read_video(dir / "y.tvv"), DataError);
}

TEST(DatasetIo, ManifestRoundTripAndLeakage) {
  const fs::path dir = temp_dir("manifest");
  SyntheticSpec s;
  s.count = 3;
  s.frames = 4;
  auto videos = generate_synthetic(s);
  s.anomaly = AnomalyType::wall_gap;
  s.id_prefix = "gap";
  videos.push_back(generate_synthetic_video(s, 0));
  EXPECT_THROW(write_dataset(dir, videos, {"train", "train", "test", "train"}, {16, 16, false}, 1), DataError);
  const auto m = write_dataset(dir, videos, {"train", "train", "test", "test"}, {16, 16, false}, 1, nlohmann::json(s));
  const auto r = read_manifest(dir);
  EXPECT_EQ(nlohmann::json(r), nlohmann::json(m));
  const auto train = load_split(dir, r, "train");
  ASSERT_EQ(train.size(), 2u);
  EXPECT_EQ(train[0].height, 16);
  const auto test = load_split(dir, r, "test");
  ASSERT_EQ(test.size(), 2u);
  EXPECT_EQ(test[1].label, "wall-gap");
  EXPECT_TRUE(test[1].has_mask());

  const auto rs = resplit(r, 1, 3);
  int test_normals = 0;
  for (const auto& e : rs.entries) {
    if (e.label != kNormalLabel) EXPECT_EQ(e.split, "test");
    test_normals += e.label == kNormalLabel && e.split == "test";
  }
  EXPECT_EQ(test_normals, 1);

  auto dup = r;
  dup.entries.push_back(dup.entries.front());
  EXPECT_THROW(dup.validate(), DataError);
}

TEST(DatasetIo, PgmSequence) {
  const fs::path dir = temp_dir("pgm");
  for (int f = 0; f < 3; ++f) {
    std::ofstream os(dir / ("f" + std::to_string(f) + ".pgm"), std::ios::binary);
    os << "P5\n# comment\n3 2\n255\n";
    for (int i = 0; i < 6; ++i) os.put(static_cast<char>(f * 10 + i));
  }
  {
    std::ofstream os(dir / "f3.pgm");
    os << "P2\n3 2\n15\n0 1 2 3 4 15\n";
  }
  const RawVideo v = read_pgm_sequence(dir, 30, "seq", kNormalLabel);
  EXPECT_EQ(v.frames, 4);
  EXPECT_EQ(v.height, 2);
  EXPECT_EQ(v.width, 3);
  EXPECT_EQ(v.pixels[6 + 4], 14);
  EXPECT_EQ(v.pixels[18 + 5], 255);
  EXPECT_EQ(v.pixels[18 + 1], 17);
}
