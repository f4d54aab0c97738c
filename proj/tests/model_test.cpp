#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "tvae/model.hpp"

namespace tvae {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// E_q[log q(z) - log p(z)] by sampling z ~ q.
TEST(Kl, MatchesMonteCarlo) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mu_d(-2, 2), sig_d(0.2, 2.0);
  std::uniform_int_distribution<int> dim_d(1, 8);
  std::normal_distribution<double> normal;
  const int samples = 200000;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = dim_d(rng);
    std::vector<double> mu(d), sigma(d);
    for (int k = 0; k < d; ++k) {
      mu[k] = mu_d(rng);
      sigma[k] = sig_d(rng);
    }
    double sum = 0, sum2 = 0;
    for (int n = 0; n < samples; ++n) {
      double lq = 0, lp = 0;
      for (int k = 0; k < d; ++k) {
        const double e = normal(rng), z = mu[k] + sigma[k] * e;
        lq += -0.5 * e * e - std::log(sigma[k]);
        lp += -0.5 * z * z;
      }
      sum += lq - lp;
      sum2 += (lq - lp) * (lq - lp);
    }
    const double mean = sum / samples;
    const double se = std::sqrt((sum2 / samples - mean * mean) / samples);
    EXPECT_NEAR(gaussian_kl(mu, sigma), mean, 3 * se) << "trial " << trial;
  }
  const std::vector<double> zero(3, 0.0), one(3, 1.0);
  EXPECT_EQ(gaussian_kl(zero, one), 0.0);
}

std::vector<Video> tiny_videos(int count, std::uint64_t seed, const ModelConfig& c) {
  SyntheticSpec s;
  s.count = count;
  s.seed = seed;
  s.height = 32;
  s.width = 32;
  s.frames = 30;
  std::vector<Video> out;
  for (const auto& r : generate_synthetic(s)) out.push_back(preprocess(r, {c.height, c.width, false}));
  return out;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir("tvae_model_test_ckpt");
  ModelConfig c = ModelConfig::miniature(Variant::tvae_s);
  c.seed = 9;
  Model m(c);
  m.ranges = fit_ranges(m, leading_clips(tiny_videos(3, 1, c), c));
  save_checkpoint(dir.path / "a.ckpt", m, {{"note", "x"}});
  nlohmann::json extra;
  const Model back = load_checkpoint(dir.path / "a.ckpt", &extra);
  EXPECT_EQ(extra["note"], "x");
  ASSERT_EQ(back.params().count(), m.params().count());
  for (std::size_t i = 0; i < m.params().count(); ++i) {
    EXPECT_EQ(back.params().name(i), m.params().name(i));
    EXPECT_EQ(back.params()[i].data, m.params()[i].data);
  }
  EXPECT_EQ(nlohmann::json(back.config()), nlohmann::json(m.config()));
  save_checkpoint(dir.path / "b.ckpt", back, {{"note", "x"}});
  EXPECT_EQ(slurp(dir.path / "a.ckpt"), slurp(dir.path / "b.ckpt"));
}

TEST(Checkpoint, RejectsDamage) {
  TempDir dir("tvae_model_test_damage");
  Model m(ModelConfig::miniature(Variant::tvae_r));
  save_checkpoint(dir.path / "a.ckpt", m);
  const std::string bytes = slurp(dir.path / "a.ckpt");
  auto write = [&](const std::string& name, const std::string& data) {
    std::ofstream(dir.path / name, std::ios::binary) << data;
    return dir.path / name;
  };
  EXPECT_THROW(load_checkpoint(write("short.ckpt", bytes.substr(0, bytes.size() - 4))), CheckpointError);
  EXPECT_THROW(load_checkpoint(write("long.ckpt", bytes + "x")), CheckpointError);
  EXPECT_THROW(load_checkpoint(write("empty.ckpt", "")), CheckpointError);
  std::string wrong_version = bytes;
  const auto pos = wrong_version.find("\"format_version\":1");
  ASSERT_NE(pos, std::string::npos);
  wrong_version[pos + 17] = '7';
  EXPECT_THROW(load_checkpoint(write("version.ckpt", wrong_version)), CheckpointError);
  std::string wrong_offset = bytes;
  const auto off = wrong_offset.find("\"offset\":0");
  ASSERT_NE(off, std::string::npos);
  wrong_offset[off + 9] = '4';
  EXPECT_THROW(load_checkpoint(write("offset.ckpt", wrong_offset)), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir.path / "missing.ckpt"), CheckpointError);
}

TEST(Model, ParameterShapesAreChecked) {
  const ModelConfig c = ModelConfig::miniature(Variant::tvae_s);
  Model m(c);
  nn::ParameterSet<float> p = m.params();
  EXPECT_NO_THROW(Model(c, p));
  ModelConfig other = c;
  other.latent_dim = 5;
  EXPECT_THROW(Model(other, p), CheckpointError);
}

TEST(Model, EncodeReconstructGenerate) {
  ModelConfig c = ModelConfig::miniature(Variant::tvae_s);
  Model m(c);
  const auto clips = leading_clips(tiny_videos(3, 2, c), c);
  const auto lat = m.encode(clips);
  ASSERT_EQ(lat.size(), 3u);
  for (const auto& l : lat) {
    EXPECT_EQ(l.mu.size(), static_cast<std::size_t>(c.latent_dim));
    EXPECT_GT(l.f, 0);
    EXPECT_GE(l.omega, 0);
    EXPECT_LT(l.omega, 2 * std::numbers::pi);
    for (double s : l.sigma) EXPECT_GT(s, 0);
  }
  const auto rec = m.reconstruct(clips);
  ASSERT_EQ(rec.size(), 3u);
  EXPECT_TRUE(rec[0].same_shape(clips[0]));
  for (float v : rec[0].frames) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  // Decoding the posterior-mean trajectory at the clip times is the reconstruction.
  const EchoClip dec = m.decode(lat[1].trajectory(), clips[1].timestamps, c.fps);
  for (std::size_t i = 0; i < dec.frames.size(); ++i) EXPECT_NEAR(dec.frames[i], rec[1].frames[i], 1e-5);

  m.ranges = fit_ranges(m, clips);
  const auto g1 = m.generate(2, 5), g2 = m.generate(2, 5), g3 = m.generate(2, 6);
  ASSERT_EQ(g1.size(), 2u);
  EXPECT_EQ(g1[0].frames, g2[0].frames);
  EXPECT_NE(g1[0].frames, g3[0].frames);

  EchoClip wrong(c.frames, c.height + 1, c.width, c.fps);
  EXPECT_THROW(m.encode(wrong), InputError);
}

TEST(Model, FramewiseVae) {
  const ModelConfig c = ModelConfig::miniature(Variant::vae);
  Model m(c);
  const auto clips = leading_clips(tiny_videos(2, 3, c), c);
  const auto lat = m.encode(clips);
  EXPECT_EQ(lat[0].mu.size(), static_cast<std::size_t>(c.frames * c.latent_dim));
  EXPECT_THROW(m.decode({1, 0, 0, std::vector<double>(c.latent_dim)}, clips[0].timestamps, c.fps), ConfigError);
  EXPECT_EQ(m.generate(2, 1).size(), 2u);
}

TEST(Training, SameSeedIsByteIdentical) {
  TempDir dir("tvae_model_test_train");
  ModelConfig c = ModelConfig::miniature(Variant::tvae_s);
  c.seed = 4;
  c.steps = 6;
  c.augment = AugmentConfig{};  // exercise the seeded augmentation path
  const auto videos = tiny_videos(4, 3, c);
  std::vector<double> losses[2];
  for (int run = 0; run < 2; ++run) {
    Model m(c);
    const TrainReport rep = train(m, videos);
    for (const auto& s : rep.history) losses[run].push_back(s.loss);
    save_checkpoint(dir.path / ("run" + std::to_string(run) + ".ckpt"), m);
  }
  EXPECT_EQ(losses[0], losses[1]);
  EXPECT_EQ(slurp(dir.path / "run0.ckpt"), slurp(dir.path / "run1.ckpt"));

  c.seed = 5;
  Model other(c);
  train(other, videos);
  save_checkpoint(dir.path / "other.ckpt", other);
  EXPECT_NE(slurp(dir.path / "run0.ckpt"), slurp(dir.path / "other.ckpt"));
}

TEST(Training, RefusesLeakageAndShortVideos) {
  ModelConfig c = ModelConfig::miniature(Variant::tvae_r);
  c.steps = 1;
  auto videos = tiny_videos(2, 1, c);
  videos[1].label = "wall-gap";
  Model m(c);
  EXPECT_THROW(train(m, videos), DataError);
  videos[1].label = kNormalLabel;
  videos[1].frames = 2;
  videos[1].pixels.resize(2 * videos[1].frame_size());
  EXPECT_THROW(train(m, videos), ClipError);
}

TEST(Training, LossDecreasesOnMiniature) {
  ModelConfig c = ModelConfig::miniature(Variant::tvae_r);
  c.steps = 60;
  c.learning_rate = 3e-3;
  c.batch_size = 4;
  Model m(c);
  const TrainReport rep = train(m, tiny_videos(8, 7, c));
  double first = 0, last = 0;
  for (int i = 0; i < 10; ++i) {
    first += rep.history[i].loss;
    last += rep.history[rep.history.size() - 1 - i].loss;
  }
  EXPECT_LT(last, first);
  EXPECT_TRUE(m.ranges.valid);
}

TEST(Config, JsonRoundTripAndValidation) {
  for (Variant v : {Variant::tvae_c, Variant::tvae_r, Variant::tvae_s, Variant::tae_c, Variant::tae_r,
                    Variant::tae_s, Variant::vae}) {
    const ModelConfig c = ModelConfig::desk(v);
    ModelConfig back = ModelConfig::defaults(Variant::tvae_s);
    from_json(nlohmann::json(c), back);
    EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
    EXPECT_EQ(variant_from_string(to_string(v)), v);
  }
  ModelConfig bad = ModelConfig::miniature(Variant::tvae_c);
  bad.latent_dim = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ModelConfig::miniature(Variant::tvae_r);
  bad.frequency_min = 2.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(variant_from_string("tvae-x"), ConfigError);
}

}  // namespace
}  // namespace tvae
