#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "tvae/anomaly.hpp"

namespace tvae {
namespace {

// Straightforward triple loop over voxels with clamped neighbours.
double tv_oracle(const std::vector<double>& x, int T, int H, int W) {
  auto at = [&](int k, int i, int j) {
    k = std::clamp(k, 0, T - 1);
    i = std::clamp(i, 0, H - 1);
    j = std::clamp(j, 0, W - 1);
    return x[(static_cast<std::size_t>(k) * H + i) * W + j];
  };
  double s = 0;
  for (int k = 0; k < T; ++k)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j)
        s += std::abs(at(k, i + 1, j) - at(k, i - 1, j)) + std::abs(at(k, i, j + 1) - at(k, i, j - 1)) +
             std::abs(at(k + 1, i, j) - at(k - 1, i, j));
  return s;
}

std::vector<double> random_array(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal;
  std::vector<double> x(n);
  for (double& v : x) v = normal(rng);
  return x;
}

TEST(TvNorm, MatchesOracleOnRandomArrays) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_array(rng, 125);
    const double ref = tv_oracle(x, 5, 5, 5);
    EXPECT_NEAR(tv_norm(x, 5, 5, 5), ref, 1e-6 * ref);
  }
}

TEST(TvNorm, CenterImpulse) {
  std::vector<double> x(27, 0.0);
  x[13] = 1;
  // Six neighbours see the impulse through one difference each; the centre sees none.
  EXPECT_DOUBLE_EQ(tv_oracle(x, 3, 3, 3), 6.0);
  EXPECT_DOUBLE_EQ(tv_norm(x, 3, 3, 3), 6.0);
}

TEST(TvNorm, ConstantIsZeroAndHomogeneous) {
  std::vector<double> c(4 * 6 * 3, 0.37);
  EXPECT_EQ(tv_norm(c, 4, 6, 3), 0.0);
  std::mt19937_64 rng(2);
  const auto x = random_array(rng, 4 * 6 * 3);
  for (double s : {0.0, 0.5, 3.0}) {
    auto y = x;
    for (double& v : y) v *= s;
    EXPECT_NEAR(tv_norm(y, 4, 6, 3), s * tv_norm(x, 4, 6, 3), 1e-12 * (1 + s * tv_norm(x, 4, 6, 3)));
  }
}

TEST(TvNorm, SingleFrameAndBadShapes) {
  std::mt19937_64 rng(3);
  const auto x = random_array(rng, 12);
  EXPECT_NEAR(tv_norm(x, 1, 3, 4), tv_oracle(x, 1, 3, 4), 1e-12);
  EXPECT_THROW(tv_norm(x, 2, 3, 4), InputError);
  EXPECT_THROW(tv_norm({}, 0, 0, 0), InputError);
}

TEST(TvNorm, SmoothedGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const auto x = random_array(rng, 4 * 5 * 6);
  std::vector<double> g;
  tv_norm_smooth(x, 4, 5, 6, 1e-8, &g);
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto up = x, down = x;
    up[i] += h;
    down[i] -= h;
    const double numeric =
        (tv_norm_smooth(up, 4, 5, 6, 1e-8, nullptr) - tv_norm_smooth(down, 4, 5, 6, 1e-8, nullptr)) / (2 * h);
    EXPECT_NEAR(g[i], numeric, 1e-4 * std::max(1.0, std::abs(numeric))) << i;
  }
  EXPECT_NEAR(tv_norm_smooth(x, 4, 5, 6, 1e-8, nullptr), tv_norm(x, 4, 5, 6), 1e-5);
}

TEST(Perturbation, ScoreAndHeatmap) {
  const int T = 3, H = 2, W = 2;
  std::vector<double> a(T * H * W, 0.0);
  EXPECT_EQ(perturbation_score(a, T), 0.0);
  for (double v : temporal_mean(a, T, H, W)) EXPECT_EQ(v, 0.0);
  for (int k = 0; k < T; ++k)
    for (int q = 0; q < H * W; ++q) a[k * H * W + q] = 0.25;
  for (double v : temporal_mean(a, T, H, W)) EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_DOUBLE_EQ(perturbation_score(a, T), 4 * 0.0625);
}

TEST(ArrayFile, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "tvae_anomaly_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(5);
  auto x = random_array(rng, 24);
  for (double& v : x) v = static_cast<float>(v);
  const int dims[3] = {2, 3, 4};
  write_array(dir / "a.arr", x, dims);
  std::vector<int> shape;
  EXPECT_EQ(read_array(dir / "a.arr", &shape), x);
  EXPECT_EQ(shape, std::vector<int>({2, 3, 4}));
  const int wrong[2] = {5, 5};
  EXPECT_THROW(write_array(dir / "b.arr", x, wrong), InputError);
  std::filesystem::remove_all(dir);
}

class MapRestoreTest : public ::testing::TestWithParam<MapVariant> {};

// Contract checks on an untrained miniature model: they do not depend on training quality.
TEST_P(MapRestoreTest, Contract) {
  ModelConfig config = ModelConfig::miniature(Variant::tvae_s);
  Model model(config);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  EchoClip y(config.frames, config.height, config.width, config.fps);
  for (float& v : y.frames) v = unit(rng);
  MapConfig mc;
  mc.variant = GetParam();
  mc.steps = 30;
  const AnomalyResult r = map_restore(model, y, mc);

  ASSERT_EQ(r.trace.size(), 31u);
  for (std::size_t k = 1; k < r.best_trace.size(); ++k) EXPECT_GE(r.best_trace[k], r.best_trace[k - 1]);
  EXPECT_GE(r.best_trace.back(), r.trace.front());
  if (mc.variant == MapVariant::fast_kl)
    EXPECT_EQ(r.loop_decoder_calls, 0u);
  else
    EXPECT_EQ(r.loop_decoder_calls, 31u);
  EXPECT_NEAR(r.score, perturbation_score(r.perturbation, r.frames), 1e-10 * r.score);
  EXPECT_EQ(r.heatmap, temporal_mean(r.perturbation, r.frames, r.height, r.width));
  for (float v : r.restored.frames) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }

  EchoClip wrong(config.frames + 1, config.height, config.width, config.fps);
  EXPECT_THROW(map_restore(model, wrong, mc), InputError);
}

INSTANTIATE_TEST_SUITE_P(Variants, MapRestoreTest, ::testing::Values(MapVariant::fast_kl, MapVariant::full_elbo),
                         [](const auto& info) { return to_string(info.param); });

TEST(MapRestore, ZeroStepsKeepsReconstruction) {
  ModelConfig config = ModelConfig::miniature(Variant::tvae_r);
  Model model(config);
  EchoClip y(config.frames, config.height, config.width, config.fps);
  std::fill(y.frames.begin(), y.frames.end(), 0.5f);
  MapConfig mc;
  mc.steps = 0;
  const AnomalyResult r = map_restore(model, y, mc);
  const EchoClip rec = model.reconstruct(y);
  for (std::size_t i = 0; i < y.frames.size(); ++i)
    EXPECT_DOUBLE_EQ(r.perturbation[i], static_cast<double>(y.frames[i]) - rec.frames[i]);
  EXPECT_NEAR(r.score, score_reconstruction(model, y), 1e-9);
}

TEST(MapConfig, JsonRoundTripAndValidation) {
  MapConfig c;
  c.variant = MapVariant::full_elbo;
  c.threshold = 0.5;
  const MapConfig back = nlohmann::json(c).get<MapConfig>();
  EXPECT_EQ(back.variant, c.variant);
  EXPECT_EQ(back.threshold, c.threshold);
  EXPECT_EQ(MapConfig{}.steps, 100);
  EXPECT_DOUBLE_EQ(MapConfig{}.step_size, 0.01);
  EXPECT_DOUBLE_EQ(MapConfig{}.tv_weight, 0.001);
  c.step_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace tvae
