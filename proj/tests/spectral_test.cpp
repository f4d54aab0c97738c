#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tvae/spectral.hpp"

namespace tvae {
namespace {

constexpr double kPi = std::numbers::pi;

double phase_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 2 * kPi);
  return std::min(d, 2 * kPi - d);
}

TEST(PhaseEstimator, RecoversSinusoidWithTrend) {
  const int frames = 25;
  const double fps = 12;
  PhaseEstimator est(frames, fps, 0.5, 3.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> freq(0.7, 2.8), ph(0, 2 * kPi);
  for (int trial = 0; trial < 50; ++trial) {
    const double f = std::round(freq(rng) * 100) / 100, w = ph(rng);
    std::vector<double> m(frames);
    for (int j = 0; j < frames; ++j) {
      const double t = j / fps;
      m[j] = 0.4 + 0.02 * t + 0.05 * std::cos(2 * kPi * f * t - w);
    }
    const PhaseEstimate e = est.estimate(m);
    EXPECT_NEAR(e.f, f, 1e-9) << "trial " << trial;
    EXPECT_LT(phase_distance(e.omega, w), 1e-8) << "trial " << trial;
    EXPECT_GE(e.omega, 0);
    EXPECT_LT(e.omega, 2 * kPi);
  }
}

TEST(PhaseEstimator, OmegaGradientMatchesFiniteDifferences) {
  const int frames = 25;
  PhaseEstimator est(frames, 12, 0.5, 3.0);
  std::vector<double> m(frames);
  for (int j = 0; j < frames; ++j) m[j] = 0.5 + 0.1 * std::cos(2 * kPi * 1.37 * j / 12 - 1.0) + 0.01 * std::sin(j);
  const PhaseEstimate e = est.estimate(m);
  const auto g = est.omega_gradient(e);
  const double h = 1e-7;
  for (int j = 0; j < frames; ++j) {
    auto up = m, down = m;
    up[j] += h;
    down[j] -= h;
    const PhaseEstimate a = est.estimate(up), b = est.estimate(down);
    ASSERT_EQ(a.grid_index, e.grid_index);
    ASSERT_EQ(b.grid_index, e.grid_index);
    EXPECT_NEAR(g[j], (a.omega - b.omega) / (2 * h), 1e-5 * std::max(1.0, std::abs(g[j])));
  }
}

TEST(PhaseEstimator, RejectsBadArguments) {
  EXPECT_THROW(PhaseEstimator(3, 12, 0.5, 3.0), std::invalid_argument);
  EXPECT_THROW(PhaseEstimator(25, 12, 3.0, 0.5), std::invalid_argument);
  PhaseEstimator est(25, 12, 0.5, 3.0);
  std::vector<double> wrong(10, 0.0);
  EXPECT_THROW(est.estimate(wrong), std::invalid_argument);
}

}  // namespace
}  // namespace tvae
