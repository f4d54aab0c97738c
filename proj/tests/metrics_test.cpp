#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "tvae/metrics.hpp"

namespace tvae {
namespace {

double auroc_oracle(const std::vector<double>& s, const std::vector<bool>& pos) {
  double u = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        u += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        pairs += 1;
      }
  return u / pairs;
}

// Every distinct score is a threshold (predict positive when score >= t).
double ap_oracle(const std::vector<double>& s, const std::vector<bool>& pos) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double n_pos = 0;
  for (bool p : pos) n_pos += p;
  double ap = 0, prev_recall = 0;
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) (pos[i] ? tp : fp) += 1;
    const double recall = tp / n_pos, precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

TEST(Detection, MatchesEnumerationOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 40)(rng);
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    // Coarse scores force ties in many trials.
    const int levels = trial % 2 ? 5 : 1000;
    for (int i = 0; i < n; ++i) {
      s[i] = std::uniform_int_distribution<int>(0, levels)(rng) / static_cast<double>(levels);
      pos[i] = i == 0 || (i != 1 && std::bernoulli_distribution(0.4)(rng));
    }
    const DetectionMetrics m = auroc_ap(s, pos);
    EXPECT_NEAR(m.auroc, auroc_oracle(s, pos), 1e-12) << trial;
    EXPECT_NEAR(m.ap, ap_oracle(s, pos), 1e-12) << trial;
  }
}

TEST(Detection, WorkedExample) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<bool> pos = {false, true, false, true};
  const DetectionMetrics m = auroc_ap(s, pos);
  EXPECT_DOUBLE_EQ(m.auroc, 1.0);
  EXPECT_DOUBLE_EQ(m.ap, 1.0);
  const std::vector<bool> mixed = {true, false, true, false};
  EXPECT_DOUBLE_EQ(auroc_ap(s, mixed).auroc, auroc_oracle(s, mixed));
  EXPECT_DOUBLE_EQ(auroc_ap(s, mixed).ap, ap_oracle(s, mixed));
}

TEST(Detection, AllTiedScores) {
  const std::vector<double> s(10, 0.3);
  const std::vector<bool> pos = {true, false, false, true, false, false, false, true, false, false};
  const DetectionMetrics m = auroc_ap(s, pos);
  EXPECT_DOUBLE_EQ(m.auroc, 0.5);
  EXPECT_DOUBLE_EQ(m.ap, 0.3);
}

TEST(Detection, SymmetryAndMonotoneInvariance) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::vector<double> s(30);
  std::vector<bool> anom(30);
  for (int i = 0; i < 30; ++i) {
    anom[i] = i % 3 == 0;
    s[i] = normal(rng) + (anom[i] ? 0.8 : 0.0);
  }
  const DetectionPair both = detection_both_ways(s, anom);
  EXPECT_NEAR(both.anomalous_positive.auroc, both.healthy_positive.auroc, 1e-12);
  EXPECT_NE(both.anomalous_positive.ap, both.healthy_positive.ap);
  std::vector<double> t = s;
  for (double& v : t) v = std::exp(3 * v) + 1;
  EXPECT_DOUBLE_EQ(auroc_ap(t, anom).auroc, auroc_ap(s, anom).auroc);
}

TEST(Detection, RejectsDegenerateLabels) {
  const std::vector<double> s = {1, 2};
  EXPECT_THROW(auroc_ap(s, {true, true}), InputError);
  EXPECT_THROW(auroc_ap(s, {true}), InputError);
}

// Direct 2-D windowed SSIM, written independently of the separable filter.
double ssim_oracle(const std::vector<float>& a, const std::vector<float>& b, int H, int W) {
  double g[11][11], total = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  const double c1 = 1e-4, c2 = 9e-4;
  double sum = 0;
  int count = 0;
  for (int y = 0; y + 11 <= H; ++y)
    for (int x = 0; x + 11 <= W; ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          ma += g[i][j] / total * a[(y + i) * W + x + j];
          mb += g[i][j] / total * b[(y + i) * W + x + j];
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double da = a[(y + i) * W + x + j] - ma, db = b[(y + i) * W + x + j] - mb;
          va += g[i][j] / total * da * da;
          vb += g[i][j] / total * db * db;
          cov += g[i][j] / total * da * db;
        }
      sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return sum / count;
}

TEST(Reconstruction, SsimMatchesOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> unit(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<float> a(256), b(256);
    for (int i = 0; i < 256; ++i) {
      a[i] = unit(rng);
      b[i] = std::clamp(a[i] + 0.2f * (unit(rng) - 0.5f), 0.0f, 1.0f);
    }
    EXPECT_NEAR(ssim(a, b, 16, 16), ssim_oracle(a, b, 16, 16), 1e-6);
  }
  std::vector<float> small(100, 0.5f);
  EXPECT_THROW(ssim(small, small, 10, 10), InputError);
}

TEST(Reconstruction, IdentityAndComplement) {
  EchoClip x(3, 12, 12, 12.0);
  std::mt19937_64 rng(4);
  for (float& v : x.frames) v = std::bernoulli_distribution(0.5)(rng) ? 1.0f : 0.0f;
  const ReconstructionMetrics same = reconstruction_metrics(x, x);
  EXPECT_EQ(same.mse, 0.0);
  EXPECT_EQ(same.psnr, kPsnrCap);
  EXPECT_NEAR(same.ssim, 1.0, 1e-12);
  EchoClip inv = x;
  for (float& v : inv.frames) v = 1 - v;
  EXPECT_DOUBLE_EQ(reconstruction_metrics(x, inv).mse, 1.0);
  for (double m : {1e-3, 0.02, 0.5}) EXPECT_NEAR(psnr_from_mse(m), 10 * std::log10(1 / m), 1e-10 * 10 * std::log10(1 / m) + 1e-15);
  EchoClip other(2, 12, 12, 12.0);
  EXPECT_THROW(reconstruction_metrics(x, other), InputError);
}

TEST(Report, JsonAndCsv) {
  MetricsReport r;
  for (int k = 0; k < 3; ++k) {
    SplitMetrics s;
    s.name = "split" + std::to_string(k);
    s.clips = 4;
    s.reconstruction = {0.01 * (k + 1), 20, 0.9};
    s.detection["wall_gap"] = {{0.8 + 0.05 * k, 0.7}, {0.8 + 0.05 * k, 0.6}};
    r.splits.push_back(s);
  }
  const auto j = r.to_json();
  EXPECT_NEAR(j["summary"]["wall_gap_auroc"]["mean"].get<double>(), 0.85, 1e-12);
  EXPECT_NEAR(j["summary"]["wall_gap_auroc"]["std"].get<double>(), 0.05, 1e-12);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "split,mse,psnr,ssim,wall_gap_auroc,wall_gap_ap,wall_gap_ap_healthy_positive");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

}  // namespace
}  // namespace tvae
