#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tvae/clip.hpp"

namespace tvae {

/// PSNR reported for a perfect reconstruction.
inline constexpr double kPsnrCap = 99.0;

struct ReconstructionMetrics {
  double mse = 0;
  double psnr = 0;  // dB, peak 1
  double ssim = 0;  // mean over frames
};

double mse(std::span<const float> a, std::span<const float> b);
double psnr_from_mse(double mse);

/// SSIM of one frame: 11x11 Gaussian window (sigma 1.5) over valid positions,
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Frames must be at least 11x11.
double ssim(std::span<const float> a, std::span<const float> b, int height, int width);

ReconstructionMetrics reconstruction_metrics(const EchoClip& original, const EchoClip& reconstruction);

struct DetectionMetrics {
  double auroc = 0;
  double ap = 0;
};

/// AUROC by the Mann-Whitney statistic (ties count one half) and step-wise
/// average precision with tied scores sharing one threshold. Higher scores
/// mean "more positive". Throws InputError unless both classes are present.
DetectionMetrics auroc_ap(std::span<const double> scores, const std::vector<bool>& positive);

/// Anomaly scores evaluated twice: anomalous as positive, and healthy as
/// positive with the scores negated.
struct DetectionPair {
  DetectionMetrics anomalous_positive;
  DetectionMetrics healthy_positive;
};
DetectionPair detection_both_ways(std::span<const double> scores, const std::vector<bool>& anomalous);

struct SplitMetrics {
  std::string name;
  ReconstructionMetrics reconstruction;  // mean over clips
  int clips = 0;
  std::map<std::string, DetectionPair> detection;  // per anomaly label, against the split's normals
};

struct Summary {
  double mean = 0, std = 0;
};
/// Mean and sample standard deviation (0 for a single value).
Summary summarize(std::span<const double> values);

struct MetricsReport {
  std::vector<SplitMetrics> splits;
  nlohmann::json to_json() const;
  /// One row per split plus mean and std rows.
  std::string to_csv() const;
};

}  // namespace tvae
