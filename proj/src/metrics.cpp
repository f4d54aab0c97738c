#include "tvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

namespace tvae {

double mse(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.empty()) throw InputError("MSE needs two non-empty arrays of equal size");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr_from_mse(double m) {
  if (m <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

double ssim(std::span<const float> a, std::span<const float> b, int height, int width) {
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5, kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  if (a.size() != b.size() || a.size() != static_cast<std::size_t>(height) * width)
    throw InputError("SSIM frames must share the given shape");
  if (height < kWin || width < kWin) throw InputError("SSIM needs frames of at least 11x11");

  double w1[kWin];
  double total = 0;
  for (int k = 0; k < kWin; ++k) {
    const double x = k - kWin / 2;
    w1[k] = std::exp(-x * x / (2 * kSigma * kSigma));
    total += w1[k];
  }
  for (double& v : w1) v /= total;

  // Separable filtering of a, b, a^2, b^2 and ab; rows first, then columns.
  const int oh = height - kWin + 1, ow = width - kWin + 1;
  std::vector<double> rows(static_cast<std::size_t>(5) * height * ow, 0.0);
  auto row_at = [&](int ch, int i, int j) -> double& { return rows[(static_cast<std::size_t>(ch) * height + i) * ow + j]; };
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < ow; ++j)
      for (int k = 0; k < kWin; ++k) {
        const double x = a[static_cast<std::size_t>(i) * width + j + k], y = b[static_cast<std::size_t>(i) * width + j + k];
        row_at(0, i, j) += w1[k] * x;
        row_at(1, i, j) += w1[k] * y;
        row_at(2, i, j) += w1[k] * x * x;
        row_at(3, i, j) += w1[k] * y * y;
        row_at(4, i, j) += w1[k] * x * y;
      }
  double sum = 0;
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      double m[5] = {0, 0, 0, 0, 0};
      for (int ch = 0; ch < 5; ++ch)
        for (int k = 0; k < kWin; ++k) m[ch] += w1[k] * row_at(ch, i + k, j);
      const double va = m[2] - m[0] * m[0], vb = m[3] - m[1] * m[1], cov = m[4] - m[0] * m[1];
      sum += ((2 * m[0] * m[1] + kC1) * (2 * cov + kC2)) / ((m[0] * m[0] + m[1] * m[1] + kC1) * (va + vb + kC2));
    }
  return sum / (static_cast<double>(oh) * ow);
}

ReconstructionMetrics reconstruction_metrics(const EchoClip& x, const EchoClip& r) {
  if (!x.same_shape(r)) throw InputError("reconstruction shape differs from the original");
  ReconstructionMetrics m;
  m.mse = mse(x.frames, r.frames);
  m.psnr = psnr_from_mse(m.mse);
  double s = 0;
  for (int j = 0; j < x.frames_count; ++j) s += ssim(x.frame(j), r.frame(j), x.height, x.width);
  m.ssim = s / x.frames_count;
  return m;
}

DetectionMetrics auroc_ap(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw InputError("scores and labels differ in length");
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t n_neg = positive.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("detection metrics need both positive and negative samples");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });

  // Walk tie groups from the highest score down.
  DetectionMetrics out;
  double tp = 0, fp = 0, u = 0;
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo;
    double gp = 0, gn = 0;
    while (hi < order.size() && scores[order[hi]] == scores[order[lo]]) {
      (positive[order[hi]] ? gp : gn) += 1;
      ++hi;
    }
    // Positives in this group beat every negative below it and tie with the group's negatives.
    u += gp * (static_cast<double>(n_neg) - fp - gn) + 0.5 * gp * gn;
    tp += gp;
    fp += gn;
    out.ap += (gp / static_cast<double>(n_pos)) * (tp / (tp + fp));
    lo = hi;
  }
  out.auroc = u / (static_cast<double>(n_pos) * n_neg);
  return out;
}

DetectionPair detection_both_ways(std::span<const double> scores, const std::vector<bool>& anomalous) {
  std::vector<double> negated(scores.begin(), scores.end());
  for (double& s : negated) s = -s;
  std::vector<bool> healthy(anomalous.size());
  for (std::size_t i = 0; i < anomalous.size(); ++i) healthy[i] = !anomalous[i];
  return {auroc_ap(scores, anomalous), auroc_ap(negated, healthy)};
}

Summary summarize(std::span<const double> v) {
  Summary s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

namespace {

std::set<std::string> anomaly_labels(const std::vector<SplitMetrics>& splits) {
  std::set<std::string> labels;
  for (const auto& s : splits)
    for (const auto& [label, _] : s.detection) labels.insert(label);
  return labels;
}

// Column name -> value extractor, in output order.
std::vector<std::pair<std::string, std::function<std::optional<double>(const SplitMetrics&)>>> columns(
    const std::vector<SplitMetrics>& splits) {
  std::vector<std::pair<std::string, std::function<std::optional<double>(const SplitMetrics&)>>> cols = {
      {"mse", [](const SplitMetrics& s) -> std::optional<double> { return s.clips ? std::optional(s.reconstruction.mse) : std::nullopt; }},
      {"psnr", [](const SplitMetrics& s) -> std::optional<double> { return s.clips ? std::optional(s.reconstruction.psnr) : std::nullopt; }},
      {"ssim", [](const SplitMetrics& s) -> std::optional<double> { return s.clips ? std::optional(s.reconstruction.ssim) : std::nullopt; }},
  };
  for (const std::string& label : anomaly_labels(splits)) {
    auto get = [label](auto pick) {
      return [label, pick](const SplitMetrics& s) -> std::optional<double> {
        const auto it = s.detection.find(label);
        if (it == s.detection.end()) return std::nullopt;
        return pick(it->second);
      };
    };
    cols.emplace_back(label + "_auroc", get([](const DetectionPair& d) { return d.anomalous_positive.auroc; }));
    cols.emplace_back(label + "_ap", get([](const DetectionPair& d) { return d.anomalous_positive.ap; }));
    cols.emplace_back(label + "_ap_healthy_positive", get([](const DetectionPair& d) { return d.healthy_positive.ap; }));
  }
  return cols;
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json out;
  out["splits"] = nlohmann::json::array();
  for (const auto& s : splits) {
    nlohmann::json j = {{"name", s.name}, {"clips", s.clips}};
    if (s.clips)
      j["reconstruction"] = {{"mse", s.reconstruction.mse}, {"psnr", s.reconstruction.psnr}, {"ssim", s.reconstruction.ssim}};
    for (const auto& [label, d] : s.detection)
      j["detection"][label] = {
          {"anomalous_positive", {{"auroc", d.anomalous_positive.auroc}, {"ap", d.anomalous_positive.ap}}},
          {"healthy_positive", {{"auroc", d.healthy_positive.auroc}, {"ap", d.healthy_positive.ap}}}};
    out["splits"].push_back(j);
  }
  for (const auto& [name, get] : columns(splits)) {
    std::vector<double> values;
    for (const auto& s : splits)
      if (auto v = get(s)) values.push_back(*v);
    if (values.empty()) continue;
    const Summary sm = summarize(values);
    out["summary"][name] = {{"mean", sm.mean}, {"std", sm.std}, {"n", values.size()}};
  }
  return out;
}

std::string MetricsReport::to_csv() const {
  const auto cols = columns(splits);
  std::ostringstream os;
  os.precision(10);
  os << "split";
  for (const auto& [name, _] : cols) os << "," << name;
  os << "\n";
  for (const auto& s : splits) {
    os << s.name;
    for (const auto& [_, get] : cols) {
      os << ",";
      if (auto v = get(s)) os << *v;
    }
    os << "\n";
  }
  for (const char* stat : {"mean", "std"}) {
    os << stat;
    for (const auto& [_, get] : cols) {
      std::vector<double> values;
      for (const auto& s : splits)
        if (auto v = get(s)) values.push_back(*v);
      os << ",";
      if (!values.empty()) os << (std::string(stat) == "mean" ? summarize(values).mean : summarize(values).std);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace tvae
