#include "tvae/spectral.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tvae/trajectory.hpp"

namespace tvae {

PhaseEstimator::PhaseEstimator(int frames, double fps, double f_min, double f_max, double step) : frames_(frames) {
  if (frames < 5) throw std::invalid_argument("phase estimation needs at least 5 frames");
  if (!(f_min > 0) || !(f_max > f_min) || !(step > 0)) throw std::invalid_argument("invalid frequency grid");
  const int points = static_cast<int>(std::floor((f_max - f_min) / step + 1e-9)) + 1;
  grid_.reserve(points);
  for (int g = 0; g < points; ++g) {
    const double f = f_min + g * step;
    Eigen::Matrix<double, Eigen::Dynamic, 4> a(frames, 4);
    for (int j = 0; j < frames; ++j) {
      const double t = j / fps;
      const double th = 2.0 * std::numbers::pi * f * t;
      a.row(j) << 1.0, t, std::cos(th), std::sin(th);
    }
    const Eigen::Matrix4d gram = a.transpose() * a;
    // Near-degenerate grams (f close to 0 or to the Nyquist rate) are skipped.
    Eigen::FullPivLU<Eigen::Matrix4d> lu(gram);
    if (lu.rank() < 4 || lu.rcond() < 1e-10) continue;
    const Eigen::Matrix<double, 4, Eigen::Dynamic> proj = lu.inverse() * a.transpose();
    GridPoint p{f, std::vector<double>(frames * 4), std::vector<double>(4 * frames)};
    for (int j = 0; j < frames; ++j)
      for (int k = 0; k < 4; ++k) {
        p.design[j * 4 + k] = a(j, k);
        p.projection[k * frames + j] = proj(k, j);
      }
    grid_.push_back(std::move(p));
  }
  if (grid_.empty()) throw std::invalid_argument("frequency grid has no usable points for this clip length");
}

PhaseEstimate PhaseEstimator::estimate(std::span<const double> m) const {
  if (static_cast<int>(m.size()) != frames_) throw std::invalid_argument("series length does not match estimator");
  PhaseEstimate best;
  double best_rss = INFINITY;
  for (std::size_t g = 0; g < grid_.size(); ++g) {
    const GridPoint& p = grid_[g];
    double coef[4] = {0, 0, 0, 0};
    for (int k = 0; k < 4; ++k)
      for (int j = 0; j < frames_; ++j) coef[k] += p.projection[k * frames_ + j] * m[j];
    double rss = 0;
    for (int j = 0; j < frames_; ++j) {
      double fit = 0;
      for (int k = 0; k < 4; ++k) fit += p.design[j * 4 + k] * coef[k];
      rss += (fit - m[j]) * (fit - m[j]);
    }
    if (rss < best_rss - 1e-15) {
      best_rss = rss;
      best.f = p.f;
      best.grid_index = static_cast<int>(g);
      best.c = coef[2];
      best.s = coef[3];
    }
  }
  best.omega = reduce_phase(std::atan2(best.s, best.c));
  return best;
}

std::vector<double> PhaseEstimator::omega_gradient(const PhaseEstimate& e) const {
  std::vector<double> g(frames_, 0.0);
  const double r2 = e.c * e.c + e.s * e.s;
  if (r2 == 0) return g;
  const GridPoint& p = grid_.at(e.grid_index);
  for (int j = 0; j < frames_; ++j)
    g[j] = (e.c * p.projection[3 * frames_ + j] - e.s * p.projection[2 * frames_ + j]) / r2;
  return g;
}

}  // namespace tvae
