#pragma once

// Cardiac phase from the mean-intensity series of a clip. Fits
// m(t) = a + b t + c cos(2 pi f t) + s sin(2 pi f t) by least squares on a
// frequency grid and keeps the best fit. The phase omega = atan2(s, c) then
// puts the oscillation in the form cos(2 pi f t - omega).

#include <span>
#include <vector>

namespace tvae {

struct PhaseEstimate {
  double f = 0;
  double omega = 0;  // [0, 2 pi)
  int grid_index = 0;
  double c = 0, s = 0;
};

class PhaseEstimator {
 public:
  PhaseEstimator(int frames, double fps, double f_min, double f_max, double step = 0.01);

  PhaseEstimate estimate(std::span<const double> series) const;
  /// d omega / d series at a given estimate (f is piecewise constant in the series).
  std::vector<double> omega_gradient(const PhaseEstimate& e) const;

  int frames() const { return frames_; }
  std::size_t grid_size() const { return grid_.size(); }

 private:
  struct GridPoint {
    double f;
    std::vector<double> design;      // frames x 4, row-major
    std::vector<double> projection;  // 4 x frames: (A^T A)^-1 A^T
  };
  int frames_;
  std::vector<GridPoint> grid_;
};

}  // namespace tvae
