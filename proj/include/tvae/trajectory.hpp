#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvae {

enum class TrajectoryKind { circular, rotated, spiral };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(const std::string& name);

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Reduces any real phase onto [0, 2*pi).
double reduce_phase(double omega);

/// Parameters of one latent trajectory. `omega` is kept reduced onto
/// [0, 2*pi); `v` is ignored by the circular and rotated variants.
class TrajectoryParams {
 public:
  TrajectoryParams(double f, double omega, double v, std::vector<double> b);

  double f() const { return f_; }
  double omega() const { return omega_; }
  double v() const { return v_; }
  const std::vector<double>& b() const { return b_; }
  std::size_t dim() const { return b_.size(); }

 private:
  double f_;
  double omega_;
  double v_;
  std::vector<double> b_;
};

std::vector<double> eval_circular(double t, const TrajectoryParams& p);
std::vector<double> eval_rot(double t, const TrajectoryParams& p);
std::vector<double> eval_spiral(double t, const TrajectoryParams& p);
std::vector<double> eval_trajectory(TrajectoryKind kind, double t, const TrajectoryParams& p);

/// Row j of the result is the latent point at times[j].
std::vector<std::vector<double>> eval_trajectory(TrajectoryKind kind, std::span<const double> times,
                                                 const TrajectoryParams& p);

/// Number of latent parameters a trajectory exposes per clip (d + 2 or d + 3).
std::size_t trajectory_parameter_count(TrajectoryKind kind, std::size_t d);

namespace detail {

// Raw kernels shared with the network code. No validation; `out`, `b` and
// `db` have length d.
template <typename T>
void trajectory_point(TrajectoryKind kind, T t, T f, T omega, T v, const T* b, std::size_t d, T* out) {
  const T theta = T(2) * std::numbers::pi_v<T> * f * t - omega;
  const T c = std::cos(theta);
  const T s = std::sin(theta);
  if (kind == TrajectoryKind::circular) {
    for (std::size_t i = 0; i < d; ++i) out[i] = b[i];
    out[0] += c;
    out[1] += s;
    return;
  }
  const T drift = kind == TrajectoryKind::spiral ? t * v : T(0);
  out[0] = c - s + b[0] + drift;
  for (std::size_t i = 1; i < d; ++i) out[i] = c + s + b[i] + drift;
}

// Accumulates d(out)/d(f, omega, v, b) contracted with `dout`.
template <typename T>
void trajectory_point_backward(TrajectoryKind kind, T t, T f, T omega, std::size_t d, const T* dout, T& df,
                               T& domega, T& dv, T* db) {
  const T theta = T(2) * std::numbers::pi_v<T> * f * t - omega;
  const T c = std::cos(theta);
  const T s = std::sin(theta);
  T dtheta = 0;
  if (kind == TrajectoryKind::circular) {
    dtheta = -s * dout[0] + c * dout[1];
  } else {
    dtheta = (-s - c) * dout[0];
    T rest = 0;
    for (std::size_t i = 1; i < d; ++i) rest += dout[i];
    dtheta += (c - s) * rest;
    if (kind == TrajectoryKind::spiral) {
      T all = dout[0] + rest;
      dv += t * all;
    }
  }
  for (std::size_t i = 0; i < d; ++i) db[i] += dout[i];
  df += dtheta * T(2) * std::numbers::pi_v<T> * t;
  domega -= dtheta;
}

}  // namespace detail
}  // namespace tvae
