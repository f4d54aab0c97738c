#include "tvae/trajectory.hpp"

namespace tvae {

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::circular: return "circular";
    case TrajectoryKind::rotated: return "rotated";
    case TrajectoryKind::spiral: return "spiral";
  }
  return "unknown";
}

TrajectoryKind trajectory_kind_from_string(const std::string& name) {
  if (name == "circular") return TrajectoryKind::circular;
  if (name == "rotated") return TrajectoryKind::rotated;
  if (name == "spiral") return TrajectoryKind::spiral;
  throw std::invalid_argument("unknown trajectory kind: " + name);
}

double reduce_phase(double omega) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(omega, two_pi);
  if (r < 0) r += two_pi;
  // fmod of a tiny negative can round up to exactly 2*pi.
  if (r >= two_pi) r = 0.0;
  return r;
}

TrajectoryParams::TrajectoryParams(double f, double omega, double v, std::vector<double> b)
    : f_(f), omega_(reduce_phase(omega)), v_(v), b_(std::move(b)) {
  if (!(f > 0) || !std::isfinite(f)) throw std::invalid_argument("trajectory frequency must be positive and finite");
  if (!std::isfinite(omega) || !std::isfinite(v)) throw std::invalid_argument("trajectory phase/velocity must be finite");
  if (b_.empty()) throw DimensionError("trajectory spatial code must have d >= 1");
}

std::vector<double> eval_trajectory(TrajectoryKind kind, double t, const TrajectoryParams& p) {
  const std::size_t d = p.dim();
  if (kind == TrajectoryKind::circular && d < 2) throw DimensionError("circular trajectory requires d >= 2");
  std::vector<double> out(d);
  detail::trajectory_point(kind, t, p.f(), p.omega(), p.v(), p.b().data(), d, out.data());
  return out;
}

std::vector<double> eval_circular(double t, const TrajectoryParams& p) {
  return eval_trajectory(TrajectoryKind::circular, t, p);
}

std::vector<double> eval_rot(double t, const TrajectoryParams& p) {
  return eval_trajectory(TrajectoryKind::rotated, t, p);
}

std::vector<double> eval_spiral(double t, const TrajectoryParams& p) {
  return eval_trajectory(TrajectoryKind::spiral, t, p);
}

std::vector<std::vector<double>> eval_trajectory(TrajectoryKind kind, std::span<const double> times,
                                                 const TrajectoryParams& p) {
  std::vector<std::vector<double>> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(eval_trajectory(kind, t, p));
  return out;
}

std::size_t trajectory_parameter_count(TrajectoryKind kind, std::size_t d) {
  return kind == TrajectoryKind::spiral ? d + 3 : d + 2;
}

}  // namespace tvae
