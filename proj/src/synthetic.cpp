// Synthetic periodic "echo" videos: a bright myocardium ellipse holding 2-4
// dark chambers whose radii oscillate at the heart rate, an optional slow
// drift of the whole scene, speckle noise, and injectable structural
// anomalies with pixel-exact masks.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tvae/data.hpp"

namespace tvae {

std::string to_string(AnomalyType t) {
  switch (t) {
    case AnomalyType::none: return "none";
    case AnomalyType::wall_gap: return "wall-gap";
    case AnomalyType::dilation: return "dilation";
    case AnomalyType::displacement: return "displacement";
  }
  return "unknown";
}

AnomalyType anomaly_type_from_string(const std::string& name) {
  for (AnomalyType t : {AnomalyType::none, AnomalyType::wall_gap, AnomalyType::dilation, AnomalyType::displacement})
    if (to_string(t) == name) return t;
  throw DataError("unknown anomaly type: " + name);
}

void SyntheticSpec::validate() const {
  auto range = [](double lo, double hi, const char* what) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw DataError(std::string("invalid range for ") + what);
  };
  if (count < 0) throw DataError("synthetic count must be >= 0");
  if (fps <= 0 || frames <= 0 || height < 8 || width < 8) throw DataError("invalid synthetic video geometry");
  if (fps > 65535) throw DataError("fps does not fit the container format");
  range(heart_rate_min, heart_rate_max, "heart rate");
  if (!(heart_rate_min > 0)) throw DataError("heart rate must be positive");
  range(phase_min, phase_max, "phase");
  range(drift_min, drift_max, "drift velocity");
  if (chambers_min < 2 || chambers_max > 4 || chambers_min > chambers_max)
    throw DataError("chamber count range must lie within [2, 4]");
  range(chamber_radius_min, chamber_radius_max, "chamber radius");
  if (!(chamber_radius_min > 0) || chamber_radius_max > 0.2) throw DataError("chamber radius must lie in (0, 0.2]");
  range(contraction_min, contraction_max, "contraction");
  if (contraction_min < 0 || contraction_max > 0.5) throw DataError("contraction must lie in [0, 0.5]");
  if (!(wall_motion >= 0 && wall_motion <= 0.2)) throw DataError("wall motion must lie in [0, 0.2]");
  if (noise_level < 0) throw DataError("noise level must be >= 0");
  if (!(severity >= 0 && severity <= 1)) throw DataError("severity must lie in [0, 1]");
  if (!(anomaly_fraction >= 0 && anomaly_fraction <= 1)) throw DataError("anomaly fraction must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = {{"count", s.count},
       {"seed", s.seed},
       {"fps", s.fps},
       {"frames", s.frames},
       {"height", s.height},
       {"width", s.width},
       {"heart_rate_min", s.heart_rate_min},
       {"heart_rate_max", s.heart_rate_max},
       {"phase_min", s.phase_min},
       {"phase_max", s.phase_max},
       {"drift_min", s.drift_min},
       {"drift_max", s.drift_max},
       {"chambers_min", s.chambers_min},
       {"chambers_max", s.chambers_max},
       {"chamber_radius_min", s.chamber_radius_min},
       {"chamber_radius_max", s.chamber_radius_max},
       {"contraction_min", s.contraction_min},
       {"contraction_max", s.contraction_max},
       {"wall_motion", s.wall_motion},
       {"noise_level", s.noise_level},
       {"anomaly", to_string(s.anomaly)},
       {"severity", s.severity},
       {"anomaly_fraction", s.anomaly_fraction},
       {"id_prefix", s.id_prefix},
       {"index_offset", s.index_offset}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  auto opt = [&](const char* key, auto& out) {
    if (j.contains(key)) j.at(key).get_to(out);
  };
  opt("count", s.count);
  opt("seed", s.seed);
  opt("fps", s.fps);
  opt("frames", s.frames);
  opt("height", s.height);
  opt("width", s.width);
  opt("heart_rate_min", s.heart_rate_min);
  opt("heart_rate_max", s.heart_rate_max);
  opt("phase_min", s.phase_min);
  opt("phase_max", s.phase_max);
  opt("drift_min", s.drift_min);
  opt("drift_max", s.drift_max);
  opt("chambers_min", s.chambers_min);
  opt("chambers_max", s.chambers_max);
  opt("chamber_radius_min", s.chamber_radius_min);
  opt("chamber_radius_max", s.chamber_radius_max);
  opt("contraction_min", s.contraction_min);
  opt("contraction_max", s.contraction_max);
  opt("wall_motion", s.wall_motion);
  opt("noise_level", s.noise_level);
  if (j.contains("anomaly")) s.anomaly = anomaly_type_from_string(j.at("anomaly").get<std::string>());
  opt("severity", s.severity);
  opt("anomaly_fraction", s.anomaly_fraction);
  opt("id_prefix", s.id_prefix);
  opt("index_offset", s.index_offset);
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kCenterOffset = 0.17;

struct Chamber {
  double cx, cy;  // offset from the heart centre, frame widths
  double rx, ry;
  double amplitude;
  double phase;
};

struct Scene {
  SyntheticScene summary;
  double center_x = 0.5, center_y = 0.5;
  double heart_rx = 0.4, heart_ry = 0.42;
  double tissue = 0.75, blood = 0.1, background = 0.04;
  std::vector<Chamber> chambers;
  int septal_left = 0, septal_right = 1;

  // Anomaly parameters; zero severity leaves the render untouched.
  AnomalyType anomaly = AnomalyType::none;
  double severity = 0;
  int dilated = 0;
  double gap_offset = 0;
  double shift_angle = 0;
};

Scene build_scene(const SyntheticSpec& spec, int index) {
  const std::uint64_t base = derive_seed({spec.seed, static_cast<std::uint64_t>(index + spec.index_offset)});
  Rng rng(derive_seed({base, 1}));
  Scene sc;
  SyntheticScene& s = sc.summary;
  s.heart_rate = uniform(rng, spec.heart_rate_min, spec.heart_rate_max);
  s.phase = uniform(rng, spec.phase_min, spec.phase_max);
  s.drift_x = uniform(rng, spec.drift_min, spec.drift_max);
  s.drift_y = uniform(rng, spec.drift_min, spec.drift_max);
  s.chambers = std::uniform_int_distribution<int>(spec.chambers_min, spec.chambers_max)(rng);
  sc.center_x = 0.5 + uniform(rng, -0.03, 0.03);
  sc.center_y = 0.5 + uniform(rng, -0.03, 0.03);
  const double size = uniform(rng, 0.95, 1.05);
  sc.heart_rx = 0.40 * size;
  sc.heart_ry = 0.43 * size;
  sc.tissue = uniform(rng, 0.65, 0.8);
  sc.blood = uniform(rng, 0.05, 0.15);
  sc.background = uniform(rng, 0.0, 0.08);
  double radius[4], amp[4];
  for (int i = 0; i < 4; ++i) {
    radius[i] = uniform(rng, spec.chamber_radius_min, spec.chamber_radius_max) * size;
    amp[i] = uniform(rng, spec.contraction_min, spec.contraction_max);
  }
  const double o = kCenterOffset * size;
  switch (s.chambers) {
    case 2:
      sc.chambers = {{-o, 0, radius[0], 1.6 * radius[0], amp[0], 0}, {o, 0, radius[1], 1.6 * radius[1], amp[1], 0}};
      break;
    case 3:
      sc.chambers = {{-o, -o, radius[0], radius[0], 0.6 * amp[0], std::numbers::pi},
                     {o, -o, radius[1], radius[1], 0.6 * amp[1], std::numbers::pi},
                     {0, 1.05 * o, 2.0 * radius[2], 0.9 * radius[2], amp[2], 0}};
      break;
    default:
      sc.chambers = {{-o, -o, radius[0], radius[0], 0.6 * amp[0], std::numbers::pi},
                     {o, -o, radius[1], radius[1], 0.6 * amp[1], std::numbers::pi},
                     {-o, o, radius[2], 1.1 * radius[2], amp[2], 0},
                     {o, o, radius[3], 1.1 * radius[3], amp[3], 0}};
      sc.septal_left = 2;
      sc.septal_right = 3;
      break;
  }
  if (s.chambers == 3) sc.septal_left = 0, sc.septal_right = 1;

  const int n = spec.count;
  const auto before = static_cast<long>(std::floor(index * spec.anomaly_fraction + 1e-9));
  const auto after = static_cast<long>(std::floor((index + 1) * spec.anomaly_fraction + 1e-9));
  s.anomalous = spec.anomaly != AnomalyType::none && index < n && after > before;
  if (s.anomalous) {
    Rng arng(derive_seed({base, 3}));
    sc.anomaly = spec.anomaly;
    sc.severity = spec.severity;
    sc.dilated = std::uniform_int_distribution<int>(0, s.chambers - 1)(arng);
    sc.gap_offset = uniform(arng, -0.25, 0.25);
    sc.shift_angle = uniform(arng, 0.0, kTwoPi);
  }
  return sc;
}

double soft_inside(double q, double scale, double softness) {
  // q is the normalized ellipse radius; (q - 1) * scale approximates the signed distance.
  const double sd = (q - 1.0) * scale;
  return 1.0 / (1.0 + std::exp(sd / softness));
}

// Noise-free render of frame `f`; `with_anomaly` selects the anomalous geometry.
void render_frame(const SyntheticSpec& spec, const Scene& sc, int f, bool with_anomaly, std::vector<double>& out) {
  const int h = spec.height, w = spec.width;
  const double t = static_cast<double>(f) / spec.fps;
  const double theta = kTwoPi * sc.summary.heart_rate * t - sc.summary.phase;
  const bool anomalous = with_anomaly && sc.anomaly != AnomalyType::none && sc.severity > 0;

  double cx = sc.center_x + sc.summary.drift_x * t;
  double cy = sc.center_y + sc.summary.drift_y * t;
  if (anomalous && sc.anomaly == AnomalyType::displacement && f >= spec.frames / 2) {
    cx += 0.12 * sc.severity * std::cos(sc.shift_angle);
    cy += 0.12 * sc.severity * std::sin(sc.shift_angle);
  }
  const double px = 1.0 / w;  // one pixel in frame widths
  const double softness = 0.6 * px;

  const double heart_scale = 1.0 + spec.wall_motion * std::sin(theta);
  const double hrx = sc.heart_rx * heart_scale, hry = sc.heart_ry * heart_scale;

  struct Live {
    double x, y, rx, ry;
  };
  std::vector<Live> live;
  for (std::size_t i = 0; i < sc.chambers.size(); ++i) {
    const Chamber& c = sc.chambers[i];
    double k = 1.0 + c.amplitude * std::sin(theta + c.phase);
    if (anomalous && sc.anomaly == AnomalyType::dilation && static_cast<int>(i) == sc.dilated)
      k *= 1.0 + 0.35 * sc.severity;
    live.push_back({cx + c.cx, cy + c.cy, c.rx * k, c.ry * k});
  }

  // Septal gap: a band across the wall between the septal pair.
  const Live& a = live[sc.septal_left];
  const Live& b = live[sc.septal_right];
  const double gap_x = 0.5 * (a.x + b.x);
  const double gap_half_w = 0.4 * (b.x - a.x);
  const double pair_ry = 0.5 * (sc.chambers[sc.septal_left].ry + sc.chambers[sc.septal_right].ry);
  const double gap_y = 0.5 * (a.y + b.y) + sc.gap_offset * pair_ry;
  const double gap_half_h = 0.9 * sc.severity * pair_ry;
  const bool gap = anomalous && sc.anomaly == AnomalyType::wall_gap;

  out.assign(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    const double yy = (y + 0.5) / w;  // frame-width units in both axes
    for (int x = 0; x < w; ++x) {
      const double xx = (x + 0.5) / w;
      double v = sc.background;
      const double qh = std::hypot((xx - cx) / hrx, (yy - cy) / hry);
      v += (sc.tissue - v) * soft_inside(qh, std::min(hrx, hry), softness);
      for (const Live& c : live) {
        const double q = std::hypot((xx - c.x) / c.rx, (yy - c.y) / c.ry);
        v += (sc.blood - v) * soft_inside(q, std::min(c.rx, c.ry), softness);
      }
      if (gap) {
        const double dx = std::abs(xx - gap_x) - gap_half_w;
        const double dy = std::abs(yy - gap_y) - gap_half_h;
        const double sd = std::max(dx, dy);
        v += (sc.blood - v) * (1.0 / (1.0 + std::exp(sd / softness)));
      }
      out[y * w + x] = v;
    }
  }
}

}  // namespace

SyntheticScene synthetic_scene(const SyntheticSpec& spec, int index) { return build_scene(spec, index).summary; }

RawVideo generate_synthetic_video(const SyntheticSpec& spec, int index) {
  spec.validate();
  const Scene sc = build_scene(spec, index);
  const std::uint64_t base = derive_seed({spec.seed, static_cast<std::uint64_t>(index + spec.index_offset)});
  Rng noise_rng(derive_seed({base, 2}));
  std::normal_distribution<double> noise(0.0, 1.0);

  RawVideo v;
  v.id = spec.id_prefix + "_" + std::to_string(index + spec.index_offset);
  v.label = sc.summary.anomalous ? to_string(spec.anomaly) : kNormalLabel;
  v.fps = spec.fps;
  v.frames = spec.frames;
  v.height = spec.height;
  v.width = spec.width;
  const std::size_t fs = v.frame_size();
  v.pixels.resize(fs * spec.frames);
  v.mask.assign(fs * spec.frames, 0);
  std::vector<double> clean, anomalous;
  for (int f = 0; f < spec.frames; ++f) {
    render_frame(spec, sc, f, true, anomalous);
    if (sc.summary.anomalous) {
      render_frame(spec, sc, f, false, clean);
      for (std::size_t i = 0; i < fs; ++i) v.mask[f * fs + i] = std::abs(anomalous[i] - clean[i]) > 0.05 ? 1 : 0;
    }
    for (std::size_t i = 0; i < fs; ++i) {
      const double x = anomalous[i] + spec.noise_level * noise(noise_rng);
      v.pixels[f * fs + i] = static_cast<std::uint8_t>(std::clamp(std::lround(x * 255.0), 0L, 255L));
    }
  }
  return v;
}

std::vector<RawVideo> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<RawVideo> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) out.push_back(generate_synthetic_video(spec, i));
  return out;
}

}  // namespace tvae
