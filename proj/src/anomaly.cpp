#include "tvae/anomaly.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

namespace tvae {
namespace fs = std::filesystem;

namespace {

void check_dims(std::size_t size, int frames, int height, int width) {
  if (frames < 1 || height < 1 || width < 1) throw InputError("array must be non-empty");
  if (size != static_cast<std::size_t>(frames) * height * width)
    throw InputError("array size does not match " + std::to_string(frames) + "x" + std::to_string(height) + "x" +
                     std::to_string(width));
}

// Visits every (a, b) pair whose difference x[a] - x[b] enters the TV sum.
template <typename F>
void for_each_difference(int frames, int height, int width, F&& f) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int k = 0; k < frames; ++k) {
    const int kp = std::min(k + 1, frames - 1), km = std::max(k - 1, 0);
    for (int i = 0; i < height; ++i) {
      const int ip = std::min(i + 1, height - 1), im = std::max(i - 1, 0);
      for (int j = 0; j < width; ++j) {
        const int jp = std::min(j + 1, width - 1), jm = std::max(j - 1, 0);
        const std::size_t row = k * plane + static_cast<std::size_t>(i) * width;
        f(k * plane + static_cast<std::size_t>(ip) * width + j, k * plane + static_cast<std::size_t>(im) * width + j);
        f(row + jp, row + jm);
        f(kp * plane + static_cast<std::size_t>(i) * width + j, km * plane + static_cast<std::size_t>(i) * width + j);
      }
    }
  }
}

std::uint32_t le32(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(x);
  return x;
}

void put_u32(std::ostream& os, std::uint32_t x) {
  x = le32(x);
  os.write(reinterpret_cast<const char*>(&x), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t x = 0;
  if (!is.read(reinterpret_cast<char*>(&x), 4)) throw InputError("truncated array file");
  return le32(x);
}

}  // namespace

double tv_norm(std::span<const double> x, int frames, int height, int width) {
  check_dims(x.size(), frames, height, width);
  double total = 0;
  for_each_difference(frames, height, width, [&](std::size_t a, std::size_t b) { total += std::abs(x[a] - x[b]); });
  return total;
}

double tv_norm_smooth(std::span<const double> x, int frames, int height, int width, double eps,
                      std::vector<double>* grad) {
  check_dims(x.size(), frames, height, width);
  if (grad) grad->resize(x.size(), 0.0);
  const double eps2 = eps * eps;
  double total = 0;
  for_each_difference(frames, height, width, [&](std::size_t a, std::size_t b) {
    const double g = x[a] - x[b];
    const double r = std::sqrt(g * g + eps2);
    total += r;
    if (grad && r > 0) {
      (*grad)[a] += g / r;
      (*grad)[b] -= g / r;
    }
  });
  return total;
}

std::string to_string(MapVariant v) { return v == MapVariant::fast_kl ? "fast_kl" : "full_elbo"; }

MapVariant map_variant_from_string(const std::string& name) {
  if (name == "fast_kl" || name == "fast") return MapVariant::fast_kl;
  if (name == "full_elbo" || name == "full") return MapVariant::full_elbo;
  throw ConfigError("unknown MAP variant: " + name);
}

void MapConfig::validate() const {
  if (steps < 0) throw ConfigError("MAP steps must be >= 0");
  if (!(step_size > 0)) throw ConfigError("MAP step size must be positive");
  if (!(tv_weight >= 0)) throw ConfigError("TV weight must be >= 0");
  if (!(tv_epsilon >= 0)) throw ConfigError("TV epsilon must be >= 0");
}

void to_json(nlohmann::json& j, const MapConfig& c) {
  j = {{"variant", to_string(c.variant)}, {"steps", c.steps},           {"step_size", c.step_size},
       {"tv_weight", c.tv_weight},       {"tv_epsilon", c.tv_epsilon}, {"noise_seed", c.noise_seed}};
  j["threshold"] = c.threshold ? nlohmann::json(*c.threshold) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, MapConfig& c) {
  c = MapConfig{};
  if (j.contains("variant")) c.variant = map_variant_from_string(j.at("variant").get<std::string>());
  c.steps = j.value("steps", c.steps);
  c.step_size = j.value("step_size", c.step_size);
  c.tv_weight = j.value("tv_weight", c.tv_weight);
  c.tv_epsilon = j.value("tv_epsilon", c.tv_epsilon);
  c.noise_seed = j.value("noise_seed", c.noise_seed);
  if (j.contains("threshold") && !j.at("threshold").is_null()) c.threshold = j.at("threshold").get<double>();
  c.validate();
}

double perturbation_score(std::span<const double> a, int frames) {
  if (frames < 1) throw InputError("perturbation needs at least one frame");
  double s = 0;
  for (double v : a) s += v * v;
  return s / frames;
}

std::vector<double> temporal_mean(std::span<const double> a, int frames, int height, int width) {
  check_dims(a.size(), frames, height, width);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::vector<double> m(plane, 0.0);
  for (int k = 0; k < frames; ++k)
    for (std::size_t q = 0; q < plane; ++q) m[q] += a[k * plane + q];
  for (double& v : m) v /= frames;
  return m;
}

AnomalyResult map_restore(const Model& model, const EchoClip& y, const MapConfig& cfg) {
  cfg.validate();
  const ModelConfig& c = model.config();
  if (y.frames_count != c.frames || y.height != c.height || y.width != c.width)
    throw InputError("clip is " + std::to_string(y.frames_count) + "x" + std::to_string(y.height) + "x" +
                     std::to_string(y.width) + " but the model expects " + std::to_string(c.frames) + "x" +
                     std::to_string(c.height) + "x" + std::to_string(c.width));
  const std::size_t n = y.frames.size();
  const EchoClip init = model.reconstruct(y);

  nn::ParameterSet<float> xs;
  xs.add("x", Shape{1, c.frames, c.height, c.width});
  std::copy(init.frames.begin(), init.frames.end(), xs[0].data.begin());
  auto grads = xs.zeros_like();
  nn::Adam<float> adam(xs, {.learning_rate = cfg.step_size});

  ObjectiveOptions opts;
  opts.input_grads = true;
  opts.kl_weight = 1.0;
  opts.reconstruction = cfg.variant == MapVariant::full_elbo;
  opts.sample = true;
  std::vector<float> noise(noise_size(c, 1));
  {
    Rng rng(derive_seed({cfg.noise_seed, 0x6d6170}));
    std::normal_distribution<float> normal;
    for (float& e : noise) e = normal(rng);
  }

  std::vector<double> diff(n), tv_grad;
  // Evaluates J at the current X; fills grads with d(-J)/dX when asked.
  auto objective = [&](bool want_grad) {
    for (std::size_t i = 0; i < n; ++i) diff[i] = static_cast<double>(y.frames[i]) - xs[0].data[i];
    tv_grad.assign(n, 0.0);
    const double tv =
        tv_norm_smooth(diff, c.frames, c.height, c.width, cfg.tv_epsilon, want_grad ? &tv_grad : nullptr);
    const auto res = negative_elbo(model.network(), model.params(), xs[0], noise, opts, nullptr);
    const double j = -cfg.tv_weight * tv - res.loss;
    if (want_grad)
      for (std::size_t i = 0; i < n; ++i)
        grads[0].data[i] = static_cast<float>(-cfg.tv_weight * tv_grad[i] + res.input_grad.data[i]);
    return j;
  };

  AnomalyResult out;
  out.frames = c.frames;
  out.height = c.height;
  out.width = c.width;
  AlignedVector<float> best = xs[0].data;
  double best_j = -INFINITY;
  const std::uint64_t calls_before = model.decoder_calls();
  for (int step = 0; step <= cfg.steps; ++step) {
    const bool last = step == cfg.steps;
    const double j = objective(!last);
    if (!std::isfinite(j)) {
      std::string tail;
      for (std::size_t k = out.trace.size() >= 5 ? out.trace.size() - 5 : 0; k < out.trace.size(); ++k)
        tail += " " + std::to_string(out.trace[k]);
      throw NumericalError("non-finite MAP objective at step " + std::to_string(step) + "; last values:" + tail);
    }
    out.trace.push_back(j);
    if (j > best_j) {
      best_j = j;
      best = xs[0].data;
      out.best_step = step;
    }
    out.best_trace.push_back(best_j);
    if (!last) adam.step(xs, grads);
  }
  out.loop_decoder_calls = model.decoder_calls() - calls_before;

  out.perturbation.resize(n);
  out.restored = EchoClip(c.frames, c.height, c.width, y.fps);
  out.restored.timestamps = y.timestamps;
  for (std::size_t i = 0; i < n; ++i) {
    out.perturbation[i] = static_cast<double>(y.frames[i]) - best[i];
    out.restored.frames[i] = std::clamp(best[i], 0.0f, 1.0f);
  }
  out.score = perturbation_score(out.perturbation, c.frames);
  out.heatmap = temporal_mean(out.perturbation, c.frames, c.height, c.width);
  if (cfg.threshold) out.anomalous = out.score > *cfg.threshold;
  return out;
}

std::vector<double> score_reconstruction(const Model& model, std::span<const EchoClip> clips) {
  const auto rec = model.reconstruct(clips);
  std::vector<double> scores;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    double s = 0;
    for (std::size_t k = 0; k < clips[i].frames.size(); ++k) {
      const double d = static_cast<double>(clips[i].frames[k]) - rec[i].frames[k];
      s += d * d;
    }
    scores.push_back(s / clips[i].frames_count);
  }
  return scores;
}

double score_reconstruction(const Model& model, const EchoClip& y) {
  return score_reconstruction(model, std::span(&y, 1)).front();
}

void write_heatmap_ppm(const fs::path& path, std::span<const double> heatmap, int height, int width, int scale) {
  check_dims(heatmap.size(), 1, height, width);
  if (scale < 1) throw InputError("heatmap scale must be >= 1");
  double limit = 0;
  for (double v : heatmap) limit = std::max(limit, std::abs(v));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  os << "P6\n" << width * scale << " " << height * scale << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(width) * scale * 3);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double t = limit > 0 ? std::clamp(heatmap[static_cast<std::size_t>(i) * width + j] / limit, -1.0, 1.0) : 0;
      // White at zero, red for positive, blue for negative.
      const auto fade = static_cast<unsigned char>(std::lround(255 * (1 - std::abs(t))));
      const unsigned char rgb[3] = {t < 0 ? fade : static_cast<unsigned char>(255), fade,
                                    t > 0 ? fade : static_cast<unsigned char>(255)};
      for (int s = 0; s < scale; ++s) std::copy(rgb, rgb + 3, row.begin() + (static_cast<std::size_t>(j) * scale + s) * 3);
    }
    for (int s = 0; s < scale; ++s) os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw InputError("failed writing " + path.string());
}

void write_array(const fs::path& path, std::span<const double> values, std::span<const int> dims) {
  std::size_t count = 1;
  for (int d : dims) {
    if (d < 0) throw InputError("negative array dimension");
    count *= static_cast<std::size_t>(d);
  }
  if (count != values.size()) throw InputError("array dimensions do not match the value count");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  os.write("TVAEARR1", 8);
  put_u32(os, static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) put_u32(os, static_cast<std::uint32_t>(d));
  for (double v : values) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!os) throw InputError("failed writing " + path.string());
}

std::vector<double> read_array(const fs::path& path, std::vector<int>* dims) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::string(magic, 8) != "TVAEARR1")
    throw InputError(path.string() + " is not a TVAEARR1 file");
  const std::uint32_t rank = get_u32(is);
  if (rank > 8) throw InputError(path.string() + ": implausible rank");
  std::vector<int> shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = static_cast<int>(get_u32(is));
    count *= static_cast<std::size_t>(d);
  }
  std::vector<double> values(count);
  for (double& v : values) v = std::bit_cast<float>(get_u32(is));
  if (is.peek() != std::char_traits<char>::eof()) throw InputError(path.string() + ": trailing bytes");
  if (dims) *dims = shape;
  return values;
}

void save_result(const fs::path& dir, const std::string& id, const AnomalyResult& r, const MapConfig& config) {
  fs::create_directories(dir);
  nlohmann::json j = {{"id", id},
                      {"score", r.score},
                      {"config", config},
                      {"best_step", r.best_step},
                      {"loop_decoder_calls", r.loop_decoder_calls},
                      {"trace", r.trace},
                      {"shape", {r.frames, r.height, r.width}}};
  if (r.anomalous) j["anomalous"] = *r.anomalous;
  std::ofstream(dir / (id + ".json")) << j.dump(2) << "\n";
  const int full[3] = {r.frames, r.height, r.width}, plane[2] = {r.height, r.width};
  write_array(dir / (id + ".perturbation.arr"), r.perturbation, full);
  write_array(dir / (id + ".heatmap.arr"), r.heatmap, plane);
  write_heatmap_ppm(dir / (id + ".heatmap.ppm"), r.heatmap, r.height, r.width);
}

}  // namespace tvae
