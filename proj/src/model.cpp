#include "tvae/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tvae {

void to_json(nlohmann::json& j, const EmpiricalRanges& r) {
  j = {{"valid", r.valid},     {"f_min", r.f_min}, {"f_max", r.f_max},     {"omega_min", r.omega_min},
       {"omega_max", r.omega_max}, {"v_min", r.v_min}, {"v_max", r.v_max}, {"mu_mean", r.mu_mean},
       {"mu_std", r.mu_std}};
}

void from_json(const nlohmann::json& j, EmpiricalRanges& r) {
  r.valid = j.value("valid", false);
  r.f_min = j.value("f_min", r.f_min);
  r.f_max = j.value("f_max", r.f_max);
  r.omega_min = j.value("omega_min", r.omega_min);
  r.omega_max = j.value("omega_max", r.omega_max);
  r.v_min = j.value("v_min", r.v_min);
  r.v_max = j.value("v_max", r.v_max);
  r.mu_mean = j.value("mu_mean", std::vector<double>{});
  r.mu_std = j.value("mu_std", std::vector<double>{});
}

Tensor<float> stack_clips(std::span<const EchoClip> clips, const ModelConfig& c) {
  Tensor<float> t(Shape{static_cast<int>(clips.size()), c.frames, c.height, c.width});
  const std::size_t per = t.shape.per_sample();
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const EchoClip& clip = clips[i];
    if (clip.frames_count != c.frames || clip.height != c.height || clip.width != c.width)
      throw InputError("clip is " + std::to_string(clip.frames_count) + "x" + std::to_string(clip.height) + "x" +
                       std::to_string(clip.width) + ", model expects " + std::to_string(c.frames) + "x" +
                       std::to_string(c.height) + "x" + std::to_string(c.width));
    std::copy(clip.frames.begin(), clip.frames.end(), t.data.begin() + i * per);
  }
  return t;
}

EchoClip unstack_clip(const Tensor<float>& t, int i, double fps) {
  EchoClip clip(t.shape.c, t.shape.h, t.shape.w, fps);
  std::copy(t.sample(i), t.sample(i) + t.shape.per_sample(), clip.frames.begin());
  return clip;
}

Model::Model(const ModelConfig& config) {
  net_ = std::make_unique<Network<float>>(config, params_);
  net_->initialize(params_, config.seed);
}

Model::Model(const ModelConfig& config, const nn::ParameterSet<float>& params) {
  net_ = std::make_unique<Network<float>>(config, params_);
  if (params.count() != params_.count())
    throw CheckpointError("parameter count " + std::to_string(params.count()) + " does not match architecture (" +
                          std::to_string(params_.count()) + ")");
  for (std::size_t i = 0; i < params_.count(); ++i) {
    if (params.name(i) != params_.name(i) || !(params[i].shape == params_[i].shape))
      throw CheckpointError("parameter '" + params.name(i) + "' " + params[i].shape.str() + " does not match '" +
                            params_.name(i) + "' " + params_[i].shape.str());
    params_[i] = params[i];
  }
}

namespace {

std::vector<ClipLatent> to_latents(const ModelConfig& c, const LatentBatch<float>& lat) {
  const bool framewise = is_framewise(c.variant);
  const int per = framewise ? c.frames * c.latent_dim : c.latent_dim;
  const int clips = framewise ? lat.items / c.frames : lat.items;
  std::vector<ClipLatent> out(clips);
  for (int i = 0; i < clips; ++i) {
    ClipLatent& l = out[i];
    l.mu.assign(lat.mu.begin() + i * per, lat.mu.begin() + (i + 1) * per);
    l.sigma.assign(lat.sigma.begin() + i * per, lat.sigma.begin() + (i + 1) * per);
    if (!framewise) {
      l.f = lat.f[i];
      l.omega = lat.omega[i];
      l.v = lat.v[i];
    }
  }
  return out;
}

template <typename F>
void for_chunks(std::size_t n, std::size_t chunk, F&& fn) {
  for (std::size_t lo = 0; lo < n; lo += chunk) fn(lo, std::min(n, lo + chunk));
}

}  // namespace

std::vector<ClipLatent> Model::encode(std::span<const EchoClip> clips) const {
  std::vector<ClipLatent> out;
  for_chunks(clips.size(), static_cast<std::size_t>(config().batch_size), [&](std::size_t lo, std::size_t hi) {
    const Tensor<float> x = stack_clips(clips.subspan(lo, hi - lo), config());
    auto part = to_latents(config(), net_->encode(params_, x, nullptr));
    out.insert(out.end(), part.begin(), part.end());
  });
  return out;
}

ClipLatent Model::encode(const EchoClip& clip) const { return encode(std::span(&clip, 1)).front(); }

std::vector<EchoClip> Model::reconstruct(std::span<const EchoClip> clips) const {
  std::vector<EchoClip> out;
  ObjectiveOptions opts;
  opts.sample = false;
  for_chunks(clips.size(), static_cast<std::size_t>(config().batch_size), [&](std::size_t lo, std::size_t hi) {
    const Tensor<float> x = stack_clips(clips.subspan(lo, hi - lo), config());
    const auto res = negative_elbo(*net_, params_, x, {}, opts);
    for (std::size_t i = lo; i < hi; ++i) {
      out.push_back(unstack_clip(res.reconstruction, static_cast<int>(i - lo), clips[i].fps));
      out.back().timestamps = clips[i].timestamps;
    }
  });
  return out;
}

EchoClip Model::reconstruct(const EchoClip& clip) const { return reconstruct(std::span(&clip, 1)).front(); }

EchoClip Model::decode(const TrajectoryParams& traj, std::span<const double> timestamps, double fps) const {
  const ModelConfig& c = config();
  if (is_framewise(c.variant)) throw ConfigError("the frame-wise VAE has no trajectory to decode");
  if (static_cast<int>(traj.dim()) != c.latent_dim)
    throw DimensionError("trajectory has dimension " + std::to_string(traj.dim()) + ", model uses " +
                         std::to_string(c.latent_dim));
  const auto points = eval_trajectory(trajectory_kind(c.variant), timestamps, traj);
  Tensor<float> z(Shape{static_cast<int>(points.size()), c.latent_dim, 1, 1});
  for (std::size_t j = 0; j < points.size(); ++j)
    std::transform(points[j].begin(), points[j].end(), z.sample(static_cast<int>(j)),
                   [](double v) { return static_cast<float>(v); });
  const Tensor<float> frames = net_->decode(params_, z, nullptr);
  EchoClip clip(static_cast<int>(points.size()), c.height, c.width, fps);
  std::copy(frames.data.begin(), frames.data.end(), clip.frames.begin());
  clip.timestamps.assign(timestamps.begin(), timestamps.end());
  return clip;
}

std::vector<EchoClip> Model::generate(int count, std::uint64_t seed) const {
  const ModelConfig& c = config();
  const int d = c.latent_dim;
  std::vector<EchoClip> out;
  std::normal_distribution<double> normal;
  const auto times = uniform_timestamps(c.frames, c.fps);
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(i)}));
    if (is_framewise(c.variant)) {
      Tensor<float> z(Shape{c.frames, d, 1, 1});
      for (float& v : z.data) v = static_cast<float>(normal(rng));
      const Tensor<float> frames = net_->decode(params_, z, nullptr);
      EchoClip clip(c.frames, c.height, c.width, c.fps);
      std::copy(frames.data.begin(), frames.data.end(), clip.frames.begin());
      out.push_back(std::move(clip));
      continue;
    }
    std::vector<double> b(d);
    const bool fitted = !is_variational(c.variant) && ranges.mu_mean.size() == static_cast<std::size_t>(d);
    for (int k = 0; k < d; ++k) {
      const double e = normal(rng);
      b[k] = fitted ? ranges.mu_mean[k] + ranges.mu_std[k] * e : e;
    }
    const double f = uniform(rng, ranges.f_min, std::nextafter(ranges.f_max, INFINITY));
    const double omega = uniform(rng, ranges.omega_min, std::nextafter(ranges.omega_max, INFINITY));
    const double v = uniform(rng, ranges.v_min, std::nextafter(ranges.v_max, INFINITY));
    out.push_back(decode(TrajectoryParams(f, omega, v, b), times, c.fps));
  }
  return out;
}

EmpiricalRanges fit_ranges(const Model& model, std::span<const EchoClip> clips) {
  EmpiricalRanges r;
  if (clips.empty()) return r;
  const auto lat = model.encode(clips);
  const std::size_t per = lat.front().mu.size();
  r.valid = true;
  r.f_min = r.omega_min = r.v_min = INFINITY;
  r.f_max = r.omega_max = r.v_max = -INFINITY;
  r.mu_mean.assign(per, 0.0);
  r.mu_std.assign(per, 0.0);
  for (const auto& l : lat) {
    r.f_min = std::min(r.f_min, l.f), r.f_max = std::max(r.f_max, l.f);
    r.omega_min = std::min(r.omega_min, l.omega), r.omega_max = std::max(r.omega_max, l.omega);
    r.v_min = std::min(r.v_min, l.v), r.v_max = std::max(r.v_max, l.v);
    for (std::size_t k = 0; k < per; ++k) r.mu_mean[k] += l.mu[k] / lat.size();
  }
  for (const auto& l : lat)
    for (std::size_t k = 0; k < per; ++k) r.mu_std[k] += std::pow(l.mu[k] - r.mu_mean[k], 2) / lat.size();
  for (double& s : r.mu_std) s = std::sqrt(s);
  return r;
}

std::vector<EchoClip> leading_clips(const std::vector<Video>& videos, const ModelConfig& c) {
  std::vector<EchoClip> out;
  out.reserve(videos.size());
  for (const Video& v : videos) out.push_back(extract_clip(v, 0, c.frames, c.fps));
  return out;
}

}  // namespace tvae
