#include "tvae/network.hpp"

#include <cmath>
#include <numbers>

namespace tvae {
namespace {

template <typename T>
T softplus(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

template <typename T>
T logistic(T x) {
  return x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
constexpr T two_pi = T(2) * std::numbers::pi_v<T>;

// Spectral mode: f = f_fit * exp(kFrequencyRefine * raw).
constexpr double kFrequencyRefine = 0.1;

// Bounded frequency squash; raw = 0 lands on frequency_init.
template <typename T>
struct FrequencyMap {
  explicit FrequencyMap(const ModelConfig& c)
      : lo(static_cast<T>(c.frequency_min)),
        span(static_cast<T>(c.frequency_max - c.frequency_min)),
        shift(static_cast<T>(std::log((c.frequency_init - c.frequency_min) / (c.frequency_max - c.frequency_init)))) {}
  T lo, span, shift;
};

}  // namespace

double gaussian_kl(std::span<const double> mu, std::span<const double> sigma) {
  double kl = 0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    kl += 0.5 * (mu[i] * mu[i] + sigma[i] * sigma[i] - 1.0 - 2.0 * std::log(sigma[i]));
  return kl;
}

std::size_t noise_size(const ModelConfig& config, int batch) {
  const std::size_t items = is_framewise(config.variant) ? static_cast<std::size_t>(batch) * config.frames : batch;
  return items * config.latent_dim;
}

template <typename T>
Network<T>::Network(const ModelConfig& config, nn::ParameterSet<T>& layout) : config_(config) {
  using namespace nn;
  config_.validate();
  const auto& widths = config_.encoder_widths;
  const int stages = static_cast<int>(widths.size());
  const int h0 = config_.height >> stages;
  const int w0 = config_.width >> stages;
  const int d = config_.latent_dim;

  int prev = config_.input_channels();
  for (int s = 0; s < stages; ++s) {
    const std::string name = "encoder.stage" + std::to_string(s);
    trunk_.add(std::make_unique<Conv2d<T>>(layout, name + ".down", prev, widths[s], 3, 2, 1))
        .add(std::make_unique<LayerNorm<T>>(layout, name + ".norm", widths[s]))
        .add(std::make_unique<SiLU<T>>());
    for (int r = 0; r < config_.residual_blocks; ++r)
      trunk_.add(std::make_unique<ResidualBlock<T>>(layout, name + ".res" + std::to_string(r), widths[s]));
    prev = widths[s];
  }
  const int features = prev * h0 * w0;
  trunk_.add(std::make_unique<Reshape<T>>(features, 1, 1));

  spatial_head_.add(std::make_unique<Linear<T>>(layout, "encoder.spatial.hidden", features, config_.hidden_units))
      .add(std::make_unique<SiLU<T>>())
      .add(std::make_unique<Linear<T>>(layout, "encoder.spatial.out", config_.hidden_units, 2 * d));
  if (!is_framewise(config_.variant)) {
    temporal_head_.add(std::make_unique<Linear<T>>(layout, "encoder.temporal.hidden", features, config_.hidden_units))
        .add(std::make_unique<SiLU<T>>());
    temporal_head_.add(std::make_unique<Linear<T>>(layout, "encoder.temporal.out", config_.hidden_units, 3));
  }

  if (!is_framewise(config_.variant) && config_.temporal_estimator == TemporalEstimator::spectral)
    phase_ = std::make_unique<PhaseEstimator>(config_.frames, config_.fps, config_.frequency_min,
                                              config_.frequency_max);

  decoder_.add(std::make_unique<Linear<T>>(layout, "decoder.input", d, widths.back() * h0 * w0))
      .add(std::make_unique<SiLU<T>>())
      .add(std::make_unique<Reshape<T>>(widths.back(), h0, w0));
  for (int s = stages - 1; s >= 0; --s) {
    const std::string name = "decoder.stage" + std::to_string(stages - 1 - s);
    const int out = s > 0 ? widths[s - 1] : widths[0];
    decoder_.add(std::make_unique<ConvTranspose2d<T>>(layout, name + ".up", widths[s], out, 4, 2, 1))
        .add(std::make_unique<LayerNorm<T>>(layout, name + ".norm", out))
        .add(std::make_unique<SiLU<T>>());
  }
  decoder_.add(std::make_unique<Conv2d<T>>(layout, "decoder.output", widths[0], 1, 3, 1, 1))
      .add(std::make_unique<Sigmoid<T>>());
}

template <typename T>
void Network<T>::initialize(nn::ParameterSet<T>& p, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  trunk_.initialize(p, rng);
  spatial_head_.initialize(p, rng);
  temporal_head_.initialize(p, rng);
  decoder_.initialize(p, rng);
  // Spectral mode starts exactly at the fitted frequency and phase.
  if (phase_) {
    p[p.index_of("encoder.temporal.out.weight")].data.assign(p[p.index_of("encoder.temporal.out.weight")].size(), T(0));
    p[p.index_of("encoder.temporal.out.bias")].data.assign(p[p.index_of("encoder.temporal.out.bias")].size(), T(0));
  }
}

template <typename T>
LatentBatch<T> Network<T>::encode(const nn::ParameterSet<T>& p, const Tensor<T>& input, EncoderPass* pass) const {
  const ModelConfig& c = config_;
  const Shape clip_shape{input.shape.n, c.frames, c.height, c.width};
  if (!(input.shape == clip_shape)) throw InputError("encoder input " + input.shape.str() + " does not match config");
  const bool framewise = is_framewise(c.variant);
  const Tensor<T> view =
      framewise ? input.reshaped(Shape{input.shape.n * c.frames, 1, c.height, c.width}) : input;

  EncoderPass local;
  EncoderPass& ps = pass ? *pass : local;
  const Tensor<T> features = trunk_.forward(p, view, pass ? &ps.trunk : nullptr);
  ps.spatial_raw = spatial_head_.forward(p, features, pass ? &ps.spatial : nullptr);
  if (!framewise) ps.temporal_raw = temporal_head_.forward(p, features, pass ? &ps.temporal : nullptr);

  const int d = c.latent_dim;
  LatentBatch<T> out;
  out.items = view.shape.n;
  out.dim = d;
  out.mu.resize(static_cast<std::size_t>(out.items) * d);
  out.sigma.resize(out.mu.size());
  const T floor = static_cast<T>(c.sigma_floor);
  for (int i = 0; i < out.items; ++i) {
    const T* raw = ps.spatial_raw.sample(i);
    for (int k = 0; k < d; ++k) {
      out.mu[i * d + k] = raw[k];
      out.sigma[i * d + k] = softplus(raw[d + k]) + floor;
    }
  }
  if (!framewise) {
    const FrequencyMap<T> fm(c);
    const bool spiral = trajectory_kind(c.variant) == TrajectoryKind::spiral;
    out.f.resize(out.items);
    out.omega.resize(out.items);
    out.v.resize(out.items);
    ps.phase.clear();
    const std::size_t plane = static_cast<std::size_t>(c.height) * c.width;
    std::vector<double> series(c.frames);
    for (int i = 0; i < out.items; ++i) {
      const T* raw = ps.temporal_raw.sample(i);
      if (phase_) {
        const T* x = input.sample(i);
        for (int j = 0; j < c.frames; ++j) {
          double acc = 0;
          for (std::size_t q = 0; q < plane; ++q) acc += x[j * plane + q];
          series[j] = acc / static_cast<double>(plane);
        }
        const PhaseEstimate e = phase_->estimate(series);
        ps.phase.push_back(e);
        out.f[i] = static_cast<T>(e.f) * std::exp(T(kFrequencyRefine) * raw[0]);
        out.omega[i] = static_cast<T>(reduce_phase(e.omega + static_cast<double>(raw[1])));
      } else {
        out.f[i] = fm.lo + fm.span * logistic(raw[0] + fm.shift);
        out.omega[i] = two_pi<T> * logistic(raw[1]);
      }
      out.v[i] = spiral ? raw[2] : T(0);
    }
  }
  return out;
}

template <typename T>
Tensor<T> Network<T>::encode_backward(const nn::ParameterSet<T>& p, const EncoderPass& pass,
                                      const LatentBatch<T>& latents, const LatentBatch<T>& dl,
                                      nn::ParameterSet<T>* grads, bool want_input) const {
  const ModelConfig& c = config_;
  const int d = c.latent_dim;
  const bool framewise = is_framewise(c.variant);
  Tensor<T> d_spatial(pass.spatial_raw.shape);
  for (int i = 0; i < latents.items; ++i) {
    const T* raw = pass.spatial_raw.sample(i);
    T* g = d_spatial.sample(i);
    for (int k = 0; k < d; ++k) {
      g[k] = dl.mu[i * d + k];
      g[d + k] = dl.sigma[i * d + k] * logistic(raw[d + k]);
    }
  }
  Tensor<T> d_features = spatial_head_.backward(p, pass.spatial, d_spatial, grads);
  if (!framewise) {
    const FrequencyMap<T> fm(c);
    const bool spiral = trajectory_kind(c.variant) == TrajectoryKind::spiral;
    Tensor<T> d_temporal(pass.temporal_raw.shape);
    for (int i = 0; i < latents.items; ++i) {
      const T* raw = pass.temporal_raw.sample(i);
      T* g = d_temporal.sample(i);
      if (phase_) {
        g[0] = dl.f[i] * latents.f[i] * T(kFrequencyRefine);
        g[1] = dl.omega[i];
      } else {
        const T s0 = logistic(raw[0] + fm.shift);
        const T s1 = logistic(raw[1]);
        g[0] = dl.f[i] * fm.span * s0 * (T(1) - s0);
        g[1] = dl.omega[i] * two_pi<T> * s1 * (T(1) - s1);
      }
      g[2] = spiral ? dl.v[i] : T(0);
    }
    Tensor<T> dt = temporal_head_.backward(p, pass.temporal, d_temporal, grads);
    for (std::size_t i = 0; i < dt.size(); ++i) d_features.data[i] += dt.data[i];
  }
  Tensor<T> d_input = trunk_.backward(p, pass.trunk, d_features, grads);
  if (!want_input) return {};
  d_input = std::move(d_input).reshaped(Shape{d_input.shape.n / (framewise ? c.frames : 1), c.frames, c.height, c.width});
  if (phase_) {
    // omega depends on the frame means through the fitted sinusoid; f is piecewise constant.
    const std::size_t plane = static_cast<std::size_t>(c.height) * c.width;
    for (int i = 0; i < latents.items; ++i) {
      const std::vector<double> gm = phase_->omega_gradient(pass.phase[i]);
      T* dx = d_input.sample(i);
      for (int j = 0; j < c.frames; ++j) {
        const T gj = static_cast<T>(dl.omega[i] * gm[j] / static_cast<double>(plane));
        for (std::size_t q = 0; q < plane; ++q) dx[j * plane + q] += gj;
      }
    }
  }
  return d_input;
}

template <typename T>
Tensor<T> Network<T>::decode(const nn::ParameterSet<T>& p, const Tensor<T>& z, nn::Cache<T>* cache) const {
  if (static_cast<int>(z.shape.per_sample()) != config_.latent_dim)
    throw DimensionError("latent point has dimension " + std::to_string(z.shape.per_sample()) + ", expected " +
                         std::to_string(config_.latent_dim));
  ++decoder_calls_;
  return decoder_.forward(p, z, cache);
}

template <typename T>
Tensor<T> Network<T>::decode_backward(const nn::ParameterSet<T>& p, const nn::Cache<T>& cache,
                                      const Tensor<T>& dframes, nn::ParameterSet<T>* grads) const {
  return decoder_.backward(p, cache, dframes, grads);
}

template <typename T>
Tensor<T> trajectory_points(const ModelConfig& c, const LatentBatch<T>& lat, const std::vector<T>& noise,
                            bool sample) {
  const int d = c.latent_dim;
  const bool use_noise = sample && is_variational(c.variant);
  if (use_noise && noise.size() < lat.mu.size()) throw std::invalid_argument("not enough reparameterization noise");
  if (is_framewise(c.variant)) {
    Tensor<T> z(Shape{lat.items, d, 1, 1});
    for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = lat.mu[i] + (use_noise ? lat.sigma[i] * noise[i] : T(0));
    return z;
  }
  const TrajectoryKind kind = trajectory_kind(c.variant);
  Tensor<T> z(Shape{lat.items * c.frames, d, 1, 1});
  std::vector<T> b(d);
  for (int i = 0; i < lat.items; ++i) {
    for (int k = 0; k < d; ++k) {
      const std::size_t idx = static_cast<std::size_t>(i) * d + k;
      b[k] = lat.mu[idx] + (use_noise ? lat.sigma[idx] * noise[idx] : T(0));
    }
    for (int j = 0; j < c.frames; ++j) {
      const T t = static_cast<T>(j / c.fps);
      detail::trajectory_point(kind, t, lat.f[i], lat.omega[i], lat.v[i], b.data(), d,
                               z.sample(i * c.frames + j));
    }
  }
  return z;
}

template <typename T>
ObjectiveResult<T> negative_elbo(const Network<T>& net, const nn::ParameterSet<T>& p, const Tensor<T>& input,
                                 const std::vector<T>& noise, const ObjectiveOptions& opts,
                                 std::type_identity_t<nn::ParameterSet<T>>* grads) {
  const ModelConfig& c = net.config();
  const int d = c.latent_dim;
  const bool variational = is_variational(c.variant);
  const bool framewise = is_framewise(c.variant);
  const bool use_noise = opts.sample && variational;
  const bool backward = opts.param_grads || opts.input_grads;
  const T kl_weight = variational ? static_cast<T>(opts.kl_weight) : T(0);
  const T inv_var = static_cast<T>(1.0 / (c.likelihood_sigma * c.likelihood_sigma));

  typename Network<T>::EncoderPass pass;
  ObjectiveResult<T> res;
  res.latents = net.encode(p, input, backward ? &pass : nullptr);
  const LatentBatch<T>& lat = res.latents;

  LatentBatch<T> dl;
  dl.items = lat.items;
  dl.dim = d;
  dl.mu.assign(lat.mu.size(), T(0));
  dl.sigma.assign(lat.sigma.size(), T(0));
  dl.f.assign(lat.f.size(), T(0));
  dl.omega.assign(lat.omega.size(), T(0));
  dl.v.assign(lat.v.size(), T(0));

  if (variational) {
    for (std::size_t i = 0; i < lat.mu.size(); ++i) {
      const double m = lat.mu[i], s = lat.sigma[i];
      res.kl += 0.5 * (m * m + s * s - 1.0 - 2.0 * std::log(s));
      dl.mu[i] += kl_weight * lat.mu[i];
      dl.sigma[i] += kl_weight * (lat.sigma[i] - T(1) / lat.sigma[i]);
    }
  }

  Tensor<T> d_input_direct;
  if (opts.reconstruction) {
    const Tensor<T> z = trajectory_points(c, lat, noise, opts.sample);
    nn::Cache<T> dec_cache;
    Tensor<T> frames = net.decode(p, z, backward ? &dec_cache : nullptr);
    res.reconstruction = std::move(frames).reshaped(input.shape);
    Tensor<T> dframes(res.reconstruction.shape);
    double sse = 0;
    for (std::size_t i = 0; i < input.size(); ++i) {
      const T diff = res.reconstruction.data[i] - input.data[i];
      sse += static_cast<double>(diff) * diff;
      dframes.data[i] = diff * inv_var;
    }
    res.sse = sse;
    if (backward) {
      if (opts.input_grads) {
        d_input_direct = Tensor<T>(input.shape);
        for (std::size_t i = 0; i < input.size(); ++i) d_input_direct.data[i] = -dframes.data[i];
      }
      const Tensor<T> dz = net.decode_backward(p, dec_cache, dframes.reshaped(Shape{input.shape.n * c.frames, 1, c.height, c.width}),
                                               opts.param_grads ? grads : nullptr);
      if (framewise) {
        for (std::size_t i = 0; i < dz.size(); ++i) {
          dl.mu[i] += dz.data[i];
          if (use_noise) dl.sigma[i] += dz.data[i] * noise[i];
        }
      } else {
        const TrajectoryKind kind = trajectory_kind(c.variant);
        std::vector<T> db(d);
        for (int i = 0; i < lat.items; ++i) {
          std::fill(db.begin(), db.end(), T(0));
          for (int j = 0; j < c.frames; ++j) {
            const T t = static_cast<T>(j / c.fps);
            detail::trajectory_point_backward(kind, t, lat.f[i], lat.omega[i], static_cast<std::size_t>(d),
                                              dz.sample(i * c.frames + j), dl.f[i], dl.omega[i], dl.v[i], db.data());
          }
          for (int k = 0; k < d; ++k) {
            const std::size_t idx = static_cast<std::size_t>(i) * d + k;
            dl.mu[idx] += db[k];
            if (use_noise) dl.sigma[idx] += db[k] * noise[idx];
          }
        }
      }
    }
  }
  res.loss = 0.5 * static_cast<double>(inv_var) * res.sse + static_cast<double>(kl_weight) * res.kl;

  if (backward) {
    res.input_grad = net.encode_backward(p, pass, lat, dl, opts.param_grads ? grads : nullptr, opts.input_grads);
    if (opts.input_grads && !d_input_direct.data.empty())
      for (std::size_t i = 0; i < d_input_direct.size(); ++i) res.input_grad.data[i] += d_input_direct.data[i];
  }
  return res;
}

template class Network<float>;
template class Network<double>;
template Tensor<float> trajectory_points(const ModelConfig&, const LatentBatch<float>&, const std::vector<float>&, bool);
template Tensor<double> trajectory_points(const ModelConfig&, const LatentBatch<double>&, const std::vector<double>&,
                                          bool);
template ObjectiveResult<float> negative_elbo(const Network<float>&, const nn::ParameterSet<float>&,
                                              const Tensor<float>&, const std::vector<float>&, const ObjectiveOptions&,
                                              nn::ParameterSet<float>*);
template ObjectiveResult<double> negative_elbo(const Network<double>&, const nn::ParameterSet<double>&,
                                               const Tensor<double>&, const std::vector<double>&,
                                               const ObjectiveOptions&, nn::ParameterSet<double>*);

}  // namespace tvae
