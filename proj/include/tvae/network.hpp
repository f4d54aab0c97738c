#pragma once

// Encoder/decoder graph and the differentiable ELBO for every model variant.
//
// Trajectory variants stack the T frames of a clip as input channels and emit
// one (mu_b, sigma_b, f, omega[, v]) per clip; the frame-wise VAE encodes each
// frame as a one-channel image. Both decode frame by frame.

#include <atomic>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "tvae/clip.hpp"
#include "tvae/config.hpp"
#include "tvae/nn.hpp"
#include "tvae/spectral.hpp"

namespace tvae {

/// Latent parameters after the positivity/phase transforms, one row per
/// encoded item (clip for trajectory models, frame for the frame-wise VAE).
template <typename T>
struct LatentBatch {
  int items = 0;
  int dim = 0;
  std::vector<T> mu;     // items x dim
  std::vector<T> sigma;  // items x dim
  std::vector<T> f;      // items (trajectory models only)
  std::vector<T> omega;
  std::vector<T> v;
};

template <typename T>
class Network {
 public:
  Network(const ModelConfig& config, nn::ParameterSet<T>& layout);

  struct EncoderPass {
    nn::Cache<T> trunk, spatial, temporal;
    Tensor<T> spatial_raw, temporal_raw;
    std::vector<PhaseEstimate> phase;
  };

  /// `input` is (B, T, H, W) viewed as B clips; the frame-wise model reads it as B*T frames.
  LatentBatch<T> encode(const nn::ParameterSet<T>& p, const Tensor<T>& input, EncoderPass* pass) const;
  /// Back-propagates gradients w.r.t. the transformed latents; returns dL/d(input).
  Tensor<T> encode_backward(const nn::ParameterSet<T>& p, const EncoderPass& pass, const LatentBatch<T>& latents,
                            const LatentBatch<T>& d_latents, nn::ParameterSet<T>* grads, bool want_input) const;

  /// (N, d, 1, 1) latent points -> (N, 1, H, W) frames in (0, 1).
  Tensor<T> decode(const nn::ParameterSet<T>& p, const Tensor<T>& z, nn::Cache<T>* cache) const;
  Tensor<T> decode_backward(const nn::ParameterSet<T>& p, const nn::Cache<T>& cache, const Tensor<T>& dframes,
                            nn::ParameterSet<T>* grads) const;

  void initialize(nn::ParameterSet<T>& p, std::uint64_t seed) const;
  const ModelConfig& config() const { return config_; }
  /// Number of decode() invocations so far.
  std::uint64_t decoder_calls() const { return decoder_calls_.load(); }

 private:
  ModelConfig config_;
  nn::Sequential<T> trunk_;
  nn::Sequential<T> spatial_head_;
  nn::Sequential<T> temporal_head_;
  nn::Sequential<T> decoder_;
  std::unique_ptr<PhaseEstimator> phase_;  // spectral temporal estimator
  mutable std::atomic<std::uint64_t> decoder_calls_{0};
};

/// Options for one ELBO evaluation on a batch.
struct ObjectiveOptions {
  bool sample = true;            // reparameterize b (ignored by deterministic variants)
  bool reconstruction = true;    // false: KL term only, decoder never runs
  double kl_weight = 1.0;
  bool param_grads = false;
  bool input_grads = false;
};

template <typename T>
struct ObjectiveResult {
  double sse = 0;             // summed squared reconstruction error
  double kl = 0;              // summed closed-form KL over the batch
  double loss = 0;            // sse / (2 sigma^2) + kl_weight * kl
  Tensor<T> reconstruction;   // (B, T, H, W) when the decoder ran
  Tensor<T> input_grad;       // dloss/dinput when requested
  LatentBatch<T> latents;
};

/// Negative ELBO of `input` (B, T, H, W) against itself. `noise` holds one
/// standard-normal draw per spatial latent entry (B*d, or B*T*d frame-wise)
/// and is ignored when sampling is off.
template <typename T>
ObjectiveResult<T> negative_elbo(const Network<T>& net, const nn::ParameterSet<T>& p, const Tensor<T>& input,
                                 const std::vector<T>& noise, const ObjectiveOptions& opts,
                                 std::type_identity_t<nn::ParameterSet<T>>* grads = nullptr);

/// Latent points along each item's trajectory: (B*T, d, 1, 1).
template <typename T>
Tensor<T> trajectory_points(const ModelConfig& config, const LatentBatch<T>& latents, const std::vector<T>& noise,
                            bool sample);

/// KL[N(mu, diag sigma^2) || N(0, I)] summed over a vector.
double gaussian_kl(std::span<const double> mu, std::span<const double> sigma);

std::size_t noise_size(const ModelConfig& config, int batch);

}  // namespace tvae
