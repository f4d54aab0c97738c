#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tvae/trajectory.hpp"

namespace tvae {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Variant { tvae_c, tvae_r, tvae_s, tae_c, tae_r, tae_s, vae };

/// Source of the clip-level frequency and phase.
/// spectral: a least-squares sinusoid fit to the mean-intensity series, refined by the temporal head.
/// learned: the temporal head alone, through bounded squashes.
enum class TemporalEstimator { spectral, learned };
std::string to_string(TemporalEstimator e);
TemporalEstimator temporal_estimator_from_string(const std::string& name);

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

/// Frame-wise models encode each frame on its own; all others encode the whole clip.
bool is_framewise(Variant v);
/// Deterministic variants (TAE-*) use b = mu_b and drop the KL term.
bool is_variational(Variant v);
TrajectoryKind trajectory_kind(Variant v);

/// Per-sample augmentation ranges. Every draw is shared by all frames of a clip.
struct AugmentConfig {
  bool enabled = true;
  bool affine = true;
  double max_rotation_deg = 10.0;
  double max_translation = 0.05;  // fraction of the frame size
  double min_scale = 0.9;
  double max_scale = 1.1;
  bool brightness = true;
  double max_brightness = 0.1;
  bool gamma = true;
  double min_gamma = 0.8;
  double max_gamma = 1.25;
  bool blur = true;
  double max_blur_sigma = 1.0;
  bool salt_pepper = true;
  double max_salt_pepper_rate = 0.01;

  static AugmentConfig disabled();
};

struct ModelConfig {
  Variant variant = Variant::tvae_s;
  int latent_dim = 64;
  int frames = 25;
  int height = 128;
  int width = 128;
  double fps = 12.0;

  std::vector<int> encoder_widths{32, 64, 128, 256};
  int residual_blocks = 1;
  int hidden_units = 256;

  // Gaussian likelihood scale; the reconstruction term is SSE / (2 sigma^2).
  double likelihood_sigma = 1.0;
  double beta = 1.0;
  TemporalEstimator temporal_estimator = TemporalEstimator::spectral;
  // Frequency range in Hz. Spectral: the fit's search grid. Learned:
  // f = lo + (hi - lo) * sigmoid(raw + c), c chosen so raw = 0 gives frequency_init.
  double frequency_init = 1.5;
  double frequency_min = 0.5;
  double frequency_max = 3.0;
  double sigma_floor = 1e-4;

  double learning_rate = 1e-4;
  int steps = 5000;
  int batch_size = 64;
  int snapshot_every = 0;
  std::uint64_t seed = 0;

  AugmentConfig augment;

  /// Full-size configuration at 128x128.
  static ModelConfig defaults(Variant v);
  /// 32x32 configuration sized for single-core training on the synthetic benchmark.
  static ModelConfig desk(Variant v);
  /// T=5, 16x16, d=4; used for finite-difference checks.
  static ModelConfig miniature(Variant v);

  int input_channels() const { return is_framewise(variant) ? 1 : frames; }
  /// Latent parameters per clip: d+2, d+3 or T*d.
  std::size_t latent_parameter_count() const;
  void validate() const;
  bool same_architecture(const ModelConfig& other) const;
};

void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace tvae
