#include "tvae/config.hpp"

namespace tvae {

std::string to_string(TemporalEstimator e) { return e == TemporalEstimator::spectral ? "spectral" : "learned"; }

TemporalEstimator temporal_estimator_from_string(const std::string& name) {
  if (name == "spectral") return TemporalEstimator::spectral;
  if (name == "learned") return TemporalEstimator::learned;
  throw ConfigError("unknown temporal_estimator: " + name);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::tvae_c: return "tvae-c";
    case Variant::tvae_r: return "tvae-r";
    case Variant::tvae_s: return "tvae-s";
    case Variant::tae_c: return "tae-c";
    case Variant::tae_r: return "tae-r";
    case Variant::tae_s: return "tae-s";
    case Variant::vae: return "vae";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  for (Variant v : {Variant::tvae_c, Variant::tvae_r, Variant::tvae_s, Variant::tae_c, Variant::tae_r, Variant::tae_s,
                    Variant::vae})
    if (to_string(v) == name) return v;
  throw ConfigError("unknown model variant: " + name);
}

bool is_framewise(Variant v) { return v == Variant::vae; }

bool is_variational(Variant v) { return v != Variant::tae_c && v != Variant::tae_r && v != Variant::tae_s; }

TrajectoryKind trajectory_kind(Variant v) {
  switch (v) {
    case Variant::tvae_c:
    case Variant::tae_c: return TrajectoryKind::circular;
    case Variant::tvae_s:
    case Variant::tae_s: return TrajectoryKind::spiral;
    default: return TrajectoryKind::rotated;
  }
}

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig c;
  c.enabled = false;
  return c;
}

ModelConfig ModelConfig::defaults(Variant v) {
  ModelConfig c;
  c.variant = v;
  if (is_framewise(v)) c.batch_size = 128;
  return c;
}

ModelConfig ModelConfig::desk(Variant v) {
  ModelConfig c = defaults(v);
  c.latent_dim = 16;
  c.height = 32;
  c.width = 32;
  c.encoder_widths = {16, 32, 64};
  c.hidden_units = 64;
  c.learning_rate = 1e-3;
  c.batch_size = 8;
  c.steps = 1500;
  // Within this step budget augmentation costs more fidelity than it buys on the synthetic benchmark.
  c.augment = AugmentConfig::disabled();
  return c;
}

ModelConfig ModelConfig::miniature(Variant v) {
  ModelConfig c = defaults(v);
  c.latent_dim = 4;
  c.frames = 5;
  c.height = 16;
  c.width = 16;
  c.encoder_widths = {4, 6};
  c.hidden_units = 8;
  c.batch_size = 2;
  c.steps = 50;
  c.augment = AugmentConfig::disabled();
  return c;
}

std::size_t ModelConfig::latent_parameter_count() const {
  if (is_framewise(variant)) return static_cast<std::size_t>(frames) * latent_dim;
  return trajectory_parameter_count(trajectory_kind(variant), latent_dim);
}

void ModelConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (trajectory_kind(variant) == TrajectoryKind::circular && !is_framewise(variant) && latent_dim < 2)
    throw ConfigError("circular trajectories need latent_dim >= 2");
  if (frames < 1 || height < 1 || width < 1) throw ConfigError("clip shape must be positive");
  if (!(fps > 0)) throw ConfigError("fps must be positive");
  if (encoder_widths.empty()) throw ConfigError("encoder_widths must not be empty");
  const int factor = 1 << encoder_widths.size();
  if (height % factor != 0 || width % factor != 0)
    throw ConfigError("frame size must be divisible by 2^(number of encoder stages)");
  for (int w : encoder_widths)
    if (w < 1) throw ConfigError("encoder widths must be positive");
  if (residual_blocks < 0 || hidden_units < 1) throw ConfigError("invalid residual_blocks/hidden_units");
  if (!(likelihood_sigma > 0) || beta < 0) throw ConfigError("likelihood_sigma must be > 0 and beta >= 0");
  if (!(sigma_floor > 0)) throw ConfigError("sigma_floor must be > 0");
  if (!(frequency_min > 0) || !(frequency_min < frequency_init) || !(frequency_init < frequency_max))
    throw ConfigError("frequency range must satisfy 0 < frequency_min < frequency_init < frequency_max");
  if (!(learning_rate > 0) || steps < 0 || batch_size < 1) throw ConfigError("invalid optimizer settings");
}

bool ModelConfig::same_architecture(const ModelConfig& o) const {
  return variant == o.variant && latent_dim == o.latent_dim && frames == o.frames && height == o.height &&
         width == o.width && encoder_widths == o.encoder_widths && residual_blocks == o.residual_blocks &&
         hidden_units == o.hidden_units;
}

void to_json(nlohmann::json& j, const AugmentConfig& c) {
  j = {{"enabled", c.enabled},
       {"affine", c.affine},
       {"max_rotation_deg", c.max_rotation_deg},
       {"max_translation", c.max_translation},
       {"min_scale", c.min_scale},
       {"max_scale", c.max_scale},
       {"brightness", c.brightness},
       {"max_brightness", c.max_brightness},
       {"gamma", c.gamma},
       {"min_gamma", c.min_gamma},
       {"max_gamma", c.max_gamma},
       {"blur", c.blur},
       {"max_blur_sigma", c.max_blur_sigma},
       {"salt_pepper", c.salt_pepper},
       {"max_salt_pepper_rate", c.max_salt_pepper_rate}};
}

namespace {
template <typename V>
void read_opt(const nlohmann::json& j, const char* key, V& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}
}  // namespace

void from_json(const nlohmann::json& j, AugmentConfig& c) {
  read_opt(j, "enabled", c.enabled);
  read_opt(j, "affine", c.affine);
  read_opt(j, "max_rotation_deg", c.max_rotation_deg);
  read_opt(j, "max_translation", c.max_translation);
  read_opt(j, "min_scale", c.min_scale);
  read_opt(j, "max_scale", c.max_scale);
  read_opt(j, "brightness", c.brightness);
  read_opt(j, "max_brightness", c.max_brightness);
  read_opt(j, "gamma", c.gamma);
  read_opt(j, "min_gamma", c.min_gamma);
  read_opt(j, "max_gamma", c.max_gamma);
  read_opt(j, "blur", c.blur);
  read_opt(j, "max_blur_sigma", c.max_blur_sigma);
  read_opt(j, "salt_pepper", c.salt_pepper);
  read_opt(j, "max_salt_pepper_rate", c.max_salt_pepper_rate);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"variant", to_string(c.variant)},
       {"latent_dim", c.latent_dim},
       {"frames", c.frames},
       {"height", c.height},
       {"width", c.width},
       {"fps", c.fps},
       {"encoder_widths", c.encoder_widths},
       {"residual_blocks", c.residual_blocks},
       {"hidden_units", c.hidden_units},
       {"likelihood_sigma", c.likelihood_sigma},
       {"beta", c.beta},
       {"frequency_init", c.frequency_init},
       {"frequency_min", c.frequency_min},
       {"frequency_max", c.frequency_max},
       {"temporal_estimator", to_string(c.temporal_estimator)},
       {"sigma_floor", c.sigma_floor},
       {"learning_rate", c.learning_rate},
       {"steps", c.steps},
       {"batch_size", c.batch_size},
       {"snapshot_every", c.snapshot_every},
       {"seed", c.seed},
       {"augment", c.augment}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
  read_opt(j, "latent_dim", c.latent_dim);
  read_opt(j, "frames", c.frames);
  read_opt(j, "height", c.height);
  read_opt(j, "width", c.width);
  read_opt(j, "fps", c.fps);
  read_opt(j, "encoder_widths", c.encoder_widths);
  read_opt(j, "residual_blocks", c.residual_blocks);
  read_opt(j, "hidden_units", c.hidden_units);
  read_opt(j, "likelihood_sigma", c.likelihood_sigma);
  read_opt(j, "beta", c.beta);
  read_opt(j, "frequency_init", c.frequency_init);
  read_opt(j, "frequency_min", c.frequency_min);
  read_opt(j, "frequency_max", c.frequency_max);
  if (j.contains("temporal_estimator"))
    c.temporal_estimator = temporal_estimator_from_string(j.at("temporal_estimator").get<std::string>());
  read_opt(j, "sigma_floor", c.sigma_floor);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "steps", c.steps);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "snapshot_every", c.snapshot_every);
  read_opt(j, "seed", c.seed);
  read_opt(j, "augment", c.augment);
}

}  // namespace tvae
