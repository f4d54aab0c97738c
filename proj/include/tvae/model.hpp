#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tvae/clip.hpp"
#include "tvae/config.hpp"
#include "tvae/data.hpp"
#include "tvae/network.hpp"

namespace tvae {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Posterior of one clip. The frame-wise VAE stores T*d entries in mu/sigma
/// and leaves f, omega and v at zero.
struct ClipLatent {
  std::vector<double> mu, sigma;
  double f = 0, omega = 0, v = 0;

  /// Trajectory through the posterior mean.
  TrajectoryParams trajectory() const { return {f, omega, v, mu}; }
};

/// Ranges of the temporal parameters (and moments of mu) seen on training data; drive generation.
struct EmpiricalRanges {
  bool valid = false;
  double f_min = 1.5, f_max = 1.5;
  double omega_min = 0, omega_max = 0;
  double v_min = 0, v_max = 0;
  std::vector<double> mu_mean, mu_std;
};

void to_json(nlohmann::json& j, const EmpiricalRanges& r);
void from_json(const nlohmann::json& j, EmpiricalRanges& r);

/// Stacks clips into a (B, T, H, W) tensor; throws InputError on shape mismatch.
Tensor<float> stack_clips(std::span<const EchoClip> clips, const ModelConfig& config);
/// Item i of a (B, T, H, W) tensor as a clip.
EchoClip unstack_clip(const Tensor<float>& t, int i, double fps);

class Model {
 public:
  /// Fresh model initialized from config.seed.
  explicit Model(const ModelConfig& config);
  /// Model with the given parameter values (names and shapes must match the architecture).
  Model(const ModelConfig& config, const nn::ParameterSet<float>& params);

  const ModelConfig& config() const { return net_->config(); }
  nn::ParameterSet<float>& params() { return params_; }
  const nn::ParameterSet<float>& params() const { return params_; }
  const Network<float>& network() const { return *net_; }
  std::uint64_t decoder_calls() const { return net_->decoder_calls(); }

  std::vector<ClipLatent> encode(std::span<const EchoClip> clips) const;
  ClipLatent encode(const EchoClip& clip) const;

  /// Posterior-mean reconstruction, batched internally.
  std::vector<EchoClip> reconstruct(std::span<const EchoClip> clips) const;
  EchoClip reconstruct(const EchoClip& clip) const;

  /// Decodes a trajectory at arbitrary times (trajectory variants only).
  EchoClip decode(const TrajectoryParams& trajectory, std::span<const double> timestamps, double fps) const;

  /// Samples b from the prior (or the empirical fit for deterministic
  /// variants) and the temporal parameters uniformly within `ranges`.
  std::vector<EchoClip> generate(int count, std::uint64_t seed) const;

  EmpiricalRanges ranges;

 private:
  std::unique_ptr<Network<float>> net_;
  nn::ParameterSet<float> params_;
};

// ---------------------------------------------------------------------------
// Checkpoints: u64 little-endian header length, JSON header, little-endian
// float32 tensors in header order.

void save_checkpoint(const std::filesystem::path& path, const Model& model, const nlohmann::json& extra = {});
Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

// ---------------------------------------------------------------------------
// Training

struct TrainStep {
  int step = 0;
  int epoch = 0;
  double loss = 0;  // per clip
  double sse = 0;
  double kl = 0;
};

struct TrainOptions {
  int steps = -1;  // negative: config.steps
  std::filesystem::path snapshot_dir;
  std::function<void(const TrainStep&)> on_step;
};

struct TrainReport {
  std::vector<TrainStep> history;
  double seconds = 0;
};

/// Draws `frames` clips uniformly from every video once per epoch in a
/// seeded order. Window starts and augmentation are seeded per (seed, video, epoch).
TrainReport train(Model& model, const std::vector<Video>& videos, const TrainOptions& options = {});

/// Records the temporal parameter ranges of the training clips (window at start 0 of each video).
EmpiricalRanges fit_ranges(const Model& model, std::span<const EchoClip> clips);

/// Deterministic window of each video used for scoring and range fitting.
std::vector<EchoClip> leading_clips(const std::vector<Video>& videos, const ModelConfig& config);

}  // namespace tvae
