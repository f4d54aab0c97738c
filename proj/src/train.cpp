#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "tvae/model.hpp"

namespace tvae {

namespace {

// Stream tags keep the per-purpose seeds apart.
constexpr std::uint64_t kOrderStream = 0x6f72646572;
constexpr std::uint64_t kNoiseStream = 0x6e6f697365;

class EpochSampler {
 public:
  EpochSampler(const std::vector<Video>& videos, const ModelConfig& c) : videos_(videos), c_(c) { shuffle(); }

  EchoClip next() {
    if (pos_ == order_.size()) {
      ++epoch_;
      shuffle();
    }
    const std::size_t idx = order_[pos_++];
    const Video& v = videos_[idx];
    Rng rng(derive_seed({c_.seed, static_cast<std::uint64_t>(idx), static_cast<std::uint64_t>(epoch_)}));
    const int last = max_clip_start(v, c_.frames, c_.fps);
    const int start = std::uniform_int_distribution<int>(0, last)(rng);
    return augment(extract_clip(v, start, c_.frames, c_.fps), c_.augment, rng);
  }

  int epoch() const { return epoch_; }

 private:
  void shuffle() {
    order_.resize(videos_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(derive_seed({c_.seed, kOrderStream, static_cast<std::uint64_t>(epoch_)}));
    std::shuffle(order_.begin(), order_.end(), rng);
    pos_ = 0;
  }

  const std::vector<Video>& videos_;
  const ModelConfig& c_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  int epoch_ = 0;
};

}  // namespace

TrainReport train(Model& model, const std::vector<Video>& videos, const TrainOptions& options) {
  const ModelConfig& c = model.config();
  if (videos.empty()) throw DataError("no training videos");
  for (const Video& v : videos) {
    if (!v.is_normal()) throw DataError("label leakage: training video '" + v.id + "' is labelled " + v.label);
    if (v.height != c.height || v.width != c.width)
      throw DataError("video '" + v.id + "' is " + std::to_string(v.height) + "x" + std::to_string(v.width) +
                      " but the model expects " + std::to_string(c.height) + "x" + std::to_string(c.width));
    if (max_clip_start(v, c.frames, c.fps) < 0)
      throw ClipError("video '" + v.id + "' is too short for a " + std::to_string(c.frames) + "-frame clip");
  }
  const int steps = options.steps >= 0 ? options.steps : c.steps;
  const auto t0 = std::chrono::steady_clock::now();

  nn::Adam<float> adam(model.params(), {.learning_rate = c.learning_rate});
  auto grads = model.params().zeros_like();
  EpochSampler sampler(videos, c);
  ObjectiveOptions opts;
  opts.param_grads = true;
  opts.kl_weight = c.beta;
  std::normal_distribution<float> normal;
  TrainReport report;
  if (!options.snapshot_dir.empty()) std::filesystem::create_directories(options.snapshot_dir);

  std::vector<EchoClip> batch(c.batch_size);
  for (int step = 0; step < steps; ++step) {
    for (auto& clip : batch) clip = sampler.next();
    const Tensor<float> x = stack_clips(batch, c);
    Rng noise_rng(derive_seed({c.seed, kNoiseStream, static_cast<std::uint64_t>(step)}));
    std::vector<float> noise(noise_size(c, c.batch_size));
    for (float& e : noise) e = normal(noise_rng);

    grads.set_zero();
    const auto res = negative_elbo(model.network(), model.params(), x, noise, opts, &grads);
    if (!std::isfinite(res.loss)) throw NumericalError("non-finite loss at step " + std::to_string(step));
    const float scale = 1.0f / static_cast<float>(c.batch_size);
    for (auto& e : grads.entries())
      for (float& g : e.value.data) g *= scale;
    adam.step(model.params(), grads);

    TrainStep log{step, sampler.epoch(), res.loss / c.batch_size, res.sse / c.batch_size, res.kl / c.batch_size};
    report.history.push_back(log);
    if (options.on_step) options.on_step(log);
    if (!options.snapshot_dir.empty() && c.snapshot_every > 0 && (step + 1) % c.snapshot_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%06d.ckpt", step + 1);
      save_checkpoint(options.snapshot_dir / name, model, {{"step", step + 1}});
    }
  }
  model.ranges = fit_ranges(model, leading_clips(videos, c));
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace tvae
