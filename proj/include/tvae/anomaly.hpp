#pragma once

// MAP restoration of a healthy clip X_H from an observation Y, with a
// temporal total-variation prior on the perturbation Y - X_H.
//
// Maximized objective: J(X) = -lambda * TV(Y - X) - L(X), where L is the KL
// term of the encoded b (fast_kl) or the full negative ELBO (full_elbo).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tvae/clip.hpp"
#include "tvae/model.hpp"

namespace tvae {

/// Sum over voxels of |dx| + |dy| + |dt|, each a central difference with
/// replicated edges. Array layout is frame-major (T x H x W).
double tv_norm(std::span<const double> x, int frames, int height, int width);

/// Charbonnier-smoothed TV, sqrt(g^2 + eps^2) per difference. Adds the gradient to `grad` when given.
double tv_norm_smooth(std::span<const double> x, int frames, int height, int width, double eps,
                      std::vector<double>* grad);

enum class MapVariant { full_elbo, fast_kl };
std::string to_string(MapVariant v);
MapVariant map_variant_from_string(const std::string& name);

struct MapConfig {
  MapVariant variant = MapVariant::fast_kl;
  int steps = 100;
  double step_size = 0.01;
  double tv_weight = 0.001;
  double tv_epsilon = 1e-8;
  std::optional<double> threshold;  // scores only when unset
  std::uint64_t noise_seed = 0;     // full_elbo: the reparameterization draw, fixed across steps

  void validate() const;
};

void to_json(nlohmann::json& j, const MapConfig& c);
void from_json(const nlohmann::json& j, MapConfig& c);

struct AnomalyResult {
  int frames = 0, height = 0, width = 0;
  double score = 0;                 // (1/T) sum_j ||a_j||^2
  EchoClip restored;                // X_H clamped to [0, 1]
  std::vector<double> perturbation;  // Y - X_H, unclamped, T x H x W
  std::vector<double> heatmap;       // H x W, temporal mean of the perturbation
  std::vector<double> trace;         // J at every iterate, steps + 1 entries
  std::vector<double> best_trace;    // running maximum of trace
  int best_step = 0;                 // iterate the result is built from
  std::uint64_t loop_decoder_calls = 0;
  std::optional<bool> anomalous;     // set when a threshold is configured
};

/// Runs the restoration from X_H = reconstruction of Y. The result is built
/// from the best iterate, which is the final one whenever the run improves monotonically.
AnomalyResult map_restore(const Model& model, const EchoClip& y, const MapConfig& config);

/// (1/T) sum_j ||a_j||^2 for a T x H x W perturbation.
double perturbation_score(std::span<const double> perturbation, int frames);
/// Temporal mean of a T x H x W array.
std::vector<double> temporal_mean(std::span<const double> perturbation, int frames, int height, int width);

/// Mean per-frame squared error between Y and its posterior-mean reconstruction.
double score_reconstruction(const Model& model, const EchoClip& y);
std::vector<double> score_reconstruction(const Model& model, std::span<const EchoClip> clips);

/// Binary PPM with a blue-white-red scale symmetric around zero; `scale` pixels per cell.
void write_heatmap_ppm(const std::filesystem::path& path, std::span<const double> heatmap, int height, int width,
                       int scale = 4);

/// Float array file: "TVAEARR1", u32 rank, u32 dims, little-endian float32 values.
void write_array(const std::filesystem::path& path, std::span<const double> values, std::span<const int> dims);
std::vector<double> read_array(const std::filesystem::path& path, std::vector<int>* dims = nullptr);

/// <id>.json (score, config, trace), <id>.perturbation.arr, <id>.heatmap.arr and <id>.heatmap.ppm.
void save_result(const std::filesystem::path& dir, const std::string& id, const AnomalyResult& result,
                 const MapConfig& config);

}  // namespace tvae
