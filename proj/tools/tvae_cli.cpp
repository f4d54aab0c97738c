// tvae: synthesize datasets, train, reconstruct, generate, score, render heatmaps, evaluate.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "tvae/anomaly.hpp"
#include "tvae/metrics.hpp"
#include "tvae/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tvae;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ULL;
  return h;
}

std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

// Run metadata lives beside the artifacts and is the only output that varies between identical runs.
struct RunLog {
  std::string command;
  std::vector<std::string> argv;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  json fields = json::object();

  void write(const fs::path& dir) const {
    json j = fields;
    j["command"] = command;
    j["argv"] = argv;
    j["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    j["finished_at_unix"] = static_cast<std::int64_t>(std::time(nullptr));
    write_text(dir / "run_metadata.json", j.dump(2) + "\n");
  }
};

// Model configuration: preset, then --config file, then individual flags.
struct ModelFlags {
  std::string preset = "desk";
  std::string variant = "tvae-s";
  fs::path config_file;
  std::optional<int> steps, batch_size, latent_dim, frames;
  std::optional<double> learning_rate, beta, sigma;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> temporal;
  bool no_augment = false;

  void add(CLI::App* app, bool with_seed) {
    app->add_option("--preset", preset, "desk, standard or miniature")->check(CLI::IsMember({"desk", "standard", "miniature"}));
    app->add_option("--variant", variant, "tvae-c, tvae-r, tvae-s, tae-c, tae-r, tae-s or vae");
    app->add_option("--config", config_file, "JSON model configuration (overrides the preset)");
    app->add_option("--steps", steps);
    app->add_option("--batch-size", batch_size);
    app->add_option("--latent-dim", latent_dim);
    app->add_option("--frames", frames);
    app->add_option("--learning-rate", learning_rate);
    app->add_option("--beta", beta);
    app->add_option("--likelihood-sigma", sigma);
    app->add_option("--temporal-estimator", temporal)->check(CLI::IsMember({"spectral", "learned"}));
    app->add_flag("--no-augment", no_augment);
    if (with_seed) app->add_option("--seed", seed, "random seed (required)")->required();
  }

  ModelConfig build() const {
    const Variant v = variant_from_string(variant);
    ModelConfig c = preset == "desk" ? ModelConfig::desk(v) : preset == "miniature" ? ModelConfig::miniature(v)
                                                                                   : ModelConfig::defaults(v);
    if (!config_file.empty()) {
      const json j = read_json(config_file);
      try {
        from_json(j, c);
      } catch (const json::exception& e) {
        throw ConfigError(config_file.string() + ": " + e.what());
      }
    }
    if (steps) c.steps = *steps;
    if (batch_size) c.batch_size = *batch_size;
    if (latent_dim) c.latent_dim = *latent_dim;
    if (frames) c.frames = *frames;
    if (learning_rate) c.learning_rate = *learning_rate;
    if (beta) c.beta = *beta;
    if (sigma) c.likelihood_sigma = *sigma;
    if (seed) c.seed = *seed;
    if (temporal) c.temporal_estimator = temporal_estimator_from_string(*temporal);
    if (no_augment) c.augment = AugmentConfig::disabled();
    c.validate();
    return c;
  }
};

struct MapFlags {
  std::string map = "fast";
  std::optional<int> steps;
  std::optional<double> step_size, tv_weight, threshold;

  void add(CLI::App* app) {
    app->add_option("--map", map, "fast, full, or recon (reconstruction error)")
        ->check(CLI::IsMember({"fast", "full", "recon"}));
    app->add_option("--map-steps", steps);
    app->add_option("--map-step-size", step_size);
    app->add_option("--tv-weight", tv_weight);
    app->add_option("--threshold", threshold);
  }

  MapConfig build() const {
    MapConfig c;
    if (map != "recon") c.variant = map_variant_from_string(map);
    if (steps) c.steps = *steps;
    if (step_size) c.step_size = *step_size;
    if (tv_weight) c.tv_weight = *tv_weight;
    c.threshold = threshold;
    c.validate();
    return c;
  }
};

struct ClipSet {
  std::vector<EchoClip> clips;
  std::vector<std::vector<std::uint8_t>> masks;
  std::vector<std::string> ids, labels;
};

// Leading window of every video in a split, checked against the model shape before any heavy work.
ClipSet load_clips(const fs::path& data, const std::string& split, const ModelConfig& c) {
  const DatasetManifest m = read_manifest(data);
  if (m.preprocess.height != c.height || m.preprocess.width != c.width)
    throw DataError("dataset is preprocessed to " + std::to_string(m.preprocess.height) + "x" +
                    std::to_string(m.preprocess.width) + " but the model expects " + std::to_string(c.height) + "x" +
                    std::to_string(c.width));
  ClipSet s;
  for (const Video& v : load_split(data, m, split)) {
    if (max_clip_start(v, c.frames, c.fps) < 0) throw ClipError("video '" + v.id + "' is too short");
    s.clips.push_back(extract_clip(v, 0, c.frames, c.fps));
    s.masks.push_back(extract_clip_mask(v, 0, c.frames, c.fps));
    s.ids.push_back(v.id);
    s.labels.push_back(v.label);
  }
  if (s.clips.empty()) throw DataError("split '" + split + "' is empty");
  return s;
}

RawVideo to_raw(const EchoClip& clip, const std::string& id) {
  RawVideo r;
  r.id = id;
  r.fps = static_cast<int>(std::lround(clip.fps));
  r.frames = clip.frames_count;
  r.height = clip.height;
  r.width = clip.width;
  r.pixels.resize(clip.frames.size());
  for (std::size_t i = 0; i < clip.frames.size(); ++i)
    r.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(clip.frames[i], 0.0f, 1.0f)));
  return r;
}

// ---------------------------------------------------------------------------

void cmd_synth(const fs::path& spec_file, const fs::path& out, std::optional<std::uint64_t> seed, int test_normals,
               RunLog& log) {
  const json spec = read_json(spec_file);
  // Either one generator spec or {"parts": [spec, ...]}; each part may carry a "split".
  const json parts = spec.contains("parts") ? spec.at("parts") : json::array({spec});
  std::vector<RawVideo> videos;
  std::vector<std::string> splits;
  std::uint64_t base_seed = 0;
  json used = json::array();
  for (json part : parts) {
    const std::string split = part.value("split", std::string("train"));
    part.erase("split");
    SyntheticSpec s;
    try {
      s = part.get<SyntheticSpec>();
      if (seed) s.seed = *seed;
      s.validate();
    } catch (const json::exception& e) {
      throw ConfigError(spec_file.string() + ": " + e.what());
    } catch (const DataError& e) {
      throw ConfigError(spec_file.string() + ": " + e.what());
    }
    base_seed = s.seed;
    for (auto& v : generate_synthetic(s)) {
      splits.push_back(v.is_normal() ? split : "test");
      videos.push_back(std::move(v));
    }
    json u = s;
    u["split"] = split;
    used.push_back(u);
  }
  // Equalization flattens the synthetic brightness cycle the phase fit relies on.
  PreprocessParams pp{32, 32, false};
  if (spec.contains("preprocess")) {
    const json& p = spec.at("preprocess");
    pp.height = p.value("height", pp.height);
    pp.width = p.value("width", pp.width);
    pp.equalize = p.value("equalize", pp.equalize);
  }
  DatasetManifest m = write_dataset(out, videos, splits, pp, base_seed, {{"generator", used}});
  if (test_normals > 0) {
    m = resplit(m, test_normals, base_seed);
    write_manifest(out, m);
  }
  log.fields["videos"] = videos.size();
  log.fields["seed"] = base_seed;
  std::cout << "wrote " << videos.size() << " videos to " << out << "\n";
}

// Each subdirectory of `input` holds one video as sorted PGM frames; an optional
// `mask/` subdirectory of the same length marks anomalous pixels.
void cmd_convert(const fs::path& input, const fs::path& labels_file, int fps, const PreprocessParams& pp,
                 std::uint64_t seed, int test_normals, const fs::path& out, RunLog& log) {
  std::map<std::string, std::string> labels;
  if (!labels_file.empty()) {
    std::ifstream is(labels_file);
    std::string line;
    while (std::getline(is, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos || line.starts_with("id,")) continue;
      labels[line.substr(0, comma)] = line.substr(comma + 1);
    }
  }
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(input))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError("no video directories in " + input.string());
  std::vector<RawVideo> videos;
  std::vector<std::string> splits;
  for (const auto& d : dirs) {
    const std::string id = d.filename().string();
    const auto it = labels.find(id);
    RawVideo v = read_pgm_sequence(d, fps, id, it == labels.end() ? kNormalLabel : it->second);
    if (fs::is_directory(d / "mask")) {
      const RawVideo m = read_pgm_sequence(d / "mask", fps, id, v.label);
      if (m.pixels.size() != v.pixels.size()) throw DataError(id + ": mask size differs from the video");
      v.mask = m.pixels;
    }
    splits.push_back(v.is_normal() ? "train" : "test");
    videos.push_back(std::move(v));
  }
  DatasetManifest m = write_dataset(out, videos, splits, pp, seed, {{"converted_from", input.string()}});
  if (test_normals > 0) {
    m = resplit(m, test_normals, seed);
    write_manifest(out, m);
  }
  log.fields["videos"] = videos.size();
  std::cout << "wrote " << videos.size() << " videos to " << out << "\n";
}

void cmd_train(const ModelConfig& c, const fs::path& data, const std::string& split, const fs::path& out,
               const fs::path& init, RunLog& log) {
  const DatasetManifest m = read_manifest(data);
  if (m.preprocess.height != c.height || m.preprocess.width != c.width)
    throw DataError("dataset frames are " + std::to_string(m.preprocess.height) + "x" +
                    std::to_string(m.preprocess.width) + " but the configuration expects " +
                    std::to_string(c.height) + "x" + std::to_string(c.width));
  const auto videos = load_split(data, m, split);
  fs::create_directories(out);
  Model model = [&] {
    if (init.empty()) return Model(c);
    Model warm = load_checkpoint(init);
    if (!warm.config().same_architecture(c)) throw ConfigError("initial checkpoint architecture differs from the configuration");
    return Model(c, warm.params());
  }();
  std::ofstream history(out / "history.csv");
  history << "step,epoch,loss,sse,kl\n";
  TrainOptions opts;
  if (c.snapshot_every > 0) opts.snapshot_dir = out / "snapshots";
  opts.on_step = [&](const TrainStep& s) {
    history << s.step << "," << s.epoch << "," << s.loss << "," << s.sse << "," << s.kl << "\n";
    if (s.step % 100 == 0) std::cout << "step " << s.step << " loss " << s.loss << "\n" << std::flush;
  };
  const TrainReport rep = train(model, videos, opts);
  save_checkpoint(out / "model.ckpt", model);
  const json cj = c;
  log.fields["config"] = cj;
  log.fields["config_hash"] = hex64(fnv1a(cj.dump()));
  log.fields["seed"] = c.seed;
  log.fields["train_seconds"] = rep.seconds;
  log.fields["videos"] = videos.size();
}

void cmd_reconstruct(const fs::path& ckpt, const fs::path& data, const std::string& split, const fs::path& out,
                     RunLog& log) {
  const Model model = load_checkpoint(ckpt);
  const ClipSet set = load_clips(data, split, model.config());
  fs::create_directories(out);
  const auto rec = model.reconstruct(set.clips);
  MetricsReport report;
  SplitMetrics sm;
  sm.name = split;
  std::vector<double> mses, psnrs, ssims;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const auto rm = reconstruction_metrics(set.clips[i], rec[i]);
    mses.push_back(rm.mse);
    psnrs.push_back(rm.psnr);
    ssims.push_back(rm.ssim);
    write_video(out / (set.ids[i] + ".rec.tvv"), to_raw(rec[i], set.ids[i]));
  }
  sm.clips = static_cast<int>(rec.size());
  sm.reconstruction = {summarize(mses).mean, summarize(psnrs).mean, summarize(ssims).mean};
  report.splits.push_back(sm);
  write_text(out / "reconstruction_metrics.json", report.to_json().dump(2) + "\n");
  log.fields["clips"] = rec.size();
  std::cout << "mse " << sm.reconstruction.mse << " psnr " << sm.reconstruction.psnr << " ssim "
            << sm.reconstruction.ssim << "\n";
}

void cmd_generate(const fs::path& ckpt, int count, std::uint64_t seed, const fs::path& out, RunLog& log) {
  const Model model = load_checkpoint(ckpt);
  fs::create_directories(out);
  const auto clips = model.generate(count, seed);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "gen_%04zu", i);
    write_video(out / (std::string(name) + ".tvv"), to_raw(clips[i], name));
  }
  log.fields["seed"] = seed;
  log.fields["count"] = count;
}

void cmd_score(const fs::path& ckpt, const fs::path& data, const std::string& split, const MapFlags& mf,
               const fs::path& out, bool save_results, RunLog& log) {
  const Model model = load_checkpoint(ckpt);
  const MapConfig mc = mf.build();
  const ClipSet set = load_clips(data, split, model.config());
  fs::create_directories(out);
  std::vector<double> scores;
  if (mf.map == "recon") {
    scores = score_reconstruction(model, set.clips);
  } else {
    for (std::size_t i = 0; i < set.clips.size(); ++i) {
      const AnomalyResult r = map_restore(model, set.clips[i], mc);
      scores.push_back(r.score);
      if (save_results) save_result(out / "results", set.ids[i], r, mc);
    }
  }
  std::ostringstream csv;
  csv.precision(17);
  csv << "id,label,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) csv << set.ids[i] << "," << set.labels[i] << "," << scores[i] << "\n";
  write_text(out / "scores.csv", csv.str());
  log.fields["map"] = mf.map;
  if (mf.map != "recon") log.fields["map_config"] = mc;
  log.fields["clips"] = scores.size();
}

void cmd_heatmap(const fs::path& ckpt, const fs::path& data, const std::string& split, const std::string& id,
                 const MapFlags& mf, const fs::path& out, RunLog& log) {
  const Model model = load_checkpoint(ckpt);
  const MapConfig mc = mf.build();
  const ClipSet set = load_clips(data, split, model.config());
  fs::create_directories(out);
  int done = 0;
  for (std::size_t i = 0; i < set.clips.size(); ++i) {
    if (!id.empty() && set.ids[i] != id) continue;
    const AnomalyResult r = map_restore(model, set.clips[i], mc);
    save_result(out, set.ids[i], r, mc);
    ++done;
  }
  if (done == 0) throw DataError("no clip with id '" + id + "' in split '" + split + "'");
  log.fields["clips"] = done;
}

struct ScoreRow {
  std::string id, label;
  double score;
};

std::vector<ScoreRow> read_scores(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "id,label,score") throw DataError(path.string() + ": expected header id,label,score");
  std::vector<ScoreRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ScoreRow r;
    std::string s;
    if (!std::getline(ss, r.id, ',') || !std::getline(ss, r.label, ',') || !std::getline(ss, s))
      throw DataError(path.string() + ": malformed row '" + line + "'");
    try {
      r.score = std::stod(s);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": bad score '" + s + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

void cmd_eval(const std::vector<fs::path>& score_files, const std::string& positive, const fs::path& out,
              RunLog& log) {
  MetricsReport report;
  for (const fs::path& f : score_files) {
    const auto rows = read_scores(f);
    SplitMetrics sm;
    sm.name = f.parent_path().filename().string().empty() ? f.string() : f.parent_path().filename().string();
    std::set<std::string> anomaly_labels;
    for (const auto& r : rows)
      if (r.label != kNormalLabel) anomaly_labels.insert(r.label);
    anomaly_labels.insert("all");
    for (const std::string& label : anomaly_labels) {
      std::vector<double> s;
      std::vector<bool> anomalous;
      for (const auto& r : rows)
        if (r.label == kNormalLabel || label == "all" || r.label == label) {
          s.push_back(r.score);
          anomalous.push_back(r.label != kNormalLabel);
        }
      DetectionPair d = detection_both_ways(s, anomalous);
      // The reported orientation comes first; both are kept in the JSON.
      if (positive == "healthy") std::swap(d.anomalous_positive, d.healthy_positive);
      sm.detection[label] = d;
    }
    report.splits.push_back(sm);
  }
  fs::create_directories(out);
  json j = report.to_json();
  j["positive"] = positive;
  write_text(out / "metrics.json", j.dump(2) + "\n");
  write_text(out / "metrics.csv", report.to_csv());
  std::cout << report.to_csv();
  log.fields["positive"] = positive;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory VAE toolkit for periodic grayscale video"};
  app.require_subcommand(1);
  RunLog log;
  for (int i = 0; i < argc; ++i) log.argv.emplace_back(argv[i]);

  fs::path out, data, ckpt, spec_file, init;
  std::string split = "train";
  std::optional<std::uint64_t> seed;
  int test_normals = 0, count = 8;
  std::uint64_t gen_seed = 0;
  bool save_results = false;
  std::string id, positive = "anomalous";
  std::vector<fs::path> score_files;
  ModelFlags mflags;
  MapFlags map_flags;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
  synth->add_option("--spec", spec_file, "generator spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out)->required();
  synth->add_option("--seed", seed, "overrides the seed in the generator spec");
  synth->add_option("--test-normals", test_normals, "move this many normal videos to the test split");

  auto* conv = app.add_subcommand("convert", "ingest directories of PGM frame sequences");
  fs::path input, labels_file;
  int fps = 25;
  PreprocessParams conv_pp{128, 128, true};
  bool no_equalize = false;
  conv->add_option("--input", input, "one subdirectory of .pgm frames per video")->required()->check(CLI::ExistingDirectory);
  conv->add_option("--labels", labels_file, "CSV of id,label (unlisted videos are normal)")->check(CLI::ExistingFile);
  conv->add_option("--fps", fps, "source frame rate")->check(CLI::PositiveNumber);
  conv->add_option("--height", conv_pp.height)->check(CLI::PositiveNumber);
  conv->add_option("--width", conv_pp.width)->check(CLI::PositiveNumber);
  conv->add_flag("--no-equalize", no_equalize);
  conv->add_option("--out", out)->required();
  conv->add_option("--seed", gen_seed, "seed for the test split draw");
  conv->add_option("--test-normals", test_normals, "move this many normal videos to the test split");

  auto* train_cmd = app.add_subcommand("train", "train a model on the normal videos of a split");
  train_cmd->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--split", split);
  train_cmd->add_option("--out", out)->required();
  train_cmd->add_option("--init", init, "warm-start weights (optimizer state is not restored)");
  mflags.add(train_cmd, true);

  auto* recon = app.add_subcommand("reconstruct", "posterior-mean reconstructions and quality metrics");
  auto* gen = app.add_subcommand("generate", "sample clips from the prior");
  auto* score = app.add_subcommand("score", "anomaly scores for every video of a split");
  auto* heat = app.add_subcommand("heatmap", "MAP restoration results and heatmap images");
  for (auto* sub : {recon, gen, score, heat}) {
    sub->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out)->required();
  }
  for (auto* sub : {recon, score, heat}) {
    sub->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
    sub->add_option("--split", split);
  }
  gen->add_option("--count", count)->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed)->required();
  map_flags.add(score);
  map_flags.add(heat);
  score->add_flag("--save-results", save_results, "also write per-clip perturbations and heatmaps");
  heat->add_option("--id", id, "single video id (default: every video of the split)");

  auto* eval = app.add_subcommand("eval", "AUROC and AP from score files");
  eval->add_option("--scores", score_files, "scores.csv files, one per split")->required()->check(CLI::ExistingFile);
  eval->add_option("--positive", positive)->check(CLI::IsMember({"anomalous", "healthy"}));
  eval->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), 2);
  }

  try {
    if (*synth) {
      log.command = "synth";
      cmd_synth(spec_file, out, seed, test_normals, log);
    } else if (*conv) {
      log.command = "convert";
      conv_pp.equalize = !no_equalize;
      cmd_convert(input, labels_file, fps, conv_pp, gen_seed, test_normals, out, log);
    } else if (*train_cmd) {
      log.command = "train";
      cmd_train(mflags.build(), data, split, out, init, log);
    } else if (*recon) {
      log.command = "reconstruct";
      cmd_reconstruct(ckpt, data, split, out, log);
    } else if (*gen) {
      log.command = "generate";
      cmd_generate(ckpt, count, gen_seed, out, log);
    } else if (*score) {
      log.command = "score";
      cmd_score(ckpt, data, split, map_flags, out, save_results, log);
    } else if (*heat) {
      log.command = "heatmap";
      cmd_heatmap(ckpt, data, split, id, map_flags, out, log);
    } else if (*eval) {
      log.command = "eval";
      cmd_eval(score_files, positive, out, log);
    }
    log.write(out);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
