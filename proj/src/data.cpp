#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "tvae/data.hpp"

namespace tvae {

std::vector<std::uint8_t> equalize_histogram(std::span<const std::uint8_t> frame) {
  std::array<std::size_t, 256> hist{};
  for (std::uint8_t v : frame) ++hist[v];
  std::array<std::size_t, 256> cdf{};
  std::size_t acc = 0;
  for (int i = 0; i < 256; ++i) cdf[i] = acc += hist[i];
  const std::size_t total = frame.size();
  std::size_t cdf_min = 0;
  for (int i = 0; i < 256; ++i) {
    if (hist[i]) {
      cdf_min = cdf[i];
      break;
    }
  }
  if (total == cdf_min) return {frame.begin(), frame.end()};  // single-bin histogram
  std::array<std::uint8_t, 256> lut{};
  const double denom = static_cast<double>(total - cdf_min);
  for (int i = 0; i < 256; ++i) {
    const double v = cdf[i] < cdf_min ? 0.0 : (cdf[i] - cdf_min) / denom * 255.0;
    lut[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  std::vector<std::uint8_t> out(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) out[i] = lut[frame[i]];
  return out;
}

std::vector<std::uint8_t> resize_bilinear(std::span<const std::uint8_t> frame, int height, int width, int out_height,
                                          int out_width) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_height) * out_width);
  const double sy = static_cast<double>(height) / out_height;
  const double sx = static_cast<double>(width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, width - 1);
      const double wx = fx - x0;
      const double top = frame[y0 * width + x0] * (1 - wx) + frame[y0 * width + x1] * wx;
      const double bottom = frame[y1 * width + x0] * (1 - wx) + frame[y1 * width + x1] * wx;
      out[y * out_width + x] = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - wy) + bottom * wy), 0L, 255L));
    }
  }
  return out;
}

namespace {

std::vector<std::uint8_t> resize_nearest(std::span<const std::uint8_t> frame, int height, int width, int out_height,
                                         int out_width) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_height) * out_width);
  for (int y = 0; y < out_height; ++y) {
    const int sy = std::min(height - 1, static_cast<int>((y + 0.5) * height / out_height));
    for (int x = 0; x < out_width; ++x) {
      const int sx = std::min(width - 1, static_cast<int>((x + 0.5) * width / out_width));
      out[y * out_width + x] = frame[sy * width + sx];
    }
  }
  return out;
}

}  // namespace

Video preprocess(const RawVideo& video, const PreprocessParams& params) {
  if (video.frames <= 0 || video.pixels.empty()) throw DataError("cannot preprocess empty video '" + video.id + "'");
  if (video.pixels.size() != static_cast<std::size_t>(video.frames) * video.frame_size())
    throw DataError("video '" + video.id + "' pixel buffer does not match its shape");
  if (params.height <= 0 || params.width <= 0) throw DataError("preprocess target size must be positive");
  Video out;
  out.id = video.id;
  out.label = video.label;
  out.fps = video.fps;
  out.frames = video.frames;
  out.height = params.height;
  out.width = params.width;
  out.pixels.reserve(static_cast<std::size_t>(video.frames) * params.height * params.width);
  const std::size_t in_size = video.frame_size();
  for (int f = 0; f < video.frames; ++f) {
    std::span<const std::uint8_t> src(video.pixels.data() + f * in_size, in_size);
    std::vector<std::uint8_t> frame = resize_bilinear(src, video.height, video.width, params.height, params.width);
    if (params.equalize) frame = equalize_histogram(frame);
    for (std::uint8_t v : frame) out.pixels.push_back(v / 255.0f);
  }
  if (video.has_mask()) {
    out.mask.reserve(out.pixels.size());
    for (int f = 0; f < video.frames; ++f) {
      std::span<const std::uint8_t> src(video.mask.data() + f * in_size, in_size);
      auto m = resize_nearest(src, video.height, video.width, params.height, params.width);
      out.mask.insert(out.mask.end(), m.begin(), m.end());
    }
  }
  return out;
}

int subsample_stride(double source_fps, double target_fps) {
  if (!(source_fps > 0) || !(target_fps > 0)) throw ClipError("frame rates must be positive");
  return std::max(1, static_cast<int>(std::lround(source_fps / target_fps)));
}

int max_clip_start(const Video& video, int frames, double target_fps) {
  const int stride = subsample_stride(video.fps, target_fps);
  return video.frames - 1 - (frames - 1) * stride;
}

namespace {

void check_clip_range(const Video& video, int start, int frames, double target_fps) {
  if (frames <= 0) throw ClipError("clip length must be positive");
  const int last = max_clip_start(video, frames, target_fps);
  if (start < 0 || start > last)
    throw ClipError("video '" + video.id + "' has " + std::to_string(video.frames) + " frames; cannot extract " +
                    std::to_string(frames) + " frames at stride " +
                    std::to_string(subsample_stride(video.fps, target_fps)) + " from start " + std::to_string(start));
}

}  // namespace

EchoClip extract_clip(const Video& video, int start, int frames, double target_fps) {
  check_clip_range(video, start, frames, target_fps);
  const int stride = subsample_stride(video.fps, target_fps);
  EchoClip clip(frames, video.height, video.width, target_fps);
  const std::size_t fs = video.frame_size();
  for (int j = 0; j < frames; ++j) {
    const auto* src = video.pixels.data() + static_cast<std::size_t>(start + j * stride) * fs;
    std::copy(src, src + fs, clip.frames.begin() + j * fs);
  }
  return clip;
}

std::vector<std::uint8_t> extract_clip_mask(const Video& video, int start, int frames, double target_fps) {
  check_clip_range(video, start, frames, target_fps);
  const std::size_t fs = video.frame_size();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(frames) * fs, 0);
  if (!video.has_mask()) return out;
  const int stride = subsample_stride(video.fps, target_fps);
  for (int j = 0; j < frames; ++j) {
    const auto* src = video.mask.data() + static_cast<std::size_t>(start + j * stride) * fs;
    std::copy(src, src + fs, out.begin() + j * fs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation

AugmentDraw draw_augmentation(const AugmentConfig& c, Rng& rng) {
  AugmentDraw d;
  if (!c.enabled) return d;
  // Every draw happens regardless of the toggles so that switching one
  // augmentation off leaves the others' parameters unchanged.
  const double rot = uniform(rng, -c.max_rotation_deg, c.max_rotation_deg) * std::numbers::pi / 180.0;
  const double tx = uniform(rng, -c.max_translation, c.max_translation);
  const double ty = uniform(rng, -c.max_translation, c.max_translation);
  const double sc = uniform(rng, c.min_scale, c.max_scale);
  const double br = uniform(rng, -c.max_brightness, c.max_brightness);
  const double ga = std::exp(uniform(rng, std::log(c.min_gamma), std::log(c.max_gamma)));
  const double bl = uniform(rng, 0.0, c.max_blur_sigma);
  const double sp = uniform(rng, 0.0, c.max_salt_pepper_rate);
  if (c.affine) {
    d.rotation_rad = rot;
    d.translate_x = tx;
    d.translate_y = ty;
    d.scale = sc;
  }
  if (c.brightness) d.brightness = br;
  if (c.gamma) d.gamma = ga;
  if (c.blur) d.blur_sigma = bl;
  if (c.salt_pepper) d.salt_pepper_rate = sp;
  return d;
}

namespace {

void affine_frame(std::span<const float> src, std::span<float> dst, int h, int w, const AugmentDraw& d) {
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double c = std::cos(d.rotation_rad), s = std::sin(d.rotation_rad);
  const double tx = d.translate_x * w, ty = d.translate_y * h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double px = (x - cx - tx) / d.scale, py = (y - cy - ty) / d.scale;
      const double sx = c * px + s * py + cx;
      const double sy = -s * px + c * py + cy;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double wx = sx - x0, wy = sy - y0;
      auto at = [&](int yy, int xx) -> double {
        return (yy < 0 || yy >= h || xx < 0 || xx >= w) ? 0.0 : src[yy * w + xx];
      };
      const double v = (at(y0, x0) * (1 - wx) + at(y0, x0 + 1) * wx) * (1 - wy) +
                       (at(y0 + 1, x0) * (1 - wx) + at(y0 + 1, x0 + 1) * wx) * wy;
      dst[y * w + x] = static_cast<float>(v);
    }
  }
}

void blur_frame(std::span<float> img, int h, int w, double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  std::vector<float> tmp(img.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * img[y * w + std::clamp(x + i, 0, w - 1)];
      tmp[y * w + x] = static_cast<float>(acc);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
      img[y * w + x] = static_cast<float>(acc);
    }
}

}  // namespace

EchoClip apply_augmentation(const EchoClip& clip, const AugmentDraw& d, Rng& rng) {
  EchoClip out = clip;
  const int h = clip.height, w = clip.width;
  const bool affine = d.rotation_rad != 0 || d.translate_x != 0 || d.translate_y != 0 || d.scale != 1;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int j = 0; j < clip.frames_count; ++j) {
    std::span<float> dst = out.frame(j);
    if (affine) affine_frame(clip.frame(j), dst, h, w, d);
    if (d.blur_sigma > 0.05) blur_frame(dst, h, w, d.blur_sigma);
    for (float& v : dst) {
      double x = std::clamp(static_cast<double>(v), 0.0, 1.0);
      if (d.gamma != 1) x = std::pow(x, d.gamma);
      x += d.brightness;
      v = static_cast<float>(std::clamp(x, 0.0, 1.0));
    }
    if (d.salt_pepper_rate > 0) {
      for (float& v : dst) {
        if (unit(rng) < d.salt_pepper_rate) v = unit(rng) < 0.5 ? 0.0f : 1.0f;
      }
    }
  }
  return out;
}

EchoClip augment(const EchoClip& clip, const AugmentConfig& config, Rng& rng) {
  if (!config.enabled) return clip;
  const AugmentDraw d = draw_augmentation(config, rng);
  return apply_augmentation(clip, d, rng);
}

}  // namespace tvae
