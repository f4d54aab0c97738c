#include "tvae/clip.hpp"

#include <cmath>

namespace tvae {

EchoClip::EchoClip(int t, int h, int w, double fps_value)
    : frames_count(t), height(h), width(w), fps(fps_value),
      frames(static_cast<std::size_t>(t) * h * w, 0.0f), timestamps(uniform_timestamps(t, fps_value)) {
  if (t <= 0 || h <= 0 || w <= 0 || !(fps_value > 0)) throw InputError("clip dimensions must be positive");
}

std::vector<double> uniform_timestamps(int count, double fps) {
  std::vector<double> ts(count);
  for (int j = 0; j < count; ++j) ts[j] = j / fps;
  return ts;
}

void EchoClip::validate() const {
  if (frames.size() != static_cast<std::size_t>(frames_count) * frame_size())
    throw InputError("clip frame buffer does not match its shape");
  if (timestamps.size() != static_cast<std::size_t>(frames_count)) throw InputError("clip timestamp count mismatch");
  for (float v : frames)
    if (!(v >= 0.0f && v <= 1.0f)) throw InputError("clip intensity outside [0, 1]");
  for (int j = 0; j < frames_count; ++j)
    if (std::abs(timestamps[j] - j / fps) > 1e-9) throw InputError("clip timestamps are not uniform at 1/fps");
}

}  // namespace tvae
