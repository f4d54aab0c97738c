#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvae {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-length grayscale clip, frames stored frame-major (T x H x W).
struct EchoClip {
  int frames_count = 0;
  int height = 0;
  int width = 0;
  double fps = 12.0;
  std::vector<float> frames;
  std::vector<double> timestamps;

  EchoClip() = default;
  EchoClip(int t, int h, int w, double fps_value);

  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width; }
  std::span<float> frame(int j) { return {frames.data() + j * frame_size(), frame_size()}; }
  std::span<const float> frame(int j) const { return {frames.data() + j * frame_size(), frame_size()}; }

  /// Throws InputError unless intensities lie in [0, 1] and timestamps are j / fps.
  void validate() const;
  bool same_shape(const EchoClip& other) const {
    return frames_count == other.frames_count && height == other.height && width == other.width;
  }
};

/// Timestamps j / fps for j = 0..count-1.
std::vector<double> uniform_timestamps(int count, double fps);

}  // namespace tvae
