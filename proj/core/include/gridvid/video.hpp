#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gridvid/errors.hpp"

namespace gridvid {

// Real-valued pixel block, frames x height x width x channels, values in [0,1].
// Row-major: index (l, y, x, c).
struct VideoTensor {
  size_t frames = 0, height = 0, width = 0, channels = 0;
  std::vector<double> pixels;

  VideoTensor() = default;
  VideoTensor(size_t l, size_t h, size_t w, size_t c)
      : frames(l), height(h), width(w), channels(c), pixels(l * h * w * c, 0.0) {
    if (l < 1 || h < 1 || w < 1 || c < 1) throw DimensionError("VideoTensor: extents must be >= 1");
  }

  size_t frame_size() const { return height * width * channels; }

  double& at(size_t l, size_t y, size_t x, size_t c) {
    return pixels[((l * height + y) * width + x) * channels + c];
  }
  double at(size_t l, size_t y, size_t x, size_t c) const {
    return pixels[((l * height + y) * width + x) * channels + c];
  }

  const double* frame(size_t l) const { return pixels.data() + l * frame_size(); }
  double* frame(size_t l) { return pixels.data() + l * frame_size(); }

  // Throws ContractError if any pixel leaves [0,1].
  void validate() const;
};

// Raw binary video file: magic "GDVV", then L,H,W,C as u32, then f32 pixels
// in (frame, row, column, channel) order, little-endian.
void save_video(const std::string& path, const VideoTensor& v);
VideoTensor load_video(const std::string& path);

}  // namespace gridvid
