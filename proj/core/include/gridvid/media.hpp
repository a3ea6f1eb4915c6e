#pragma once

#include <string>

#include "gridvid/video.hpp"

namespace gridvid::media {

// One frame as an 8-bit grayscale (1 channel) or RGB (3 channels) PNG.
void save_png(const std::string& path, const VideoTensor& video, size_t frame);

// Reads baseline non-interlaced 8-bit gray/RGB PNGs (the subset save_png
// writes, plus standard scanline filters) as a single-frame video.
VideoTensor load_png(const std::string& path);

// Every frame as dir/<stem>_NNN.png.
void export_frames_png(const std::string& dir, const VideoTensor& video,
                       const std::string& stem = "frame");

// Animated GIF89a, looping, delay in centiseconds. Grayscale palette for
// 1-channel video, a coarse color cube for 3-channel. Export only.
void save_gif(const std::string& path, const VideoTensor& video, size_t delay_cs = 25);

}  // namespace gridvid::media
