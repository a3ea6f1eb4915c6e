#include "gridvid/video.hpp"

#include <fstream>

#include "gridvid/serialize.hpp"

namespace gridvid {

namespace {
constexpr char kMagic[4] = {'G', 'D', 'V', 'V'};
}

void VideoTensor::validate() const {
  for (double p : pixels) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ContractError("VideoTensor: pixel value " + std::to_string(p) + " outside [0,1]");
    }
  }
}

void save_video(const std::string& path, const VideoTensor& v) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  io::write_magic(os, kMagic);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(v.frames));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(v.height));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(v.width));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(v.channels));
  for (double p : v.pixels) io::write_le<float>(os, static_cast<float>(p));
  if (!os) throw IoError("write failed for " + path);
}

VideoTensor load_video(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  io::expect_magic(is, kMagic, "video");
  const size_t l = io::read_le<uint32_t>(is);
  const size_t h = io::read_le<uint32_t>(is);
  const size_t w = io::read_le<uint32_t>(is);
  const size_t c = io::read_le<uint32_t>(is);
  VideoTensor v(l, h, w, c);
  for (auto& p : v.pixels) p = static_cast<double>(io::read_le<float>(is));
  return v;
}

}  // namespace gridvid
