#include "gridvid/media.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <zlib.h>

#include "gridvid/errors.hpp"

namespace gridvid::media {

namespace {

uint8_t to_byte(double v) {
  return uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void put_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

uint32_t get_be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<uint8_t>& data) {
  std::vector<uint8_t> head;
  put_be32(head, uint32_t(data.size()));
  out.write(reinterpret_cast<const char*>(head.data()), 4);
  out.write(type, 4);
  if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()), long(data.size()));
  uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), uInt(data.size()));
  std::vector<uint8_t> tail;
  put_be32(tail, uint32_t(crc));
  out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

constexpr uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

void save_png(const std::string& path, const VideoTensor& video, size_t frame) {
  if (frame >= video.frames) throw IoError("save_png: frame index out of range");
  if (video.channels != 1 && video.channels != 3)
    throw IoError("save_png: only 1- or 3-channel video is supported");
  const size_t w = video.width, h = video.height, c = video.channels;

  std::vector<uint8_t> raw;
  raw.reserve(h * (1 + w * c));
  for (size_t y = 0; y < h; ++y) {
    raw.push_back(0);  // per-scanline filter byte: none
    for (size_t x = 0; x < w; ++x)
      for (size_t ch = 0; ch < c; ++ch) raw.push_back(to_byte(video.at(frame, y, x, ch)));
  }

  uLongf bound = compressBound(uLong(raw.size()));
  std::vector<uint8_t> packed(bound);
  if (compress2(packed.data(), &bound, raw.data(), uLong(raw.size()), 9) != Z_OK)
    throw IoError("save_png: deflate failed");
  packed.resize(bound);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_png: cannot open " + path);
  out.write(reinterpret_cast<const char*>(kPngSig), 8);

  std::vector<uint8_t> ihdr;
  put_be32(ihdr, uint32_t(w));
  put_be32(ihdr, uint32_t(h));
  ihdr.push_back(8);                        // bit depth
  ihdr.push_back(c == 1 ? 0 : 2);           // gray / truecolor
  ihdr.push_back(0);                        // compression
  ihdr.push_back(0);                        // filter method
  ihdr.push_back(0);                        // no interlace
  write_chunk(out, "IHDR", ihdr);
  write_chunk(out, "IDAT", packed);
  write_chunk(out, "IEND", {});
  if (!out) throw IoError("save_png: write failed for " + path);
}

namespace {

uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return uint8_t(a);
  if (pb <= pc) return uint8_t(b);
  return uint8_t(c);
}

}  // namespace

VideoTensor load_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_png: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 8 + 25 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
    throw IoError("load_png: not a PNG file: " + path);

  size_t w = 0, h = 0, channels = 0;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    const uint32_t len = get_be32(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) throw IoError("load_png: truncated chunk in " + path);
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const uint8_t* data = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw IoError("load_png: bad IHDR");
      w = get_be32(data);
      h = get_be32(data + 4);
      const uint8_t depth = data[8], color = data[9], interlace = data[12];
      if (depth != 8 || interlace != 0 || (color != 0 && color != 2))
        throw IoError("load_png: unsupported format (need 8-bit gray/RGB, no interlace)");
      channels = color == 0 ? 1 : 3;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (w == 0 || h == 0 || idat.empty()) throw IoError("load_png: missing IHDR/IDAT in " + path);

  const size_t stride = w * channels;
  std::vector<uint8_t> raw(h * (1 + stride));
  uLongf raw_len = uLongf(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw IoError("load_png: inflate failed for " + path);

  // Undo per-scanline filters in place.
  std::vector<uint8_t> prior(stride, 0);
  VideoTensor video(1, h, w, channels);
  const size_t bpp = channels;
  for (size_t y = 0; y < h; ++y) {
    const uint8_t filter = raw[y * (1 + stride)];
    uint8_t* line = raw.data() + y * (1 + stride) + 1;
    for (size_t x = 0; x < stride; ++x) {
      const int a = x >= bpp ? line[x - bpp] : 0;
      const int b = prior[x];
      const int c = x >= bpp ? prior[x - bpp] : 0;
      switch (filter) {
        case 0: break;
        case 1: line[x] = uint8_t(line[x] + a); break;
        case 2: line[x] = uint8_t(line[x] + b); break;
        case 3: line[x] = uint8_t(line[x] + (a + b) / 2); break;
        case 4: line[x] = uint8_t(line[x] + paeth(a, b, c)); break;
        default: throw IoError("load_png: unknown scanline filter");
      }
    }
    std::copy(line, line + stride, prior.begin());
    for (size_t x = 0; x < w; ++x)
      for (size_t ch = 0; ch < channels; ++ch)
        video.at(0, y, x, ch) = double(line[x * channels + ch]) / 255.0;
  }
  return video;
}

void export_frames_png(const std::string& dir, const VideoTensor& video,
                       const std::string& stem) {
  std::filesystem::create_directories(dir);
  for (size_t l = 0; l < video.frames; ++l) {
    std::string num = std::to_string(l);
    while (num.size() < 3) num.insert(num.begin(), '0');
    save_png((std::filesystem::path(dir) / (stem + "_" + num + ".png")).string(), video, l);
  }
}

namespace {

void put_le16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v & 0xFF));
  out.push_back(uint8_t(v >> 8));
}

// Packs LZW codes of a fixed 9-bit width, least-significant bit first, into
// 255-byte sub-blocks. Emitting a clear code before the dictionary would
// outgrow 9 bits keeps the width fixed — valid, merely uncompressed.
class GifCodeStream {
 public:
  void put(uint16_t code) {
    acc_ |= uint32_t(code) << bits_;
    bits_ += 9;
    while (bits_ >= 8) {
      bytes_.push_back(uint8_t(acc_ & 0xFF));
      acc_ >>= 8;
      bits_ -= 8;
    }
  }
  std::vector<uint8_t> finish() {
    if (bits_ > 0) bytes_.push_back(uint8_t(acc_ & 0xFF));
    std::vector<uint8_t> out;
    size_t i = 0;
    while (i < bytes_.size()) {
      const size_t n = std::min<size_t>(255, bytes_.size() - i);
      out.push_back(uint8_t(n));
      out.insert(out.end(), bytes_.begin() + long(i), bytes_.begin() + long(i + n));
      i += n;
    }
    out.push_back(0);  // block terminator
    return out;
  }

 private:
  std::vector<uint8_t> bytes_;
  uint32_t acc_ = 0;
  size_t bits_ = 0;
};

}  // namespace

void save_gif(const std::string& path, const VideoTensor& video, size_t delay_cs) {
  if (video.channels != 1 && video.channels != 3)
    throw IoError("save_gif: only 1- or 3-channel video is supported");
  const size_t w = video.width, h = video.height;
  if (w > 0xFFFF || h > 0xFFFF) throw IoError("save_gif: frame too large");

  std::vector<uint8_t> out;
  out.insert(out.end(), {'G', 'I', 'F', '8', '9', 'a'});
  put_le16(out, uint16_t(w));
  put_le16(out, uint16_t(h));
  out.push_back(0xF7);  // global palette, 256 entries, 8-bit color resolution
  out.push_back(0);     // background index
  out.push_back(0);     // aspect

  // Palette: 256 grays, or a 6x7x6 color cube padded to 256.
  const bool gray = video.channels == 1;
  for (size_t i = 0; i < 256; ++i) {
    if (gray) {
      out.insert(out.end(), {uint8_t(i), uint8_t(i), uint8_t(i)});
    } else if (i < 252) {
      const size_t r = i / 42, g = (i / 6) % 7, b = i % 6;
      out.push_back(uint8_t(r * 51));
      out.push_back(uint8_t(g * 42 + (g == 6 ? 3 : 0)));
      out.push_back(uint8_t(b * 51));
    } else {
      out.insert(out.end(), {0, 0, 0});
    }
  }

  // Loop forever.
  out.insert(out.end(), {0x21, 0xFF, 0x0B});
  const char* app = "NETSCAPE2.0";
  out.insert(out.end(), app, app + 11);
  out.insert(out.end(), {0x03, 0x01, 0x00, 0x00, 0x00});

  for (size_t l = 0; l < video.frames; ++l) {
    out.insert(out.end(), {0x21, 0xF9, 0x04, 0x04});
    put_le16(out, uint16_t(delay_cs));
    out.insert(out.end(), {0x00, 0x00});  // no transparency

    out.push_back(0x2C);  // image descriptor
    put_le16(out, 0);
    put_le16(out, 0);
    put_le16(out, uint16_t(w));
    put_le16(out, uint16_t(h));
    out.push_back(0);  // no local palette

    out.push_back(8);  // LZW minimum code size
    GifCodeStream codes;
    constexpr uint16_t kClear = 256, kEnd = 257;
    codes.put(kClear);
    size_t since_clear = 0;
    for (size_t y = 0; y < h; ++y)
      for (size_t x = 0; x < w; ++x) {
        uint8_t index;
        if (gray) {
          index = to_byte(video.at(l, y, x, 0));
        } else {
          const size_t r = std::min<size_t>(5, size_t(video.at(l, y, x, 0) * 6.0));
          const size_t g = std::min<size_t>(6, size_t(video.at(l, y, x, 1) * 7.0));
          const size_t b = std::min<size_t>(5, size_t(video.at(l, y, x, 2) * 6.0));
          index = uint8_t(r * 42 + g * 6 + b);
        }
        codes.put(index);
        if (++since_clear == 250) {
          codes.put(kClear);
          since_clear = 0;
        }
      }
    codes.put(kEnd);
    const auto blocks = codes.finish();
    out.insert(out.end(), blocks.begin(), blocks.end());
  }
  out.push_back(0x3B);  // trailer

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("save_gif: cannot open " + path);
  file.write(reinterpret_cast<const char*>(out.data()), long(out.size()));
  if (!file) throw IoError("save_gif: write failed for " + path);
}

}  // namespace gridvid::media
