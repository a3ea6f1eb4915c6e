#include "gridvid/token_grid.hpp"

#include <fstream>

#include "gridvid/serialize.hpp"

namespace gridvid {

namespace {
constexpr char kMagic[4] = {'G', 'D', 'T', 'K'};
constexpr uint32_t kVersion = 1;
}  // namespace

void TokenGrid::validate() const {
  for (int idx : indices) {
    if (idx < 0 || static_cast<size_t>(idx) >= vocab) {
      throw IndexError("TokenGrid: index " + std::to_string(idx) + " outside [0," +
                       std::to_string(vocab) + ")");
    }
  }
}

void save_token_grid(const std::string& path, const TokenGrid& grid) {
  grid.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  io::write_magic(os, kMagic);
  io::write_le<uint32_t>(os, kVersion);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(grid.frames));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(grid.rows));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(grid.cols));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(grid.vocab));
  for (int idx : grid.indices) io::write_le<uint32_t>(os, static_cast<uint32_t>(idx));
  if (!os) throw IoError("write failed for " + path);
}

TokenGrid load_token_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  io::expect_magic(is, kMagic, "token grid");
  const uint32_t version = io::read_le<uint32_t>(is);
  if (version != kVersion) {
    throw IoError("unsupported token grid version " + std::to_string(version));
  }
  const size_t l = io::read_le<uint32_t>(is);
  const size_t h = io::read_le<uint32_t>(is);
  const size_t w = io::read_le<uint32_t>(is);
  const size_t k = io::read_le<uint32_t>(is);
  TokenGrid grid(l, h, w, k);
  for (auto& idx : grid.indices) idx = static_cast<int>(io::read_le<uint32_t>(is));
  grid.validate();
  return grid;
}

}  // namespace gridvid
