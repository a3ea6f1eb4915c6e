#include "gridvid/checkpoint.hpp"

#include <fstream>
#include <map>

#include "gridvid/serialize.hpp"

namespace gridvid {

namespace {
constexpr char kMagic[4] = {'G', 'D', 'V', 'A'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  io::write_magic(os, kMagic);
  io::write_le<uint32_t>(os, kVersion);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    io::write_le<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::write_le<uint32_t>(os, static_cast<uint32_t>(t.shape().size()));
    for (size_t d : t.shape()) io::write_le<uint64_t>(os, d);
    for (double v : t.value()) io::write_le<double>(os, v);
  }
  if (!os) throw IoError("write failed for " + path);
}

std::vector<RawTensor> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  io::expect_magic(is, kMagic, "checkpoint");
  const uint32_t version = io::read_le<uint32_t>(is);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t count = io::read_le<uint32_t>(is);
  std::vector<RawTensor> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    RawTensor rt;
    const uint32_t name_len = io::read_le<uint32_t>(is);
    rt.name.resize(name_len);
    is.read(rt.name.data(), name_len);
    const uint32_t rank = io::read_le<uint32_t>(is);
    rt.shape.resize(rank);
    size_t n = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      rt.shape[d] = static_cast<size_t>(io::read_le<uint64_t>(is));
      n *= rt.shape[d];
    }
    rt.data.resize(n);
    for (size_t j = 0; j < n; ++j) rt.data[j] = io::read_le<double>(is);
    if (!is) throw IoError("truncated checkpoint " + path);
    out.push_back(std::move(rt));
  }
  return out;
}

void load_checkpoint(const std::string& path, NamedTensors& tensors) {
  auto raw = read_checkpoint(path);
  std::map<std::string, RawTensor*> by_name;
  for (auto& rt : raw) by_name[rt.name] = &rt;
  for (auto& [name, t] : tensors) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw IoError("checkpoint " + path + " is missing tensor '" + name + "'");
    }
    if (it->second->shape != t.shape()) {
      throw DimensionError("checkpoint tensor '" + name + "' has shape " +
                           ad::shape_str(it->second->shape) + ", expected " +
                           ad::shape_str(t.shape()));
    }
    auto dst = t.mutable_value();
    std::copy(it->second->data.begin(), it->second->data.end(), dst.begin());
  }
}

}  // namespace gridvid
