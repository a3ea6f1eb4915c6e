#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gridvid/tensor.hpp"

namespace gridvid {

// Parameter checkpoint file, little-endian binary:
//   magic "GDVA"
//   u32  format version (currently 1)
//   u32  tensor count
//   per tensor:
//     u32  name length, then UTF-8 name bytes
//     u32  rank
//     u64  extent per dimension
//     f64  row-major data
using NamedTensors = std::vector<std::pair<std::string, ad::Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensors& tensors);

// Loads values into the given tensors in place. Every name in `tensors` must
// be present in the file with a matching shape.
void load_checkpoint(const std::string& path, NamedTensors& tensors);

// Raw listing, for inspection tools.
struct RawTensor {
  std::string name;
  ad::Shape shape;
  std::vector<double> data;
};
std::vector<RawTensor> read_checkpoint(const std::string& path);

}  // namespace gridvid
