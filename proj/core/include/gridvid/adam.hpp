#pragma once

#include <vector>

#include "gridvid/tensor.hpp"

namespace gridvid::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam over a fixed parameter list. Parameters are leaf tensors
// updated in place; graphs built between steps see the updated values.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  void step();
  void zero_grad();
  void set_lr(double lr) { config_.lr = lr; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

}  // namespace gridvid::ad
