#pragma once

#include <functional>
#include <vector>

#include "gridvid/tensor.hpp"

namespace gridvid::ad {

// Compares analytic gradients against central finite differences
// (f(p+eps) - f(p-eps)) / (2*eps), coordinate by coordinate, over every
// parameter. `build_loss` must rebuild the graph from the parameters' current
// values and return a scalar. Stop-gradient outputs recorded on the first
// build are replayed into every probe, keeping the finite differences on the
// branch the backward pass differentiated. Returns the maximum relative error
// |a - n| / max(1e-6, |a| + |n|).
double grad_check(const std::function<Tensor()>& build_loss, std::vector<Tensor> params,
                  double epsilon);

}  // namespace gridvid::ad
