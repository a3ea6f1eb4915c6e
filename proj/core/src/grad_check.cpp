#include "gridvid/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "gridvid/ops.hpp"

namespace gridvid::ad {

double grad_check(const std::function<Tensor()>& build_loss, std::vector<Tensor> params,
                  double epsilon) {
  // Record stop-gradient outputs from the graph the backward pass will
  // differentiate; every probe below replays them, so the finite differences
  // measure the same (piecewise) function the analytic gradients describe.
  StopGradientTape tape;
  Tensor loss;
  {
    StopGradientTape::Recording recording(tape);
    loss = build_loss();
  }
  if (loss.size() != 1) {
    throw ContractError("grad_check: loss must be scalar, got " + shape_str(loss.shape()));
  }
  for (auto& p : params) p.zero_grad();
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    auto g = p.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(p.size(), 0.0);
  }

  const auto probe = [&]() {
    StopGradientTape::Replaying replaying(tape);
    return build_loss().item();
  };

  double max_rel = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto vals = params[pi].mutable_value();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + epsilon;
      const double fp = probe();
      vals[i] = saved - epsilon;
      const double fm = probe();
      vals[i] = saved;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace gridvid::ad
