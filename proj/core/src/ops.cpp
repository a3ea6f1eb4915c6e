#include "gridvid/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridvid::ad {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void accumulate(const std::shared_ptr<Node>& p, size_t i, double v) {
  p->grad[i] += v;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_node(a.shape(), std::move(out), {a, b}, [a, b](Node& n) {
    for (auto& p : {a.node(), b.node()}) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) accumulate(p, i, n.grad[i]);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_node(a.shape(), std::move(out), {a, b}, [a, b](Node& n) {
    if (a.node()->requires_grad) {
      a.node()->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) accumulate(a.node(), i, n.grad[i]);
    }
    if (b.node()->requires_grad) {
      b.node()->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) accumulate(b.node(), i, -n.grad[i]);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_node(a.shape(), std::move(out), {a, b}, [a, b](Node& n) {
    if (a.node()->requires_grad) {
      a.node()->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) accumulate(a.node(), i, n.grad[i] * b.value()[i]);
    }
    if (b.node()->requires_grad) {
      b.node()->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) accumulate(b.node(), i, n.grad[i] * a.value()[i]);
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] > 0.0 ? x.value()[i] : 0.0;
  return make_node(x.shape(), std::move(out), {x}, [x](Node& n) {
    if (!x.node()->requires_grad) return;
    x.node()->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) {
      if (x.value()[i] > 0.0) accumulate(x.node(), i, n.grad[i]);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.value()[i]));
  return make_node(x.shape(), std::move(out), {x}, [x](Node& n) {
    if (!x.node()->requires_grad) return;
    x.node()->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) {
      double s = n.value[i];
      accumulate(x.node(), i, n.grad[i] * s * (1.0 - s));
    }
  });
}

Tensor scale(const Tensor& x, double c) {
  std::vector<double> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * c;
  return make_node(x.shape(), std::move(out), {x}, [x, c](Node& n) {
    if (!x.node()->requires_grad) return;
    x.node()->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) accumulate(x.node(), i, n.grad[i] * c);
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.shape().size() != 2 || bias.shape().size() != 1 || x.shape()[1] != bias.shape()[0]) {
    throw DimensionError("add_bias: x " + shape_str(x.shape()) + " bias " + shape_str(bias.shape()));
  }
  const size_t rows = x.shape()[0], cols = x.shape()[1];
  std::vector<double> out(x.size());
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c) out[r * cols + c] = x.value()[r * cols + c] + bias.value()[c];
  return make_node(x.shape(), std::move(out), {x, bias}, [x, bias, rows, cols](Node& n) {
    if (x.node()->requires_grad) {
      x.node()->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) accumulate(x.node(), i, n.grad[i]);
    }
    if (bias.node()->requires_grad) {
      bias.node()->ensure_grad();
      for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) accumulate(bias.node(), c, n.grad[r * cols + c]);
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.shape().size() != 3 || bias.shape().size() != 1 || x.shape()[2] != bias.shape()[0]) {
    throw DimensionError("add_channel_bias: x " + shape_str(x.shape()) + " bias " +
                         shape_str(bias.shape()));
  }
  const size_t hw = x.shape()[0] * x.shape()[1], C = x.shape()[2];
  std::vector<double> out(x.size());
  for (size_t p = 0; p < hw; ++p)
    for (size_t c = 0; c < C; ++c) out[p * C + c] = x.value()[p * C + c] + bias.value()[c];
  return make_node(x.shape(), std::move(out), {x, bias}, [x, bias, hw, C](Node& n) {
    if (x.node()->requires_grad) {
      x.node()->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) accumulate(x.node(), i, n.grad[i]);
    }
    if (bias.node()->requires_grad) {
      bias.node()->ensure_grad();
      for (size_t p = 0; p < hw; ++p)
        for (size_t c = 0; c < C; ++c) accumulate(bias.node(), c, n.grad[p * C + c]);
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const size_t m = a.shape()[0], k = a.shape()[1], nn = b.shape()[1];
  std::vector<double> out(m * nn, 0.0);
  for (size_t i = 0; i < m; ++i)
    for (size_t t = 0; t < k; ++t) {
      const double av = a.value()[i * k + t];
      if (av == 0.0) continue;
      for (size_t j = 0; j < nn; ++j) out[i * nn + j] += av * b.value()[t * nn + j];
    }
  return make_node({m, nn}, std::move(out), {a, b}, [a, b, m, k, nn](Node& n) {
    // dA = dC * B^T, dB = A^T * dC
    if (a.node()->requires_grad) {
      a.node()->ensure_grad();
      for (size_t i = 0; i < m; ++i)
        for (size_t t = 0; t < k; ++t) {
          double s = 0.0;
          for (size_t j = 0; j < nn; ++j) s += n.grad[i * nn + j] * b.value()[t * nn + j];
          accumulate(a.node(), i * k + t, s);
        }
    }
    if (b.node()->requires_grad) {
      b.node()->ensure_grad();
      for (size_t t = 0; t < k; ++t)
        for (size_t j = 0; j < nn; ++j) {
          double s = 0.0;
          for (size_t i = 0; i < m; ++i) s += a.value()[i * k + t] * n.grad[i * nn + j];
          accumulate(b.node(), t * nn + j, s);
        }
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[1]) {
    throw DimensionError("matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  }
  const size_t m = a.shape()[0], k = a.shape()[1], nn = b.shape()[0];
  std::vector<double> out(m * nn, 0.0);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < nn; ++j) {
      double s = 0.0;
      for (size_t t = 0; t < k; ++t) s += a.value()[i * k + t] * b.value()[j * k + t];
      out[i * nn + j] = s;
    }
  return make_node({m, nn}, std::move(out), {a, b}, [a, b, m, k, nn](Node& n) {
    if (a.node()->requires_grad) {
      a.node()->ensure_grad();
      for (size_t i = 0; i < m; ++i)
        for (size_t t = 0; t < k; ++t) {
          double s = 0.0;
          for (size_t j = 0; j < nn; ++j) s += n.grad[i * nn + j] * b.value()[j * k + t];
          accumulate(a.node(), i * k + t, s);
        }
    }
    if (b.node()->requires_grad) {
      b.node()->ensure_grad();
      for (size_t j = 0; j < nn; ++j)
        for (size_t t = 0; t < k; ++t) {
          double s = 0.0;
          for (size_t i = 0; i < m; ++i) s += n.grad[i * nn + j] * a.value()[i * k + t];
          accumulate(b.node(), j * k + t, s);
        }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.value().begin(), x.value().end());
  return make_node(std::move(shape), std::move(out), {x}, [x](Node& n) {
    if (!x.node()->requires_grad) return;
    x.node()->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) accumulate(x.node(), i, n.grad[i]);
  });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[1]) {
    throw DimensionError("concat_rows: " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
  }
  const size_t r1 = a.shape()[0], r2 = b.shape()[0], c = a.shape()[1];
  std::vector<double> out;
  out.reserve((r1 + r2) * c);
  out.insert(out.end(), a.value().begin(), a.value().end());
  out.insert(out.end(), b.value().begin(), b.value().end());
  return make_node({r1 + r2, c}, std::move(out), {a, b}, [a, b, r1, r2, c](Node& n) {
    if (a.node()->requires_grad) {
      a.node()->ensure_grad();
      for (size_t i = 0; i < r1 * c; ++i) accumulate(a.node(), i, n.grad[i]);
    }
    if (b.node()->requires_grad) {
      b.node()->ensure_grad();
      for (size_t i = 0; i < r2 * c; ++i) accumulate(b.node(), i, n.grad[r1 * c + i]);
    }
  });
}

Tensor masked_softmax(const Tensor& logits, const std::vector<uint8_t>& mask) {
  if (logits.shape().size() != 2 || mask.size() != logits.size()) {
    throw DimensionError("masked_softmax: logits " + shape_str(logits.shape()) + ", mask size " +
                         std::to_string(mask.size()));
  }
  const size_t rows = logits.shape()[0], cols = logits.shape()[1];
  std::vector<double> out(logits.size(), 0.0);
  for (size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < cols; ++c)
      if (mask[r * cols + c]) mx = std::max(mx, logits.value()[r * cols + c]);
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ContractError("masked_softmax: fully masked row " + std::to_string(r));
    }
    double z = 0.0;
    for (size_t c = 0; c < cols; ++c) {
      if (!mask[r * cols + c]) continue;
      double e = std::exp(logits.value()[r * cols + c] - mx);
      out[r * cols + c] = e;
      z += e;
    }
    for (size_t c = 0; c < cols; ++c)
      if (mask[r * cols + c]) out[r * cols + c] /= z;
  }
  return make_node(logits.shape(), std::move(out), {logits},
                   [logits, mask, rows, cols](Node& n) {
                     if (!logits.node()->requires_grad) return;
                     logits.node()->ensure_grad();
                     for (size_t r = 0; r < rows; ++r) {
                       double dot = 0.0;
                       for (size_t c = 0; c < cols; ++c)
                         dot += n.value[r * cols + c] * n.grad[r * cols + c];
                       for (size_t c = 0; c < cols; ++c) {
                         if (!mask[r * cols + c]) continue;
                         double p = n.value[r * cols + c];
                         accumulate(logits.node(), r * cols + c, p * (n.grad[r * cols + c] - dot));
                       }
                     }
                   });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.shape().size() != 2 || gain.shape() != Shape{x.shape()[1]} ||
      bias.shape() != Shape{x.shape()[1]}) {
    throw DimensionError("layer_norm: x " + shape_str(x.shape()));
  }
  const size_t rows = x.shape()[0], cols = x.shape()[1];
  std::vector<double> out(x.size());
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_sigma = std::make_shared<std::vector<double>>(rows);
  for (size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (size_t c = 0; c < cols; ++c) mu += x.value()[r * cols + c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (size_t c = 0; c < cols; ++c) {
      double d = x.value()[r * cols + c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[r] = is;
    for (size_t c = 0; c < cols; ++c) {
      double h = (x.value()[r * cols + c] - mu) * is;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = gain.value()[c] * h + bias.value()[c];
    }
  }
  return make_node(
      x.shape(), std::move(out), {x, gain, bias},
      [x, gain, bias, xhat, inv_sigma, rows, cols](Node& n) {
        if (gain.node()->requires_grad) {
          gain.node()->ensure_grad();
          for (size_t r = 0; r < rows; ++r)
            for (size_t c = 0; c < cols; ++c)
              accumulate(gain.node(), c, n.grad[r * cols + c] * (*xhat)[r * cols + c]);
        }
        if (bias.node()->requires_grad) {
          bias.node()->ensure_grad();
          for (size_t r = 0; r < rows; ++r)
            for (size_t c = 0; c < cols; ++c) accumulate(bias.node(), c, n.grad[r * cols + c]);
        }
        if (x.node()->requires_grad) {
          x.node()->ensure_grad();
          const double inv_cols = 1.0 / static_cast<double>(cols);
          for (size_t r = 0; r < rows; ++r) {
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (size_t c = 0; c < cols; ++c) {
              double dh = n.grad[r * cols + c] * gain.value()[c];
              mean_dh += dh;
              mean_dh_h += dh * (*xhat)[r * cols + c];
            }
            mean_dh *= inv_cols;
            mean_dh_h *= inv_cols;
            for (size_t c = 0; c < cols; ++c) {
              double dh = n.grad[r * cols + c] * gain.value()[c];
              double h = (*xhat)[r * cols + c];
              accumulate(x.node(), r * cols + c, (*inv_sigma)[r] * (dh - mean_dh - h * mean_dh_h));
            }
          }
        }
      });
}

Tensor embedding(const Tensor& table, std::vector<int> ids) {
  if (table.shape().size() != 2) {
    throw DimensionError("embedding: table " + shape_str(table.shape()));
  }
  const size_t V = table.shape()[0], D = table.shape()[1];
  for (int id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= V) {
      throw IndexError("embedding: id " + std::to_string(id) + " out of range [0," +
                       std::to_string(V) + ")");
    }
  }
  std::vector<double> out(ids.size() * D);
  for (size_t i = 0; i < ids.size(); ++i)
    for (size_t d = 0; d < D; ++d)
      out[i * D + d] = table.value()[static_cast<size_t>(ids[i]) * D + d];
  const size_t n_ids = ids.size();
  return make_node({n_ids, D}, std::move(out), {table},
                   [table, ids = std::move(ids), D](Node& n) {
                     if (!table.node()->requires_grad) return;
                     table.node()->ensure_grad();
                     for (size_t i = 0; i < ids.size(); ++i)
                       for (size_t d = 0; d < D; ++d)
                         accumulate(table.node(), static_cast<size_t>(ids[i]) * D + d,
                                    n.grad[i * D + d]);
                   });
}

Tensor cross_entropy(const Tensor& logits, std::vector<int> targets) {
  if (logits.shape().size() != 2 || targets.size() != logits.shape()[0]) {
    throw DimensionError("cross_entropy: logits " + shape_str(logits.shape()) + ", targets " +
                         std::to_string(targets.size()));
  }
  const size_t M = logits.shape()[0], K = logits.shape()[1];
  for (int t : targets) {
    if (t < 0 || static_cast<size_t>(t) >= K) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " out of range [0," +
                       std::to_string(K) + ")");
    }
  }
  auto probs = std::make_shared<std::vector<double>>(logits.size());
  double loss = 0.0;
  for (size_t i = 0; i < M; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < K; ++k) mx = std::max(mx, logits.value()[i * K + k]);
    double z = 0.0;
    for (size_t k = 0; k < K; ++k) z += std::exp(logits.value()[i * K + k] - mx);
    double logz = mx + std::log(z);
    loss += logz - logits.value()[i * K + static_cast<size_t>(targets[i])];
    for (size_t k = 0; k < K; ++k)
      (*probs)[i * K + k] = std::exp(logits.value()[i * K + k] - logz);
  }
  loss /= static_cast<double>(M);
  return make_node({1}, {loss}, {logits},
                   [logits, targets = std::move(targets), probs, M, K](Node& n) {
                     if (!logits.node()->requires_grad) return;
                     logits.node()->ensure_grad();
                     const double g = n.grad[0] / static_cast<double>(M);
                     for (size_t i = 0; i < M; ++i)
                       for (size_t k = 0; k < K; ++k) {
                         double d = (*probs)[i * K + k];
                         if (k == static_cast<size_t>(targets[i])) d -= 1.0;
                         accumulate(logits.node(), i * K + k, g * d);
                       }
                   });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  const double inv_n = 1.0 / static_cast<double>(a.size());
  return make_node({1}, {s * inv_n}, {a, b}, [a, b, inv_n](Node& n) {
    const double g = 2.0 * inv_n * n.grad[0];
    if (a.node()->requires_grad) {
      a.node()->ensure_grad();
      for (size_t i = 0; i < a.size(); ++i)
        accumulate(a.node(), i, g * (a.value()[i] - b.value()[i]));
    }
    if (b.node()->requires_grad) {
      b.node()->ensure_grad();
      for (size_t i = 0; i < b.size(); ++i)
        accumulate(b.node(), i, -g * (a.value()[i] - b.value()[i]));
    }
  });
}

Tensor sum_sq_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sum_sq_diff");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return make_node({1}, {s}, {a, b}, [a, b](Node& n) {
    const double g = 2.0 * n.grad[0];
    if (a.node()->requires_grad) {
      a.node()->ensure_grad();
      for (size_t i = 0; i < a.size(); ++i)
        accumulate(a.node(), i, g * (a.value()[i] - b.value()[i]));
    }
    if (b.node()->requires_grad) {
      b.node()->ensure_grad();
      for (size_t i = 0; i < b.size(); ++i)
        accumulate(b.node(), i, -g * (a.value()[i] - b.value()[i]));
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.value()) s += v;
  return make_node({1}, {s}, {x}, [x](Node& n) {
    if (!x.node()->requires_grad) return;
    x.node()->ensure_grad();
    for (size_t i = 0; i < x.size(); ++i) accumulate(x.node(), i, n.grad[0]);
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

namespace {
thread_local StopGradientTape* tl_sg_record = nullptr;
thread_local const StopGradientTape* tl_sg_replay = nullptr;
}  // namespace

StopGradientTape::Recording::Recording(StopGradientTape& tape) {
  if (tl_sg_record || tl_sg_replay)
    throw ContractError("a stop-gradient tape scope is already active");
  tape.values_.clear();
  tl_sg_record = &tape;
}

StopGradientTape::Recording::~Recording() { tl_sg_record = nullptr; }

StopGradientTape::Replaying::Replaying(const StopGradientTape& tape) {
  if (tl_sg_record || tl_sg_replay)
    throw ContractError("a stop-gradient tape scope is already active");
  tape.cursor_ = 0;
  tl_sg_replay = &tape;
}

StopGradientTape::Replaying::~Replaying() { tl_sg_replay = nullptr; }

Tensor stop_gradient(const Tensor& x) {
  if (tl_sg_replay != nullptr) {
    const auto& tape = *tl_sg_replay;
    if (tape.cursor_ >= tape.values_.size())
      throw ContractError("stop-gradient tape exhausted: rebuild took a different path");
    const auto& recorded = tape.values_[tape.cursor_++];
    if (recorded.size() != x.size())
      throw ContractError("stop-gradient tape shape mismatch: rebuild took a different path");
    return Tensor::from_data(x.shape(), std::vector<double>(recorded), false);
  }
  // Fresh leaf sharing the forward value; no parents, so nothing flows back.
  std::vector<double> out(x.value().begin(), x.value().end());
  if (tl_sg_record != nullptr) tl_sg_record->values_.push_back(out);
  return Tensor::from_data(x.shape(), std::move(out), false);
}

namespace {

struct ConvDims {
  size_t H, W, Cin, kh, kw, Cout, OH, OW;
};

ConvDims conv_dims(const Tensor& x, const Tensor& kernel, int stride, int pad) {
  if (x.shape().size() != 3 || kernel.shape().size() != 4) {
    throw DimensionError("conv2d: x " + shape_str(x.shape()) + " kernel " +
                         shape_str(kernel.shape()));
  }
  ConvDims d;
  d.H = x.shape()[0];
  d.W = x.shape()[1];
  d.Cin = x.shape()[2];
  d.kh = kernel.shape()[0];
  d.kw = kernel.shape()[1];
  if (kernel.shape()[2] != d.Cin) {
    throw DimensionError("conv2d: input channels " + std::to_string(d.Cin) +
                         " do not match kernel " + std::to_string(kernel.shape()[2]));
  }
  d.Cout = kernel.shape()[3];
  const long num_h = static_cast<long>(d.H) + 2 * pad - static_cast<long>(d.kh);
  const long num_w = static_cast<long>(d.W) + 2 * pad - static_cast<long>(d.kw);
  if (num_h < 0 || num_w < 0 || num_h % stride != 0 || num_w % stride != 0) {
    throw DimensionError("conv2d: extents " + shape_str(x.shape()) +
                         " incompatible with kernel/stride/pad");
  }
  d.OH = static_cast<size_t>(num_h / stride) + 1;
  d.OW = static_cast<size_t>(num_w / stride) + 1;
  return d;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int pad) {
  const ConvDims d = conv_dims(x, kernel, stride, pad);
  std::vector<double> out(d.OH * d.OW * d.Cout, 0.0);
  auto xv = x.value();
  auto kv = kernel.value();
  for (size_t oh = 0; oh < d.OH; ++oh)
    for (size_t ow = 0; ow < d.OW; ++ow)
      for (size_t u = 0; u < d.kh; ++u) {
        const long iy = static_cast<long>(oh) * stride - pad + static_cast<long>(u);
        if (iy < 0 || iy >= static_cast<long>(d.H)) continue;
        for (size_t v = 0; v < d.kw; ++v) {
          const long ix = static_cast<long>(ow) * stride - pad + static_cast<long>(v);
          if (ix < 0 || ix >= static_cast<long>(d.W)) continue;
          const double* xp = &xv[(static_cast<size_t>(iy) * d.W + static_cast<size_t>(ix)) * d.Cin];
          const double* kp = &kv[(u * d.kw + v) * d.Cin * d.Cout];
          double* op = &out[(oh * d.OW + ow) * d.Cout];
          for (size_t ci = 0; ci < d.Cin; ++ci)
            for (size_t co = 0; co < d.Cout; ++co) op[co] += xp[ci] * kp[ci * d.Cout + co];
        }
      }
  return make_node(
      {d.OH, d.OW, d.Cout}, std::move(out), {x, kernel}, [x, kernel, d, stride, pad](Node& n) {
        auto xv = x.value();
        auto kv = kernel.value();
        const bool dx = x.node()->requires_grad, dk = kernel.node()->requires_grad;
        if (dx) x.node()->ensure_grad();
        if (dk) kernel.node()->ensure_grad();
        for (size_t oh = 0; oh < d.OH; ++oh)
          for (size_t ow = 0; ow < d.OW; ++ow)
            for (size_t u = 0; u < d.kh; ++u) {
              const long iy = static_cast<long>(oh) * stride - pad + static_cast<long>(u);
              if (iy < 0 || iy >= static_cast<long>(d.H)) continue;
              for (size_t v = 0; v < d.kw; ++v) {
                const long ix = static_cast<long>(ow) * stride - pad + static_cast<long>(v);
                if (ix < 0 || ix >= static_cast<long>(d.W)) continue;
                const size_t xi = (static_cast<size_t>(iy) * d.W + static_cast<size_t>(ix)) * d.Cin;
                const size_t ki = (u * d.kw + v) * d.Cin * d.Cout;
                const double* gp = &n.grad[(oh * d.OW + ow) * d.Cout];
                for (size_t ci = 0; ci < d.Cin; ++ci)
                  for (size_t co = 0; co < d.Cout; ++co) {
                    if (dx) x.node()->grad[xi + ci] += gp[co] * kv[ki + ci * d.Cout + co];
                    if (dk) kernel.node()->grad[ki + ci * d.Cout + co] += xv[xi + ci] * gp[co];
                  }
              }
            }
      });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& kernel, int stride, int pad) {
  if (x.shape().size() != 3 || kernel.shape().size() != 4) {
    throw DimensionError("conv_transpose2d: x " + shape_str(x.shape()) + " kernel " +
                         shape_str(kernel.shape()));
  }
  const size_t h = x.shape()[0], w = x.shape()[1], Cout = x.shape()[2];
  const size_t kh = kernel.shape()[0], kw = kernel.shape()[1];
  const size_t Cin = kernel.shape()[2];
  if (kernel.shape()[3] != Cout) {
    throw DimensionError("conv_transpose2d: channels " + std::to_string(Cout) +
                         " do not match kernel " + std::to_string(kernel.shape()[3]));
  }
  const long out_h = static_cast<long>(stride) * (static_cast<long>(h) - 1) +
                     static_cast<long>(kh) - 2 * pad;
  const long out_w = static_cast<long>(stride) * (static_cast<long>(w) - 1) +
                     static_cast<long>(kw) - 2 * pad;
  if (out_h <= 0 || out_w <= 0) {
    throw DimensionError("conv_transpose2d: degenerate output extent");
  }
  const size_t H = static_cast<size_t>(out_h), W = static_cast<size_t>(out_w);
  std::vector<double> out(H * W * Cin, 0.0);
  auto xv = x.value();
  auto kv = kernel.value();
  for (size_t oh = 0; oh < h; ++oh)
    for (size_t ow = 0; ow < w; ++ow)
      for (size_t u = 0; u < kh; ++u) {
        const long y = static_cast<long>(oh) * stride - pad + static_cast<long>(u);
        if (y < 0 || y >= static_cast<long>(H)) continue;
        for (size_t v = 0; v < kw; ++v) {
          const long xx = static_cast<long>(ow) * stride - pad + static_cast<long>(v);
          if (xx < 0 || xx >= static_cast<long>(W)) continue;
          const double* xp = &xv[(oh * w + ow) * Cout];
          const double* kp = &kv[(u * kw + v) * Cin * Cout];
          double* op = &out[(static_cast<size_t>(y) * W + static_cast<size_t>(xx)) * Cin];
          for (size_t ci = 0; ci < Cin; ++ci)
            for (size_t co = 0; co < Cout; ++co) op[ci] += xp[co] * kp[ci * Cout + co];
        }
      }
  return make_node(
      {H, W, Cin}, std::move(out), {x, kernel},
      [x, kernel, h, w, Cout, kh, kw, Cin, H, W, stride, pad](Node& n) {
        auto xv = x.value();
        auto kv = kernel.value();
        const bool dx = x.node()->requires_grad, dk = kernel.node()->requires_grad;
        if (dx) x.node()->ensure_grad();
        if (dk) kernel.node()->ensure_grad();
        for (size_t oh = 0; oh < h; ++oh)
          for (size_t ow = 0; ow < w; ++ow)
            for (size_t u = 0; u < kh; ++u) {
              const long y = static_cast<long>(oh) * stride - pad + static_cast<long>(u);
              if (y < 0 || y >= static_cast<long>(H)) continue;
              for (size_t v = 0; v < kw; ++v) {
                const long xx = static_cast<long>(ow) * stride - pad + static_cast<long>(v);
                if (xx < 0 || xx >= static_cast<long>(W)) continue;
                const size_t xi = (oh * w + ow) * Cout;
                const size_t ki = (u * kw + v) * Cin * Cout;
                const double* gp = &n.grad[(static_cast<size_t>(y) * W + static_cast<size_t>(xx)) * Cin];
                for (size_t ci = 0; ci < Cin; ++ci)
                  for (size_t co = 0; co < Cout; ++co) {
                    if (dx) x.node()->grad[xi + co] += gp[ci] * kv[ki + ci * Cout + co];
                    if (dk) kernel.node()->grad[ki + ci * Cout + co] += xv[xi + co] * gp[ci];
                  }
              }
            }
      });
}

}  // namespace gridvid::ad
