// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "robustnmt/error.hpp"
#include "robustnmt/kernels.hpp"

namespace robustnmt::ops {
namespace {

using kern::active;

// B^T for a row-major [rows, cols] matrix.
std::vector<double> transposed(const double* in, std::size_t rows, std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
  return out;
}

// out[k,n] += a^T * d, a [m,k], d [m,n]. Same fixed accumulation order
// property as gemm_accum: only axpy underneath.
void gemm_tn_accum(const double* a, const double* d, double* out, std::size_t m,
                   std::size_t k, std::size_t n) {
  const auto& K = active();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) K.axpy(a[i * k + l], d + i * n, out + l * n, n);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

Tensor make_output(std::vector<std::size_t> shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

// Interprets [n] and [m,n] uniformly as rows for the row-wise ops.
void as_rows(const Tensor& x, const char* op, std::size_t& m, std::size_t& n) {
  const auto& s = x.shape();
  require(s.size() == 1 || s.size() == 2,
          std::string(op) + ": expected a vector or matrix, got " + x.shape_str());
  m = s.size() == 2 ? s[0] : 1;
  n = s.back();
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require(a.shape().size() == 2 && b.shape().size() == 2 && a.shape()[1] == b.shape()[0],
          "matmul: cannot multiply " + a.shape_str() + " by " + b.shape_str());
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out = make_output({m, n}, a.requires_grad() || b.requires_grad());
  kern::gemm_accum(a.values().data(), b.values().data(), out.values().data(), m, k, n);
  TensorNode *an = a.node(), *bn = b.node(), *on = out.node();
  tape.record("matmul", {a, b}, out, [an, bn, on, m, k, n] {
    if (on->grad.empty()) return;
    const double* d = on->grad.data();
    if (!an->grad.empty()) {
      std::vector<double> bt = transposed(bn->values.data(), k, n);
      kern::gemm_accum(d, bt.data(), an->grad.data(), m, n, k);
    }
    if (!bn->grad.empty()) gemm_tn_accum(an->values.data(), d, bn->grad.data(), m, k, n);
  });
  return out;
}

Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  require(a.shape().size() == 2 && b.shape().size() == 2 && a.shape()[1] == b.shape()[1],
          "matmul_nt: cannot multiply " + a.shape_str() + " by transpose of " + b.shape_str());
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  Tensor out = make_output({m, n}, a.requires_grad() || b.requires_grad());
  std::vector<double> bt = transposed(b.values().data(), n, k);  // [k,n]
  kern::gemm_accum(a.values().data(), bt.data(), out.values().data(), m, k, n);
  TensorNode *an = a.node(), *bn = b.node(), *on = out.node();
  tape.record("matmul_nt", {a, b}, out, [an, bn, on, m, k, n] {
    if (on->grad.empty()) return;
    const double* d = on->grad.data();
    if (!an->grad.empty())
      kern::gemm_accum(d, bn->values.data(), an->grad.data(), m, n, k);
    if (!bn->grad.empty()) gemm_tn_accum(d, an->values.data(), bn->grad.data(), m, n, k);
  });
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const bool rg = a.requires_grad() || b.requires_grad();
  TensorNode *an = a.node(), *bn = b.node();

  if (same_shape(a, b)) {
    Tensor out = make_output(a.shape(), rg);
    active().vadd(a.values().data(), b.values().data(), out.values().data(), a.numel());
    TensorNode* on = out.node();
    tape.record("add", {a, b}, out, [an, bn, on] {
      if (on->grad.empty()) return;
      const auto& K = active();
      if (!an->grad.empty()) K.axpy(1.0, on->grad.data(), an->grad.data(), on->grad.size());
      if (!bn->grad.empty()) K.axpy(1.0, on->grad.data(), bn->grad.data(), on->grad.size());
    });
    return out;
  }

  require(a.shape().size() == 2,
          "add: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
  const std::size_t m = a.shape()[0], n = a.shape()[1];

  if (b.shape().size() == 1 && b.shape()[0] == n) {  // row broadcast
    Tensor out = make_output({m, n}, rg);
    for (std::size_t i = 0; i < m; ++i)
      active().vadd(a.values().data() + i * n, b.values().data(),
                    out.values().data() + i * n, n);
    TensorNode* on = out.node();
    tape.record("add", {a, b}, out, [an, bn, on, m, n] {
      if (on->grad.empty()) return;
      const auto& K = active();
      if (!an->grad.empty()) K.axpy(1.0, on->grad.data(), an->grad.data(), m * n);
      if (!bn->grad.empty())
        for (std::size_t i = 0; i < m; ++i)
          K.axpy(1.0, on->grad.data() + i * n, bn->grad.data(), n);
    });
    return out;
  }

  if (b.shape().size() == 2 && b.shape()[0] == m && b.shape()[1] == 1) {  // column broadcast
    Tensor out = make_output({m, n}, rg);
    for (std::size_t i = 0; i < m; ++i) {
      const double c = b.values()[i];
      for (std::size_t j = 0; j < n; ++j) out.values()[i * n + j] = a.values()[i * n + j] + c;
    }
    TensorNode* on = out.node();
    tape.record("add", {a, b}, out, [an, bn, on, m, n] {
      if (on->grad.empty()) return;
      if (!an->grad.empty()) active().axpy(1.0, on->grad.data(), an->grad.data(), m * n);
      if (!bn->grad.empty())
        for (std::size_t i = 0; i < m; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += on->grad[i * n + j];
          bn->grad[i] += s;
        }
    });
    return out;
  }

  throw ShapeError("add: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require(same_shape(a, b),
          "sub: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
  Tensor out = make_output(a.shape(), a.requires_grad() || b.requires_grad());
  active().vsub(a.values().data(), b.values().data(), out.values().data(), a.numel());
  TensorNode *an = a.node(), *bn = b.node(), *on = out.node();
  tape.record("sub", {a, b}, out, [an, bn, on] {
    if (on->grad.empty()) return;
    const auto& K = active();
    if (!an->grad.empty()) K.axpy(1.0, on->grad.data(), an->grad.data(), on->grad.size());
    if (!bn->grad.empty()) K.axpy(-1.0, on->grad.data(), bn->grad.data(), on->grad.size());
  });
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  const bool rg = a.requires_grad() || b.requires_grad();
  TensorNode *an = a.node(), *bn = b.node();

  if (same_shape(a, b)) {
    Tensor out = make_output(a.shape(), rg);
    active().vmul(a.values().data(), b.values().data(), out.values().data(), a.numel());
    TensorNode* on = out.node();
    tape.record("mul", {a, b}, out, [an, bn, on] {
      if (on->grad.empty()) return;
      const auto& K = active();
      if (!an->grad.empty())
        K.vfma(on->grad.data(), bn->values.data(), an->grad.data(), on->grad.size());
      if (!bn->grad.empty())
        K.vfma(on->grad.data(), an->values.data(), bn->grad.data(), on->grad.size());
    });
    return out;
  }

  require(a.shape().size() == 2 && b.shape().size() == 2 && b.shape()[0] == a.shape()[0] &&
              b.shape()[1] == 1,
          "mul: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out = make_output({m, n}, rg);
  for (std::size_t i = 0; i < m; ++i)
    active().vscale(a.values().data() + i * n, b.values()[i], out.values().data() + i * n, n);
  TensorNode* on = out.node();
  tape.record("mul", {a, b}, out, [an, bn, on, m, n] {
    if (on->grad.empty()) return;
    const auto& K = active();
    for (std::size_t i = 0; i < m; ++i) {
      const double* d = on->grad.data() + i * n;
      if (!an->grad.empty()) K.axpy(bn->values[i], d, an->grad.data() + i * n, n);
      if (!bn->grad.empty()) bn->grad[i] += K.dot(d, an->values.data() + i * n, n);
    }
  });
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, double c) {
  Tensor out = make_output(x.shape(), x.requires_grad());
  active().vscale(x.values().data(), c, out.values().data(), x.numel());
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("scale", {x}, out, [xn, on, c] {
    if (on->grad.empty() || xn->grad.empty()) return;
    active().axpy(c, on->grad.data(), xn->grad.data(), on->grad.size());
  });
  return out;
}

Tensor shift(Tape& tape, const Tensor& x, double c) {
  Tensor out = make_output(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < x.numel(); ++i) out.values()[i] = x.values()[i] + c;
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("shift", {x}, out, [xn, on] {
    if (on->grad.empty() || xn->grad.empty()) return;
    active().axpy(1.0, on->grad.data(), xn->grad.data(), on->grad.size());
  });
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  Tensor out = make_output(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < x.numel(); ++i)
    out.values()[i] = 1.0 / (1.0 + std::exp(-x.values()[i]));
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("sigmoid", {x}, out, [xn, on] {
    if (on->grad.empty() || xn->grad.empty()) return;
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      const double y = on->values[i];
      xn->grad[i] += on->grad[i] * y * (1.0 - y);
    }
  });
  return out;
}

Tensor tanh(Tape& tape, const Tensor& x) {
  Tensor out = make_output(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < x.numel(); ++i) out.values()[i] = std::tanh(x.values()[i]);
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("tanh", {x}, out, [xn, on] {
    if (on->grad.empty() || xn->grad.empty()) return;
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      const double y = on->values[i];
      xn->grad[i] += on->grad[i] * (1.0 - y * y);
    }
  });
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  Tensor out = make_output(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < x.numel(); ++i)
    out.values()[i] = x.values()[i] > 0.0 ? x.values()[i] : 0.0;
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("relu", {x}, out, [xn, on] {
    if (on->grad.empty() || xn->grad.empty()) return;
    for (std::size_t i = 0; i < on->grad.size(); ++i)
      if (xn->values[i] > 0.0) xn->grad[i] += on->grad[i];
  });
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x) {
  std::size_t m = 0, n = 0;
  as_rows(x, "softmax", m, n);
  Tensor out = make_output(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = x.values().data() + i * n;
    double* yr = out.values().data() + i * n;
    double mx = xr[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      s += yr[j];
    }
    for (std::size_t j = 0; j < n; ++j) yr[j] /= s;
  }
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("softmax", {x}, out, [xn, on, m, n] {
    if (on->grad.empty() || xn->grad.empty()) return;
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = on->values.data() + i * n;
      const double* d = on->grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += d[j] * y[j];
      double* g = xn->grad.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) g[j] += y[j] * (d[j] - dot);
    }
  });
  return out;
}

Tensor log_softmax(Tape& tape, const Tensor& x) {
  std::size_t m = 0, n = 0;
  as_rows(x, "log_softmax", m, n);
  Tensor out = make_output(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = x.values().data() + i * n;
    double* yr = out.values().data() + i * n;
    double mx = xr[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(xr[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) yr[j] = xr[j] - lse;
  }
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("log_softmax", {x}, out, [xn, on, m, n] {
    if (on->grad.empty() || xn->grad.empty()) return;
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = on->values.data() + i * n;
      const double* d = on->grad.data() + i * n;
      double sd = 0.0;
      for (std::size_t j = 0; j < n; ++j) sd += d[j];
      double* g = xn->grad.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) g[j] += d[j] - std::exp(y[j]) * sd;
    }
  });
  return out;
}

Tensor embedding_gather(Tape& tape, const Tensor& table,
                        const std::vector<std::int32_t>& ids) {
  require(table.shape().size() == 2,
          "embedding_gather: table must be 2-D, got " + table.shape_str());
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  if (ids.empty()) throw ShapeError("embedding_gather: empty id list");
  for (std::int32_t id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw DataError("embedding_gather: id " + std::to_string(id) +
                      " outside table of " + std::to_string(v) + " rows");
  Tensor out = make_output({ids.size(), d}, table.requires_grad());
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::memcpy(out.values().data() + i * d,
                table.values().data() + static_cast<std::size_t>(ids[i]) * d,
                d * sizeof(double));
  TensorNode *tn = table.node(), *on = out.node();
  tape.record("embedding_gather", {table}, out, [tn, on, ids, d] {
    if (on->grad.empty() || tn->grad.empty()) return;
    for (std::size_t i = 0; i < ids.size(); ++i)
      active().axpy(1.0, on->grad.data() + i * d,
                    tn->grad.data() + static_cast<std::size_t>(ids[i]) * d, d);
  });
  return out;
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat: no inputs");
  const std::size_t m = parts[0].shape().size() == 2 ? parts[0].shape()[0] : 0;
  std::size_t total = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    require(p.shape().size() == 2 && p.shape()[0] == m,
            "concat: expected [" + std::to_string(m) + ", *], got " + p.shape_str());
    total += p.shape()[1];
    rg = rg || p.requires_grad();
  }
  Tensor out = make_output({m, total}, rg);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t n = p.shape()[1];
    for (std::size_t i = 0; i < m; ++i)
      std::memcpy(out.values().data() + i * total + off, p.values().data() + i * n,
                  n * sizeof(double));
    off += n;
  }
  std::vector<TensorNode*> nodes;
  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(p.shape()[1]);
  }
  TensorNode* on = out.node();
  tape.record("concat", parts, out, [nodes, widths, on, m, total] {
    if (on->grad.empty()) return;
    std::size_t off = 0;
    for (std::size_t p = 0; p < nodes.size(); ++p) {
      const std::size_t n = widths[p];
      if (!nodes[p]->grad.empty())
        for (std::size_t i = 0; i < m; ++i)
          active().axpy(1.0, on->grad.data() + i * total + off,
                        nodes[p]->grad.data() + i * n, n);
      off += n;
    }
  });
  return out;
}

Tensor concat(Tape& tape, const Tensor& a, const Tensor& b) {
  return concat(tape, std::vector<Tensor>{a, b});
}

Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t c0, std::size_t c1) {
  require(x.shape().size() == 2, "slice_cols: expected a matrix, got " + x.shape_str());
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  require(c0 < c1 && c1 <= n, "slice_cols: window [" + std::to_string(c0) + ", " +
                                  std::to_string(c1) + ") outside " + x.shape_str());
  const std::size_t w = c1 - c0;
  Tensor out = make_output({m, w}, x.requires_grad());
  for (std::size_t i = 0; i < m; ++i)
    std::memcpy(out.values().data() + i * w, x.values().data() + i * n + c0,
                w * sizeof(double));
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("slice_cols", {x}, out, [xn, on, m, n, c0, w] {
    if (on->grad.empty() || xn->grad.empty()) return;
    for (std::size_t i = 0; i < m; ++i)
      active().axpy(1.0, on->grad.data() + i * w, xn->grad.data() + i * n + c0, w);
  });
  return out;
}

Tensor stack_time(Tape& tape, const std::vector<Tensor>& steps) {
  require(!steps.empty(), "stack_time: no inputs");
  const auto& s0 = steps[0].shape();
  require(s0.size() == 2, "stack_time: expected [B, H] inputs, got " + steps[0].shape_str());
  const std::size_t b = s0[0], h = s0[1], m = steps.size();
  bool rg = false;
  for (const Tensor& t : steps) {
    require(t.shape() == s0, "stack_time: mismatched step shapes " + steps[0].shape_str() +
                                 " and " + t.shape_str());
    rg = rg || t.requires_grad();
  }
  Tensor out = make_output({b, m, h}, rg);
  for (std::size_t t = 0; t < m; ++t)
    for (std::size_t i = 0; i < b; ++i)
      std::memcpy(out.values().data() + (i * m + t) * h, steps[t].values().data() + i * h,
                  h * sizeof(double));
  std::vector<TensorNode*> nodes;
  for (const Tensor& t : steps) nodes.push_back(t.node());
  TensorNode* on = out.node();
  tape.record("stack_time", steps, out, [nodes, on, b, m, h] {
    if (on->grad.empty()) return;
    for (std::size_t t = 0; t < m; ++t) {
      if (nodes[t]->grad.empty()) continue;
      for (std::size_t i = 0; i < b; ++i)
        active().axpy(1.0, on->grad.data() + (i * m + t) * h, nodes[t]->grad.data() + i * h,
                      h);
    }
  });
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, std::vector<std::size_t> shape) {
  require(shape_numel(shape) == x.numel(), "reshape: cannot view " + x.shape_str() + " as " +
                                               shape_to_string(shape));
  Tensor out = Tensor::from(std::move(shape), x.values(), x.requires_grad());
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("reshape", {x}, out, [xn, on] {
    if (on->grad.empty() || xn->grad.empty()) return;
    active().axpy(1.0, on->grad.data(), xn->grad.data(), on->grad.size());
  });
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::scalar(active().vsum(x.values().data(), x.numel()));
  out.node()->requires_grad = x.requires_grad();
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("sum", {x}, out, [xn, on] {
    if (on->grad.empty() || xn->grad.empty()) return;
    const double g = on->grad[0];
    for (double& v : xn->grad) v += g;
  });
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.numel());
  Tensor out = Tensor::scalar(active().vsum(x.values().data(), x.numel()) * inv);
  out.node()->requires_grad = x.requires_grad();
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("mean", {x}, out, [xn, on, inv] {
    if (on->grad.empty() || xn->grad.empty()) return;
    const double g = on->grad[0] * inv;
    for (double& v : xn->grad) v += g;
  });
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  require(x.shape().size() == 2, "layer_norm: expected a matrix, got " + x.shape_str());
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  require(gamma.shape() == std::vector<std::size_t>{n} &&
              beta.shape() == std::vector<std::size_t>{n},
          "layer_norm: affine parameters " + gamma.shape_str() + ", " + beta.shape_str() +
              " do not match row width of " + x.shape_str());
  constexpr double kVarFloor = 1e-6;
  Tensor out =
      make_output({m, n}, x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  auto inv = std::make_shared<std::vector<double>>(m);
  auto floored = std::make_shared<std::vector<char>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = x.values().data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xr[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(n);
    (*floored)[i] = var < kVarFloor ? 1 : 0;
    const double iv = 1.0 / std::sqrt(std::max(var, kVarFloor));
    (*inv)[i] = iv;
    double* xh = xhat->data() + i * n;
    double* yr = out.values().data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      xh[j] = (xr[j] - mu) * iv;
      yr[j] = gamma.values()[j] * xh[j] + beta.values()[j];
    }
  }
  TensorNode *xn = x.node(), *gn = gamma.node(), *bn = beta.node(), *on = out.node();
  tape.record("layer_norm", {x, gamma, beta}, out, [xn, gn, bn, on, xhat, inv, floored, m, n] {
    if (on->grad.empty()) return;
    for (std::size_t i = 0; i < m; ++i) {
      const double* d = on->grad.data() + i * n;
      const double* xh = xhat->data() + i * n;
      if (!gn->grad.empty())
        for (std::size_t j = 0; j < n; ++j) gn->grad[j] += d[j] * xh[j];
      if (!bn->grad.empty())
        for (std::size_t j = 0; j < n; ++j) bn->grad[j] += d[j];
      if (xn->grad.empty()) continue;
      // dxhat = d * gamma; mean terms give the centering and (when the
      // variance was not floored) the rescaling corrections.
      double mean_dxh = 0.0, mean_dxh_xh = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double dxh = d[j] * gn->values[j];
        mean_dxh += dxh;
        mean_dxh_xh += dxh * xh[j];
      }
      mean_dxh /= static_cast<double>(n);
      mean_dxh_xh /= static_cast<double>(n);
      double* g = xn->grad.data() + i * n;
      const double iv = (*inv)[i];
      const bool fl = (*floored)[i] != 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double dxh = d[j] * gn->values[j];
        double dx = dxh - mean_dxh;
        if (!fl) dx -= xh[j] * mean_dxh_xh;
        g[j] += iv * dx;
      }
    }
  });
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double p, RngStream& rng, bool train) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(p));
  if (!train || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  for (double& v : *mask) v = rng.next_double() >= p ? keep_scale : 0.0;
  Tensor out = make_output(x.shape(), x.requires_grad());
  active().vmul(x.values().data(), mask->data(), out.values().data(), x.numel());
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("dropout", {x}, out, [xn, on, mask] {
    if (on->grad.empty() || xn->grad.empty()) return;
    active().vfma(on->grad.data(), mask->data(), xn->grad.data(), on->grad.size());
  });
  return out;
}

Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  require(x.shape().size() == 3, "conv1d: input must be [B, M, D], got " + x.shape_str());
  require(kernel.shape().size() == 3,
          "conv1d: kernel must be [C, W, D], got " + kernel.shape_str());
  const std::size_t b = x.shape()[0], m = x.shape()[1], d = x.shape()[2];
  const std::size_t c = kernel.shape()[0], w = kernel.shape()[1];
  require(kernel.shape()[2] == d, "conv1d: kernel depth of " + kernel.shape_str() +
                                      " does not match input " + x.shape_str());
  require(bias.shape() == std::vector<std::size_t>{c},
          "conv1d: bias " + bias.shape_str() + " does not match " +
              std::to_string(c) + " kernel channels");
  require(m >= w, "conv1d: input " + x.shape_str() + " shorter than kernel window of " +
                      std::to_string(w));
  const std::size_t p = m - w + 1;
  const std::size_t win = w * d;
  Tensor out = make_output(
      {b, p, c}, x.requires_grad() || kernel.requires_grad() || bias.requires_grad());
  for (std::size_t ib = 0; ib < b; ++ib)
    for (std::size_t ip = 0; ip < p; ++ip) {
      // Window rows ip..ip+w-1 of one batch element are contiguous, as is
      // each kernel channel, so the window response is a single dot product.
      const double* xwin = x.values().data() + (ib * m + ip) * d;
      double* orow = out.values().data() + (ib * p + ip) * c;
      for (std::size_t ic = 0; ic < c; ++ic)
        orow[ic] = bias.values()[ic] +
                   active().dot(xwin, kernel.values().data() + ic * win, win);
    }
  TensorNode *xn = x.node(), *kn = kernel.node(), *bn = bias.node(), *on = out.node();
  tape.record("conv1d", {x, kernel, bias}, out, [xn, kn, bn, on, b, m, d, c, p, win] {
    if (on->grad.empty()) return;
    for (std::size_t ib = 0; ib < b; ++ib)
      for (std::size_t ip = 0; ip < p; ++ip) {
        const double* drow = on->grad.data() + (ib * p + ip) * c;
        const std::size_t xoff = (ib * m + ip) * d;
        for (std::size_t ic = 0; ic < c; ++ic) {
          const double g = drow[ic];
          if (!bn->grad.empty()) bn->grad[ic] += g;
          if (!kn->grad.empty())
            active().axpy(g, xn->values.data() + xoff, kn->grad.data() + ic * win, win);
          if (!xn->grad.empty())
            active().axpy(g, kn->values.data() + ic * win, xn->grad.data() + xoff, win);
        }
      }
  });
  return out;
}

Tensor max_over_time(Tape& tape, const Tensor& x, const std::vector<std::size_t>& valid) {
  require(x.shape().size() == 3, "max_over_time: input must be [B, P, C], got " + x.shape_str());
  const std::size_t b = x.shape()[0], p = x.shape()[1], c = x.shape()[2];
  require(valid.size() == b, "max_over_time: " + std::to_string(valid.size()) +
                                 " window lengths for input " + x.shape_str());
  for (std::size_t len : valid)
    require(len >= 1 && len <= p, "max_over_time: window length " + std::to_string(len) +
                                      " outside input " + x.shape_str());
  Tensor out = make_output({b, c}, x.requires_grad());
  auto argmax = std::make_shared<std::vector<std::size_t>>(b * c);
  for (std::size_t ib = 0; ib < b; ++ib)
    for (std::size_t ic = 0; ic < c; ++ic) {
      std::size_t best = 0;
      double bv = x.values()[(ib * p) * c + ic];
      for (std::size_t ip = 1; ip < valid[ib]; ++ip) {
        const double v = x.values()[(ib * p + ip) * c + ic];
        if (v > bv) {  // strict: ties keep the earliest position
          bv = v;
          best = ip;
        }
      }
      out.values()[ib * c + ic] = bv;
      (*argmax)[ib * c + ic] = best;
    }
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("max_over_time", {x}, out, [xn, on, argmax, b, p, c] {
    if (on->grad.empty() || xn->grad.empty()) return;
    for (std::size_t ib = 0; ib < b; ++ib)
      for (std::size_t ic = 0; ic < c; ++ic)
        xn->grad[(ib * p + (*argmax)[ib * c + ic]) * c + ic] += on->grad[ib * c + ic];
  });
  return out;
}

Tensor binary_cross_entropy(Tape& tape, const Tensor& probs,
                            const std::vector<double>& targets) {
  require(targets.size() == probs.numel(),
          "binary_cross_entropy: " + std::to_string(targets.size()) + " targets for input " +
              probs.shape_str());
  for (double t : targets)
    if (t != 0.0 && t != 1.0)
      throw NumericalError("binary_cross_entropy: targets must be 0 or 1, got " +
                           std::to_string(t));
  constexpr double kClamp = 1e-7;
  const std::size_t n = probs.numel();
  auto clamped = std::make_shared<std::vector<double>>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pc = std::clamp(probs.values()[i], kClamp, 1.0 - kClamp);
    (*clamped)[i] = pc;
    total += targets[i] == 1.0 ? -std::log(pc) : -std::log(1.0 - pc);
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  out.node()->requires_grad = probs.requires_grad();
  TensorNode *pn = probs.node(), *on = out.node();
  tape.record("binary_cross_entropy", {probs}, out, [pn, on, clamped, targets, n] {
    if (on->grad.empty() || pn->grad.empty()) return;
    const double g = on->grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double pc = (*clamped)[i];
      if (pn->values[i] != pc) continue;  // clamp active: no gradient
      pn->grad[i] += g * (pc - targets[i]) / (pc * (1.0 - pc));
    }
  });
  return out;
}

Tensor categorical_cross_entropy(Tape& tape, const Tensor& logits,
                                 const std::vector<std::int32_t>& targets) {
  require(logits.shape().size() == 2,
          "categorical_cross_entropy: logits must be [B, V], got " + logits.shape_str());
  const std::size_t b = logits.shape()[0], v = logits.shape()[1];
  require(targets.size() == b, "categorical_cross_entropy: " +
                                   std::to_string(targets.size()) + " targets for logits " +
                                   logits.shape_str());
  for (std::int32_t t : targets)
    if (t < 0 || static_cast<std::size_t>(t) >= v)
      throw DataError("categorical_cross_entropy: target id " + std::to_string(t) +
                      " outside " + std::to_string(v) + " classes");
  Tensor out = make_output({b, 1}, logits.requires_grad());
  auto probs = std::make_shared<std::vector<double>>(b * v);
  for (std::size_t i = 0; i < b; ++i) {
    const double* lr = logits.values().data() + i * v;
    double mx = lr[0];
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, lr[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < v; ++j) s += std::exp(lr[j] - mx);
    const double lse = mx + std::log(s);
    double* pr = probs->data() + i * v;
    for (std::size_t j = 0; j < v; ++j) pr[j] = std::exp(lr[j] - lse);
    out.values()[i] = lse - lr[static_cast<std::size_t>(targets[i])];
  }
  TensorNode *ln = logits.node(), *on = out.node();
  tape.record("categorical_cross_entropy", {logits}, out, [ln, on, probs, targets, b, v] {
    if (on->grad.empty() || ln->grad.empty()) return;
    for (std::size_t i = 0; i < b; ++i) {
      const double g = on->grad[i];
      active().axpy(g, probs->data() + i * v, ln->grad.data() + i * v, v);
      ln->grad[i * v + static_cast<std::size_t>(targets[i])] -= g;
    }
  });
  return out;
}

Tensor gaussian_noise_add(Tape& tape, const Tensor& x, double sigma, RngStream& rng) {
  if (sigma < 0.0)
    throw ConfigError("gaussian_noise_add: sigma must be nonnegative, got " +
                      std::to_string(sigma));
  Tensor out = make_output(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < x.numel(); ++i)
    out.values()[i] = x.values()[i] + sigma * rng.next_gaussian();
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("gaussian_noise_add", {x}, out, [xn, on] {
    if (on->grad.empty() || xn->grad.empty()) return;
    active().axpy(1.0, on->grad.data(), xn->grad.data(), on->grad.size());
  });
  return out;
}

Tensor grad_reverse(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::from(x.shape(), x.values(), x.requires_grad());
  TensorNode *xn = x.node(), *on = out.node();
  tape.record("grad_reverse", {x}, out, [xn, on] {
    if (on->grad.empty() || xn->grad.empty()) return;
    active().axpy(-1.0, on->grad.data(), xn->grad.data(), on->grad.size());
  });
  return out;
}

}  // namespace robustnmt::ops
