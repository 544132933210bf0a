// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/diffkit/tape.hpp"

namespace dav {

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
}

template <typename T>
void require_same_tape(const Var<T>& a, const Var<T>& b) {
  if (a.tape != b.tape) throw std::logic_error("operands recorded on different tapes");
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0, n = dst.numel(); i < n; ++i) d[i] += s[i];
}

}  // namespace detail

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  auto* tape = x.tape;
  auto out = x.value().reshaped(std::move(shape));
  return tape->record(std::move(out), {x.id}, [in = x.id](Tape<T>& t, std::size_t self) {
    if (t.requires_grad(in)) detail::add_into(t.grad(in), t.grad(self));
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  detail::add_into(out, b.value());
  return a.tape->record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) detail::add_into(t.grad(ia), g);
    if (t.requires_grad(ib)) detail::add_into(t.grad(ib), g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return a.tape->record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) detail::add_into(t.grad(ia), g);
    if (t.requires_grad(ib)) {
      auto& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return a.tape->record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& va = t.value(ia);
    const auto& vb = t.value(ib);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= c;
  return a.tape->record(std::move(out), {a.id}, [ia = a.id, c](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * c;
  });
}

/// a[r, :] + row for every row r; `row` holds exactly cols(a) values.
template <typename T>
Var<T> add_row(Var<T> a, Var<T> row) {
  detail::require_same_tape(a, row);
  const std::size_t n = a.cols();
  detail::require(row.value().numel() == n, "add_row: row has " + std::to_string(row.value().numel()) +
                                                " values, expected " + std::to_string(n));
  Tensor<T> out = a.value();
  as_matrix(out).rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(row.value().data(), n);
  return a.tape->record(std::move(out), {a.id, row.id}, [ia = a.id, ir = row.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) detail::add_into(t.grad(ia), g);
    if (t.requires_grad(ir)) {
      auto& gr = t.grad(ir);
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(gr.data(), gr.numel()) += as_matrix(g).colwise().sum();
    }
  });
}

/// Matrix product of a [m x k] with b [k x n].
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  detail::require_same_tape(a, b);
  detail::require(a.cols() == b.rows() && b.value().rank() == 2,
                  "matmul: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  Tensor<T> out({a.rows(), b.cols()});
  as_matrix(out).noalias() = as_matrix(a.value()) * as_matrix(b.value());
  return a.tape->record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape<T>& t, std::size_t self) {
    const auto g = as_matrix(t.grad(self));
    if (t.requires_grad(ia)) as_matrix(t.grad(ia)).noalias() += g * as_matrix(t.value(ib)).transpose();
    if (t.requires_grad(ib)) as_matrix(t.grad(ib)).noalias() += as_matrix(t.value(ia)).transpose() * g;
  });
}

/// x W + b with W stored [in x out] and b holding `out` values.
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  return add_row(matmul(x, w), b);
}

template <typename T>
Var<T> silu(Var<T> x) {
  Tensor<T> out(x.shape());
  const auto xa = as_matrix(x.value()).array();
  as_matrix(out).array() = xa / (T(1) + (-xa).exp());
  return x.tape->record(std::move(out), {x.id}, [ix = x.id](Tape<T>& t, std::size_t self) {
    const auto g = as_matrix(t.grad(self)).array();
    const auto xv = as_matrix(t.value(ix)).array();
    const auto s = (T(1) + (-xv).exp()).inverse();
    as_matrix(t.grad(ix)).array() += g * s * (T(1) + xv * (T(1) - s));
  });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = std::tanh(v);
  return x.tape->record(std::move(out), {x.id}, [ix = x.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * (T(1) - y[i] * y[i]);
  });
}

/// s * x for a one-element tensor s.
template <typename T>
Var<T> scalar_mul(Var<T> s, Var<T> x) {
  detail::require_same_tape(s, x);
  detail::require(s.value().numel() == 1, "scalar_mul: gate must hold one value");
  const T c = s.value()[0];
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v *= c;
  return x.tape->record(std::move(out), {s.id, x.id}, [is = s.id, ix = x.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ix)) {
      const T c = t.value(is)[0];
      auto& gx = t.grad(ix);
      for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * c;
    }
    if (t.requires_grad(is)) {
      const auto& xv = t.value(ix);
      T acc = 0;
      for (std::size_t i = 0; i < g.numel(); ++i) acc += g[i] * xv[i];
      t.grad(is)[0] += acc;
    }
  });
}

/// x + g * y for a one-element gate g. A gate of exactly zero returns a
/// bit-identical copy of x, so a freshly inserted branch cannot perturb the
/// residual stream (not even through signed zeros).
template <typename T>
Var<T> gated_add(Var<T> x, Var<T> gate, Var<T> y) {
  detail::require_same_tape(x, y);
  detail::require_same_tape(x, gate);
  detail::require_same_shape(x, y, "gated_add");
  detail::require(gate.value().numel() == 1, "gated_add: gate must hold one value");
  const T c = gate.value()[0];
  Tensor<T> out = x.value();
  if (c != T(0)) {
    const auto& yv = y.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += c * yv[i];
  }
  return x.tape->record(std::move(out), {x.id, gate.id, y.id},
                        [ix = x.id, ig = gate.id, iy = y.id](Tape<T>& t, std::size_t self) {
                          const auto& g = t.grad(self);
                          if (t.requires_grad(ix)) detail::add_into(t.grad(ix), g);
                          if (t.requires_grad(iy)) {
                            const T c = t.value(ig)[0];
                            auto& gy = t.grad(iy);
                            for (std::size_t i = 0; i < g.numel(); ++i) gy[i] += g[i] * c;
                          }
                          if (t.requires_grad(ig)) {
                            const auto& yv = t.value(iy);
                            T acc = 0;
                            for (std::size_t i = 0; i < g.numel(); ++i) acc += g[i] * yv[i];
                            t.grad(ig)[0] += acc;
                          }
                        });
}

/// Per-row layer normalization with learnable gain and shift.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> shift, T eps = T(1e-5)) {
  const std::size_t rows = x.rows(), n = x.cols();
  detail::require(gain.value().numel() == n && shift.value().numel() == n,
                  "layer_norm: affine parameters must have " + std::to_string(n) + " values");
  Tensor<T> out(x.shape());
  Tensor<T> xhat(x.shape());
  std::vector<T> inv_std(rows);
  const T* xv = x.value().data();
  const T* gv = gain.value().data();
  const T* bv = shift.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv + r * n;
    T mean = 0;
    for (std::size_t c = 0; c < n; ++c) mean += row[c];
    mean /= T(n);
    T var = 0;
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= T(n);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    T* h = xhat.data() + r * n;
    T* o = out.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) {
      h[c] = (row[c] - mean) * inv_std[r];
      o[c] = h[c] * gv[c] + bv[c];
    }
  }
  return x.tape->record(
      std::move(out), {x.id, gain.id, shift.id},
      [ix = x.id, ig = gain.id, ib = shift.id, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, n](
          Tape<T>& t, std::size_t self) {
        const T* g = t.grad(self).data();
        const T* gv = t.value(ig).data();
        const T* xh = xhat.data();
        if (t.requires_grad(ig)) {
          T* gg = t.grad(ig).data();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < n; ++c) gg[c] += g[r * n + c] * xh[r * n + c];
          }
        }
        if (t.requires_grad(ib)) {
          T* gb = t.grad(ib).data();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
          }
        }
        if (!t.requires_grad(ix)) return;
        T* gx = t.grad(ix).data();
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gr = g + r * n;
          const T* hr = xh + r * n;
          T sum_dh = 0, sum_dh_h = 0;
          for (std::size_t c = 0; c < n; ++c) {
            const T dh = gr[c] * gv[c];
            sum_dh += dh;
            sum_dh_h += dh * hr[c];
          }
          const T k = inv_std[r] / T(n);
          for (std::size_t c = 0; c < n; ++c) {
            gx[r * n + c] += k * (T(n) * gr[c] * gv[c] - sum_dh - hr[c] * sum_dh_h);
          }
        }
      });
}

/// Selects rows of `table` by index; gradients scatter-add back.
template <typename T>
Var<T> gather_rows(Var<T> table, std::vector<std::size_t> index) {
  const std::size_t n = table.cols(), rows = table.rows();
  Tensor<T> out({index.size(), n});
  for (std::size_t r = 0; r < index.size(); ++r) {
    detail::require(index[r] < rows, "gather_rows: index " + std::to_string(index[r]) + " out of range for " +
                                         std::to_string(rows) + " rows");
    std::copy_n(table.value().data() + index[r] * n, n, out.data() + r * n);
  }
  return table.tape->record(std::move(out), {table.id},
                            [it = table.id, index = std::move(index), n](Tape<T>& t, std::size_t self) {
                              const auto& g = t.grad(self);
                              auto& gt = t.grad(it);
                              for (std::size_t r = 0; r < index.size(); ++r) {
                                T* dst = gt.data() + index[r] * n;
                                const T* src = g.data() + r * n;
                                for (std::size_t c = 0; c < n; ++c) dst[c] += src[c];
                              }
                            });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    detail::require(p.cols() == n, "concat_rows: column mismatch");
    detail::require_same_tape(p, parts.front());
    rows += p.rows();
    ids.push_back(p.id);
  }
  Tensor<T> out({rows, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy_n(p.value().data(), p.value().numel(), out.data() + off);
    off += p.value().numel();
  }
  return parts.front().tape->record(std::move(out), ids, [ids](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t off = 0;
    for (auto id : ids) {
      const std::size_t m = t.value(id).numel();
      if (t.requires_grad(id)) {
        auto& gi = t.grad(id);
        for (std::size_t i = 0; i < m; ++i) gi[i] += g[off + i];
      }
      off += m;
    }
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T s = 0;
  for (auto v : x.value().values()) s += v;
  return x.tape->record(Tensor<T>({1}, std::vector<T>{s}), {x.id}, [ix = x.id](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    for (auto& v : t.grad(ix).values()) v += g;
  });
}

template <typename T>
Var<T> dot(Var<T> a, Var<T> b) {
  return sum(mul(a, b));
}

/// Mean squared error against a constant target.
template <typename T>
Var<T> mse(Var<T> pred, const Tensor<T>& target) {
  detail::require(pred.shape() == target.shape(), "mse: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                                       shape_str(target.shape()));
  const std::size_t n = target.numel();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pred.value()[i] - target[i];
    acc += d * d;
  }
  Tensor<T> diff = pred.value();
  for (std::size_t i = 0; i < n; ++i) diff[i] -= target[i];
  return pred.tape->record(Tensor<T>({1}, std::vector<T>{acc / T(n)}), {pred.id},
                           [ip = pred.id, diff = std::move(diff), n](Tape<T>& t, std::size_t self) {
                             const T g = t.grad(self)[0] * T(2) / T(n);
                             auto& gp = t.grad(ip);
                             for (std::size_t i = 0; i < n; ++i) gp[i] += g * diff[i];
                           });
}

}  // namespace dav
