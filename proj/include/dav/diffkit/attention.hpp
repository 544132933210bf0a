// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/diffkit/ops.hpp"

namespace dav {

/// How the rows and columns of Q/K/V are split into independent attention
/// problems. Queries are `groups` contiguous blocks of rows; keys and values
/// are either shared by every group or split the same way. Columns are split
/// into `heads` equal slices.
struct AttentionLayout {
  std::size_t heads = 1;
  std::size_t groups = 1;
  bool shared_kv = true;
};

template <typename T>
using AttentionObserver = std::function<void(std::size_t group, std::size_t head, const RowMatrix<T>& probs)>;

namespace detail {

template <typename T>
using StridedMap = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using MutStridedMap = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;

template <typename T>
StridedMap<T> block_of(const Tensor<T>& m, std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols) {
  return StridedMap<T>(m.data() + row0 * m.cols() + col0, static_cast<Eigen::Index>(rows),
                       static_cast<Eigen::Index>(cols), Eigen::OuterStride<>(static_cast<Eigen::Index>(m.cols())));
}

template <typename T>
MutStridedMap<T> block_of(Tensor<T>& m, std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols) {
  return MutStridedMap<T>(m.data() + row0 * m.cols() + col0, static_cast<Eigen::Index>(rows),
                          static_cast<Eigen::Index>(cols), Eigen::OuterStride<>(static_cast<Eigen::Index>(m.cols())));
}

/// In-place row softmax of scaled logits. Entries equal to -inf are excluded
/// from the normalizer and come out exactly zero.
template <typename T>
void masked_softmax_rows(RowMatrix<T>& logits, std::size_t group, std::size_t first_query) {
  constexpr T neg_inf = -std::numeric_limits<T>::infinity();
  const Eigen::Matrix<T, Eigen::Dynamic, 1> m = logits.rowwise().maxCoeff();
  bool masked = false;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (m(r) == neg_inf) {
      throw std::invalid_argument("attention: query " + std::to_string(first_query + r) + " (group " +
                                  std::to_string(group) + ") has every key suppressed");
    }
  }
  masked = (logits.array() == neg_inf).any();
  auto a = logits.array();
  if (masked) {
    // Suppressed entries are forced to exactly zero rather than a tiny exp.
    a = (a == neg_inf).select(T(0), (a.colwise() - m.array()).exp());
  } else {
    a = (a.colwise() - m.array()).exp();
  }
  a.colwise() /= a.rowwise().sum();
}

}  // namespace detail

/// Softmax((Q K^T + bias) / sqrt(d)) V, batched over groups and heads. `bias`
/// is either empty, a single [nq x nk] matrix shared by all groups, or one
/// matrix per group; it is shared across heads and is not differentiated.
template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, AttentionLayout layout, const std::vector<Tensor<T>>* bias = nullptr,
                 const AttentionObserver<T>& observer = {}) {
  detail::require_same_tape(q, k);
  detail::require_same_tape(q, v);
  const std::size_t H = layout.heads, G = layout.groups;
  detail::require(H >= 1 && G >= 1, "attention: heads and groups must be positive");
  detail::require(q.cols() == k.cols() && q.cols() % H == 0 && v.cols() % H == 0,
                  "attention: incompatible feature dims Q " + shape_str(q.shape()) + ", K " + shape_str(k.shape()) +
                      ", V " + shape_str(v.shape()) + " for " + std::to_string(H) + " heads");
  detail::require(q.rows() % G == 0, "attention: " + std::to_string(q.rows()) + " query rows do not split into " +
                                         std::to_string(G) + " groups");
  detail::require(k.rows() == v.rows(), "attention: K has " + std::to_string(k.rows()) + " rows but V has " +
                                            std::to_string(v.rows()));
  const std::size_t nq = q.rows() / G;
  std::size_t nk = k.rows();
  if (!layout.shared_kv) {
    detail::require(nk % G == 0, "attention: key rows do not split into groups");
    nk /= G;
  }
  const std::size_t dh = q.cols() / H, dv = v.cols() / H;
  if (bias) {
    detail::require(bias->size() == 1 || bias->size() == G, "attention: expected 1 or " + std::to_string(G) +
                                                                " bias matrices, got " + std::to_string(bias->size()));
    for (const auto& b : *bias) {
      detail::require(b.rows() == nq && b.cols() == nk, "attention: bias shape " + shape_str(b.shape()) +
                                                            " does not match scores [" + std::to_string(nq) + "x" +
                                                            std::to_string(nk) + "]");
    }
  }
  const T inv_sqrt_d = T(1) / std::sqrt(T(dh));
  const auto& qv = q.value();
  const auto& kv = k.value();
  const auto& vv = v.value();
  Tensor<T> out({q.rows(), v.cols()});
  std::vector<RowMatrix<T>> probs(G * H);
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t k0 = layout.shared_kv ? 0 : g * nk;
    for (std::size_t h = 0; h < H; ++h) {
      auto& p = probs[g * H + h];
      p.noalias() = detail::block_of(qv, g * nq, nq, h * dh, dh) * detail::block_of(kv, k0, nk, h * dh, dh).transpose();
      if (bias) {
        const auto& b = (*bias)[bias->size() == 1 ? 0 : g];
        p += as_matrix(b);
      }
      p *= inv_sqrt_d;
      detail::masked_softmax_rows(p, g, g * nq);
      if (observer) observer(g, h, p);
      detail::block_of(out, g * nq, nq, h * dv, dv).noalias() = p * detail::block_of(vv, k0, nk, h * dv, dv);
    }
  }
  return q.tape->record(
      std::move(out), {q.id, k.id, v.id},
      [iq = q.id, ik = k.id, iv = v.id, layout, nq, nk, dh, dv, inv_sqrt_d, probs = std::move(probs)](
          Tape<T>& t, std::size_t self) {
        const auto& g_out = t.grad(self);
        const bool gq = t.requires_grad(iq), gk = t.requires_grad(ik), gv = t.requires_grad(iv);
        const auto& qv = t.value(iq);
        const auto& kv = t.value(ik);
        const auto& vv = t.value(iv);
        RowMatrix<T> dp, ds;
        for (std::size_t g = 0; g < layout.groups; ++g) {
          const std::size_t k0 = layout.shared_kv ? 0 : g * nk;
          for (std::size_t h = 0; h < layout.heads; ++h) {
            const auto& p = probs[g * layout.heads + h];
            const auto dout = detail::block_of(g_out, g * nq, nq, h * dv, dv);
            if (gv) detail::block_of(t.grad(iv), k0, nk, h * dv, dv).noalias() += p.transpose() * dout;
            if (!gq && !gk) continue;
            dp.noalias() = dout * detail::block_of(vv, k0, nk, h * dv, dv).transpose();
            ds = p.cwiseProduct(dp);
            const Eigen::Matrix<T, Eigen::Dynamic, 1> row_dot = ds.rowwise().sum();
            ds -= (p.array().colwise() * row_dot.array()).matrix();
            ds *= inv_sqrt_d;
            if (gq) {
              detail::block_of(t.grad(iq), g * nq, nq, h * dh, dh).noalias() +=
                  ds * detail::block_of(kv, k0, nk, h * dh, dh);
            }
            if (gk) {
              detail::block_of(t.grad(ik), k0, nk, h * dh, dh).noalias() +=
                  ds.transpose() * detail::block_of(qv, g * nq, nq, h * dh, dh);
            }
          }
        }
      });
}

namespace detail {

template <typename T>
Tensor<T> single_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                const std::vector<Tensor<T>>* bias) {
  Tape<T> tape;
  return attention(tape.constant(q), tape.constant(k), tape.constant(v), AttentionLayout{}, bias).value();
}

}  // namespace detail

/// Single-head Softmax((Q K^T + bias) / sqrt(d)) V on plain tensors.
template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
  return detail::single_head_attention<T>(q, k, v, nullptr);
}

template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               const Tensor<T>& additive_bias) {
  const std::vector<Tensor<T>> bias{additive_bias};
  return detail::single_head_attention<T>(q, k, v, &bias);
}

}  // namespace dav
