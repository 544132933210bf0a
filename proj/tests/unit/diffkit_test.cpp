// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include "dav/diffkit/attention.hpp"
#include "dav/diffkit/checkpoint.hpp"
#include "dav/diffkit/finite_diff.hpp"

namespace dav {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using M = Tensor<double>;

TEST(ScaledDotAttention, EqualLogitsAverageValues) {
  auto q = M::matrix(1, 2, {1, 0});
  auto k = M::matrix(2, 2, {1, 0, 1, 0});
  auto v = M::matrix(2, 1, {2, 4});
  EXPECT_DOUBLE_EQ(scaled_dot_attention(q, k, v, M({1, 2}))[0], 3.0);
}

TEST(ScaledDotAttention, SuppressedKeyGetsZeroWeight) {
  auto q = M::matrix(1, 2, {1, 0});
  auto k = M::matrix(2, 2, {1, 0, 1, 0});
  auto v = M::matrix(2, 1, {2, 4});
  EXPECT_EQ(scaled_dot_attention(q, k, v, M::matrix(1, 2, {0, -kInf}))[0], 2.0);
}

TEST(ScaledDotAttention, HandEvaluatedSoftmax) {
  auto q = M::matrix(1, 2, {1, 0});
  auto k = M::matrix(2, 2, {1, 0, 0, 1});
  auto v = M::matrix(2, 1, {1, 0});
  const double a = std::exp(1 / std::sqrt(2.0));
  const double sigma = a / (a + 1.0);
  EXPECT_NEAR(sigma, 0.6698, 1e-4);
  EXPECT_NEAR(scaled_dot_attention(q, k, v)[0], sigma, 1e-15);
}

TEST(ScaledDotAttention, ShapeMismatchIsReported) {
  auto q = M::matrix(1, 2, {1, 0});
  auto k = M::matrix(2, 3, {1, 0, 0, 0, 1, 0});
  auto v = M::matrix(2, 1, {1, 0});
  try {
    scaled_dot_attention(q, k, v);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("[1x2]"), std::string::npos) << e.what();
  }
}

TEST(ScaledDotAttention, AllSuppressedRowNamesQuery) {
  auto q = M::matrix(2, 1, {1, 1});
  auto k = M::matrix(2, 1, {1, 1});
  auto v = M::matrix(2, 1, {1, 1});
  try {
    scaled_dot_attention(q, k, v, M::matrix(2, 2, {0, 0, -kInf, -kInf}));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("query 1"), std::string::npos) << e.what();
  }
}

TEST(ScaledDotAttention, RowsAreStochasticAndMaskedEntriesExactlyZero) {
  std::mt19937_64 rng(7);
  std::bernoulli_distribution mask(0.3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nq = 1 + trial % 7, nk = 2 + trial % 5, d = 1 + trial % 4;
    auto q = M::randn({nq, d}, rng, 2.0);
    auto k = M::randn({nk, d}, rng, 2.0);
    M bias = M::randn({nq, nk}, rng);
    for (std::size_t i = 0; i < nq; ++i) {
      for (std::size_t j = 1; j < nk; ++j) {
        if (mask(rng)) bias.at(i, j) = -kInf;
      }
    }
    // V = identity exposes the attention weights directly.
    M v({nk, nk});
    for (std::size_t j = 0; j < nk; ++j) v.at(j, j) = 1;
    auto w = scaled_dot_attention(q, k, v, bias);
    for (std::size_t i = 0; i < nq; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < nk; ++j) {
        s += w.at(i, j);
        if (bias.at(i, j) == -kInf) {
          EXPECT_EQ(w.at(i, j), 0.0);
        }
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Backward, HalfSumOfSquares) {
  ParameterSet<double> params;
  params.add("x", Tensor<double>({3}, {1, 2, 3}));
  Tape<double> tape(&params);
  auto x = tape.param("x");
  tape.backward(scale(sum(mul(x, x)), 0.5));
  EXPECT_EQ(params.grad("x"), Tensor<double>({3}, {1, 2, 3}));
}

TEST(Backward, ConstantLossGivesZeroGradients) {
  ParameterSet<double> params;
  params.add("x", Tensor<double>({3}, {1, 2, 3}));
  Tape<double> tape(&params);
  (void)tape.param("x");
  tape.backward(tape.constant(Tensor<double>({1}, {4.0})));
  EXPECT_EQ(params.grad("x"), Tensor<double>({3}, {0, 0, 0}));
}

TEST(Backward, BeforeForwardIsAnError) {
  Tape<double> tape;
  EXPECT_THROW(tape.backward(Var<double>{&tape, 0}), std::logic_error);
}

TEST(Backward, ReplayIsIdenticalAndUnusedParamsStayZero) {
  std::mt19937_64 rng(3);
  ParameterSet<double> params;
  params.add("w", M::randn({4, 3}, rng));
  params.add("unused", M::randn({2, 2}, rng));
  Tape<double> tape(&params);
  auto x = tape.constant(M::randn({5, 4}, rng));
  auto loss = sum(silu(matmul(x, tape.param("w"))));
  tape.backward(loss);
  const auto first = params.grad("w");
  params.zero_grad();
  tape.backward(loss);
  EXPECT_EQ(params.grad("w"), first);
  for (auto v : params.grad("unused").values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, FrozenParametersReceiveNoGradient) {
  std::mt19937_64 rng(4);
  ParameterSet<double> params;
  params.add("a", M::randn({3, 3}, rng));
  params.add("b", M::randn({3, 3}, rng));
  Tape<double> tape(&params, [](const std::string& n) { return n == "b"; });
  auto loss = sum(matmul(tape.param("a"), tape.param("b")));
  tape.backward(loss);
  for (auto v : params.grad("a").values()) EXPECT_EQ(v, 0.0);
  double norm = 0;
  for (auto v : params.grad("b").values()) norm += std::abs(v);
  EXPECT_GT(norm, 0.0);
}

TEST(FiniteDiff, DotProductIsExactToRoundoff) {
  std::mt19937_64 rng(1);
  auto x = M::randn({6}, rng);
  EXPECT_LT(finite_diff_check_tape([](Var<double> v) { return dot(v, v); }, x, 1e-5), 1e-8);
}

TEST(FiniteDiff, BrokenGradientIsDetected) {
  std::mt19937_64 rng(2);
  auto x = M::randn({5}, rng);
  GradFn broken = [](const M& in, M* grad) {
    double s = 0;
    for (std::size_t i = 0; i < in.numel(); ++i) {
      s += std::sin(in[i]);
      if (grad) (*grad)[i] = std::sin(in[i]);  // should be cos
    }
    return s;
  };
  EXPECT_GT(finite_diff_check(broken, x, 1e-5), 1e-1);
}

TEST(FiniteDiff, RejectsNonFiniteValuesAndBadEps) {
  GradFn bad = [](const M&, M*) { return std::numeric_limits<double>::quiet_NaN(); };
  EXPECT_THROW(finite_diff_check(bad, M({2}), 1e-5), std::domain_error);
  GradFn ok = [](const M&, M*) { return 0.0; };
  EXPECT_THROW(finite_diff_check(ok, M({2}), 1e-1), std::invalid_argument);
}

// Each primitive against central differences in double precision.
class PrimitiveGradients : public ::testing::Test {
 protected:
  std::mt19937_64 rng{11};
  M weights(Shape s) { return M::randn(std::move(s), rng); }
};

TEST_F(PrimitiveGradients, MatmulAndLinear) {
  auto w = weights({4, 3});
  auto b = weights({3});
  auto x = weights({5, 4});
  EXPECT_LT(finite_diff_check_tape(
                [&](Var<double> v) {
                  auto& t = *v.tape;
                  return sum(mul(linear(v, t.constant(w), t.constant(b)), linear(v, t.constant(w), t.constant(b))));
                },
                x, 1e-5),
            1e-3);
  EXPECT_LT(finite_diff_check_tape([&](Var<double> v) { return sum(silu(matmul(v.tape->constant(x), v))); }, w, 1e-5),
            1e-3);
}

TEST_F(PrimitiveGradients, ElementwiseOps) {
  auto x = weights({3, 4});
  auto y = weights({3, 4});
  EXPECT_LT(finite_diff_check_tape(
                [&](Var<double> v) {
                  auto c = v.tape->constant(y);
                  return sum(mul(tanh(add(v, c)), sub(silu(v), scale(c, 0.3))));
                },
                x, 1e-5),
            1e-3);
}

TEST_F(PrimitiveGradients, LayerNorm) {
  auto x = weights({4, 6});
  auto g = weights({6});
  auto b = weights({6});
  auto target = weights({4, 6});
  auto loss = [&](Var<double> xv, Var<double> gv, Var<double> bv) { return mse(layer_norm(xv, gv, bv), target); };
  EXPECT_LT(finite_diff_check_tape([&](Var<double> v) { return loss(v, v.tape->constant(g), v.tape->constant(b)); },
                                   x, 1e-5),
            1e-3);
  EXPECT_LT(finite_diff_check_tape([&](Var<double> v) { return loss(v.tape->constant(x), v, v.tape->constant(b)); },
                                   g, 1e-5),
            1e-3);
}

TEST_F(PrimitiveGradients, GatherConcatAddRowScalarMul) {
  auto table = weights({5, 3});
  auto row = weights({3});
  auto gate = weights({1});
  EXPECT_LT(finite_diff_check_tape(
                [&](Var<double> v) {
                  auto& t = *v.tape;
                  auto g = gather_rows(v, {4, 0, 4, 2});
                  auto c = concat_rows<double>({g, v});
                  auto r = add_row(c, t.constant(row));
                  return sum(mul(r, scalar_mul(tanh(t.constant(gate)), r)));
                },
                table, 1e-5),
            1e-3);
  EXPECT_LT(finite_diff_check_tape(
                [&](Var<double> v) {
                  auto& t = *v.tape;
                  return sum(mul(t.constant(table), scalar_mul(tanh(v), t.constant(table))));
                },
                gate, 1e-5),
            1e-3);
}

TEST_F(PrimitiveGradients, GatedAdd) {
  auto x = weights({3, 4});
  auto y = weights({3, 4});
  auto gate = weights({1});
  auto loss = [](Var<double> a, Var<double> g, Var<double> b) {
    auto r = gated_add(a, tanh(g), b);
    return sum(mul(r, r));
  };
  EXPECT_LT(finite_diff_check_tape([&](Var<double> v) { return loss(v, v.tape->constant(gate), v.tape->constant(y)); },
                                   x, 1e-5),
            1e-3);
  EXPECT_LT(finite_diff_check_tape([&](Var<double> v) { return loss(v.tape->constant(x), v, v.tape->constant(y)); },
                                   gate, 1e-5),
            1e-3);
  EXPECT_LT(finite_diff_check_tape([&](Var<double> v) { return loss(v.tape->constant(x), v.tape->constant(gate), v); },
                                   y, 1e-5),
            1e-3);
}

TEST(GatedAdd, ZeroGateIsBitIdentical) {
  Tape<double> tape;
  M x = M::matrix(1, 3, {-0.0, 1.5, -2.0});
  M y = M::matrix(1, 3, {3.0, -4.0, 1e300});
  auto out = gated_add(tape.constant(x), tape.constant(M({1}, 0.0)), tape.constant(y)).value();
  EXPECT_EQ(std::memcmp(out.data(), x.data(), 3 * sizeof(double)), 0);
}

TEST_F(PrimitiveGradients, GroupedMultiHeadAttentionWithBias) {
  const std::size_t groups = 3, nq = 4, nk = 5, heads = 2, d = 6;
  auto q = weights({groups * nq, d});
  auto k = weights({groups * nk, d});
  auto v = weights({groups * nk, d});
  std::vector<M> bias;
  for (std::size_t g = 0; g < groups; ++g) {
    M b = weights({nq, nk});
    b.at(0, 1) = -kInf;
    b.at(2, 3) = -kInf;
    bias.push_back(b);
  }
  auto target = weights({groups * nq, d});
  AttentionLayout layout{heads, groups, false};
  auto build = [&](Var<double> qv, Var<double> kv, Var<double> vv) {
    return mse(attention(qv, kv, vv, layout, &bias), target);
  };
  EXPECT_LT(finite_diff_check_tape(
                [&](Var<double> x) { return build(x, x.tape->constant(k), x.tape->constant(v)); }, q, 1e-5),
            1e-3);
  EXPECT_LT(finite_diff_check_tape(
                [&](Var<double> x) { return build(x.tape->constant(q), x, x.tape->constant(v)); }, k, 1e-5),
            1e-3);
  EXPECT_LT(finite_diff_check_tape(
                [&](Var<double> x) { return build(x.tape->constant(q), x.tape->constant(k), x); }, v, 1e-5),
            1e-3);
}

TEST_F(PrimitiveGradients, SharedKeyValueAttention) {
  auto q = weights({6, 4});
  auto kv = weights({2, 4});
  auto target = weights({6, 4});
  AttentionLayout layout{2, 3, true};
  EXPECT_LT(finite_diff_check_tape([&](Var<double> x) { return mse(attention(x.tape->constant(q), x, x, layout), target); },
                                   kv, 1e-5),
            1e-3);
}

TEST(Determinism, ForwardAndBackwardAreBitIdentical) {
  auto run = [] {
    std::mt19937_64 rng(99);
    ParameterSet<double> params;
    params.add("w", M::randn({4, 4}, rng));
    Tape<double> tape(&params);
    auto x = tape.constant(M::randn({8, 4}, rng));
    auto h = matmul(x, tape.param("w"));
    auto a = attention(h, h, h, AttentionLayout{2, 2, false});
    auto loss = sum(mul(a, a));
    tape.backward(loss);
    return std::make_pair(loss.value(), params.grad("w"));
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripsAndRejectsForeignFiles) {
  std::mt19937_64 rng(5);
  ParameterSet<float> params;
  params.add("block0.w", Tensor<float>::randn({3, 4}, rng));
  params.add("gate", Tensor<float>({1}, {0.25f}));
  const auto dir = std::filesystem::temp_directory_path() / "dav_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "model.ckpt").string();
  save_checkpoint(path, params);
  auto loaded = load_checkpoint<float>(path);
  EXPECT_EQ(loaded.names(), params.names());
  EXPECT_EQ(loaded.value("block0.w"), params.value("block0.w"));
  EXPECT_EQ(loaded.checksum(), params.checksum());
  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NOTACKPT";
  }
  EXPECT_THROW(load_checkpoint<float>((dir / "bad.ckpt").string()), std::runtime_error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace dav
