// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dav/object_control/object_control.hpp"

namespace dav {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(BoxTrajectory, StationaryBox) {
  const Box b{0.2, 0.3, 0.5, 0.6};
  const auto boxes = build_box_trajectory(b, b, {{b.cx(), b.cy()}}, 6);
  ASSERT_EQ(boxes.size(), 6u);
  for (const auto& x : boxes) EXPECT_EQ(x, b);
}

TEST(BoxTrajectory, StraightTrackMidpoint) {
  const Box a{0.0, 0.0, 0.2, 0.2}, b{0.5, 0.6, 0.9, 0.8};
  const auto boxes = build_box_trajectory(a, b, {}, 3);
  EXPECT_NEAR(boxes[1].cx(), (a.cx() + b.cx()) / 2, 1e-12);
  EXPECT_NEAR(boxes[1].cy(), (a.cy() + b.cy()) / 2, 1e-12);
  EXPECT_NEAR(boxes[1].width(), (a.width() + b.width()) / 2, 1e-12);
  EXPECT_NEAR(boxes[1].height(), (a.height() + b.height()) / 2, 1e-12);
  EXPECT_EQ(boxes.front(), a);
  EXPECT_NEAR(boxes.back().x1, b.x1, 1e-12);
  EXPECT_NEAR(boxes.back().y2, b.y2, 1e-12);
}

TEST(BoxTrajectory, ArcLengthAroundACorner) {
  // Legs of 0.6 and 0.2 (ratio 3:1), five frames: centers at arc lengths 0..0.8 step 0.2.
  const Box a{0.05, 0.05, 0.15, 0.15}, b{0.65, 0.25, 0.75, 0.35};
  const std::vector<Point> track{{0.1, 0.1}, {0.7, 0.1}, {0.7, 0.3}};
  const auto boxes = build_box_trajectory(a, b, track, 5);
  const double want[5][2] = {{0.1, 0.1}, {0.3, 0.1}, {0.5, 0.1}, {0.7, 0.1}, {0.7, 0.3}};
  for (int k = 0; k < 5; ++k) {
    EXPECT_NEAR(boxes[k].cx(), want[k][0], 1e-12) << k;
    EXPECT_NEAR(boxes[k].cy(), want[k][1], 1e-12) << k;
  }
}

TEST(BoxTrajectory, ClampsToTheFrame) {
  const Box a{0.0, 0.4, 0.3, 0.6}, b{0.8, 0.4, 1.0, 0.6};
  const auto boxes = build_box_trajectory(a, b, {{0.15, 0.5}, {-0.1, 0.5}, {0.9, 0.5}}, 9);
  for (const auto& x : boxes) EXPECT_TRUE(x.normalized()) << to_string(x);
}

TEST(BoxTrajectory, Errors) {
  const Box a{0.1, 0.1, 0.3, 0.3}, b{0.6, 0.6, 0.8, 0.8};
  EXPECT_THROW(build_box_trajectory(a, b, {}, 1), std::invalid_argument);
  EXPECT_THROW(build_box_trajectory(a, b, {{0.2, 0.2}}, 4), std::invalid_argument);
  EXPECT_THROW(build_box_trajectory(a, b, {{0.3, 0.3}, {0.7, 0.7}}, 4), std::invalid_argument);
}

TEST(Regions, FullFrameAndQuarter) {
  const auto all = region_indices({0, 0, 1, 1}, 4, 4);
  EXPECT_EQ(all.size(), 16u);
  EXPECT_EQ(region_indices({0, 0, 0.5, 0.5}, 4, 4), (std::vector<std::size_t>{0, 1, 4, 5}));
}

TEST(Regions, SubCellBoxBindsToCenterCell) {
  // Center (0.55, 0.3) lies in row 1, column 2 of a 4x4 grid.
  EXPECT_EQ(region_indices({0.52, 0.28, 0.58, 0.32}, 4, 4), (std::vector<std::size_t>{6}));
}

TEST(Regions, BackgroundIsComplementOfUnion) {
  const std::vector<Box> boxes{{0, 0, 0.5, 0.5}, {0.5, 0.5, 1, 1}};
  const auto bg = background_indices(boxes, 4, 4);
  std::vector<std::size_t> all;
  for (const auto& b : boxes) {
    const auto r = region_indices(b, 4, 4);
    all.insert(all.end(), r.begin(), r.end());
  }
  all.insert(all.end(), bg.begin(), bg.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> grid(16);
  std::iota(grid.begin(), grid.end(), 0);
  EXPECT_EQ(all, grid);
  EXPECT_EQ(bg, (std::vector<std::size_t>{2, 3, 6, 7, 8, 9, 12, 13}));
}

ModulationSpec one_object(const Box& b, std::size_t frames = 2) {
  ModulationSpec spec;
  spec.objects.push_back({{1, 2}, std::vector<Box>(frames, b)});
  return spec;
}

TEST(ModulationTerm, FullFrameBoxAmplifiesByZero) {
  const auto s = modulation_term(one_object({0, 0, 1, 1}), 0, 999, 1000, 4, 4, 4);
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(s.at(i, j), 0.0);
  }
}

TEST(ModulationTerm, QuarterBoxEarlyAndLate) {
  const auto spec = one_object({0, 0, 0.5, 0.5});
  const auto early = modulation_term(spec, 1, 950, 1000, 4, 4, 5);
  const auto late = modulation_term(spec, 1, 949, 1000, 4, 4, 5);
  const std::vector<std::size_t> inside{0, 1, 4, 5};
  for (std::size_t i = 0; i < 16; ++i) {
    const bool in = std::find(inside.begin(), inside.end(), i) != inside.end();
    for (std::size_t tok : {1, 2}) {
      EXPECT_EQ(early.at(i, tok), in ? 0.75 : -kInf);
      EXPECT_EQ(late.at(i, tok), in ? 0.0 : -kInf);
    }
    for (std::size_t tok : {0, 3, 4}) {
      EXPECT_EQ(early.at(i, tok), 0.0);
      EXPECT_EQ(late.at(i, tok), 0.0);
    }
  }
}

TEST(ModulationTerm, BackgroundTokenCoversTheComplement) {
  auto spec = one_object({0, 0, 0.5, 0.5});
  spec.background_token = 3;
  const auto s = modulation_term(spec, 0, 999, 1000, 4, 4, 5);
  EXPECT_EQ(s.at(0, 3), -kInf);
  EXPECT_EQ(s.at(15, 3), 0.25);
  EXPECT_EQ(s.at(15, 1), -kInf);
}

TEST(ModulationTerm, SmallerBoxesGetLargerBoosts) {
  const auto small = modulation_term(one_object({0, 0, 0.25, 0.25}), 0, 999, 1000, 4, 4, 4);
  const auto big = modulation_term(one_object({0, 0, 0.75, 0.75}), 0, 999, 1000, 4, 4, 4);
  EXPECT_GT(small.at(0, 1), big.at(0, 1));
}

TEST(ModulationTerm, AblationSwitches) {
  auto spec = one_object({0, 0, 0.5, 0.5});
  spec.suppression = false;
  auto s = modulation_term(spec, 0, 999, 1000, 4, 4, 4);
  EXPECT_EQ(s.at(15, 1), 0.0);
  EXPECT_EQ(s.at(0, 1), 0.75);
  spec.suppression = true;
  spec.amplification = false;
  s = modulation_term(spec, 0, 999, 1000, 4, 4, 4);
  EXPECT_EQ(s.at(0, 1), 0.0);
  EXPECT_EQ(s.at(15, 1), -kInf);
}

TEST(ModulationSpec, ValidatesBindings) {
  auto spec = one_object({0, 0, 0.5, 0.5});
  EXPECT_NO_THROW(spec.validate(4, 2));
  spec.objects.push_back({{2}, std::vector<Box>(2, Box{0.5, 0.5, 1, 1})});
  EXPECT_THROW(spec.validate(4, 2), std::invalid_argument);
  auto sos = one_object({0, 0, 0.5, 0.5});
  sos.objects[0].tokens = {0};
  EXPECT_THROW(sos.validate(4, 2), std::invalid_argument);
  auto frames = one_object({0, 0, 0.5, 0.5}, 3);
  EXPECT_THROW(frames.validate(4, 2), std::invalid_argument);
  auto lam = one_object({0, 0, 0.5, 0.5});
  lam.lambda = -1;
  EXPECT_THROW(lam.validate(4, 2), std::invalid_argument);
}

TEST(ModulatedAttention, ZeroTermOrZeroStrengthIsPlainAttention) {
  std::mt19937_64 rng(1);
  const auto q = Tensor<double>::randn({6, 4}, rng), k = Tensor<double>::randn({3, 4}, rng),
             v = Tensor<double>::randn({3, 5}, rng);
  const auto plain = scaled_dot_attention(q, k, v);
  EXPECT_EQ(modulated_cross_attention(q, k, v, Tensor<double>({6, 3}), 25.0), plain);
  EXPECT_EQ(modulated_cross_attention(q, k, v, Tensor<double>::randn({6, 3}, rng), 0.0), plain);
}

TEST(ModulatedAttention, SuppressedKeyGetsNoWeight) {
  const auto q = Tensor<double>::matrix(1, 2, {0.3, -0.7});
  const auto k = Tensor<double>::matrix(2, 2, {1, 2, -3, 0.5});
  const auto v = Tensor<double>::matrix(2, 3, {1, 2, 3, 40, 50, 60});
  const auto s = Tensor<double>::matrix(1, 2, {0, -kInf});
  for (double lam : {0.0, 1.0, 25.0}) {
    const auto out = modulated_cross_attention(q, k, v, s, lam);
    EXPECT_EQ(out, Tensor<double>::matrix(1, 3, {1, 2, 3}));
  }
  EXPECT_THROW(modulated_cross_attention(q, k, v, Tensor<double>::matrix(1, 2, {-kInf, -kInf}), 1.0),
               std::invalid_argument);
  EXPECT_THROW(modulated_cross_attention(q, k, v, Tensor<double>({2, 2}), 1.0), std::invalid_argument);
}

TEST(BlockGroups, ThirdsOfTheStack) {
  EXPECT_EQ(block_group(0, 4), BlockGroup::kEncoder);
  EXPECT_EQ(block_group(1, 4), BlockGroup::kEncoder);
  EXPECT_EQ(block_group(2, 4), BlockGroup::kMiddle);
  EXPECT_EQ(block_group(3, 4), BlockGroup::kDecoder);
  EXPECT_EQ(block_group(0, 3), BlockGroup::kEncoder);
  EXPECT_EQ(block_group(1, 3), BlockGroup::kMiddle);
  EXPECT_EQ(block_group(2, 3), BlockGroup::kDecoder);
}

TEST(Placement, ParsesSubsets) {
  EXPECT_EQ(parse_placement("E,M,D"), (Placement{true, true, true}));
  EXPECT_EQ(parse_placement("D,E"), (Placement{true, false, true}));
  EXPECT_EQ(parse_placement("none"), (Placement{false, false, false}));
  EXPECT_EQ(parse_placement("E,D").str(), "E,D");
  EXPECT_THROW(parse_placement("E,X"), std::invalid_argument);
}

}  // namespace
}  // namespace dav
