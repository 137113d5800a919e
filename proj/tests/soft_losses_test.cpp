/* Copyright 2026 The segloss Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "segloss/error.hpp"
#include "segloss/soft_losses.hpp"
#include "test_util.hpp"

namespace segloss {
namespace {

// Two pixels, two classes; the hand-checked instance used throughout.
SoftSegmentation two_pixel_pred() { return SoftSegmentation(1, 2, 2, {0.6, 0.4, 0.2, 0.8}); }
SoftSegmentation two_pixel_gt() { return SoftSegmentation(1, 2, 2, {1.0, 0.0, 0.0, 1.0}); }

ScoreMap scores_for(const SoftSegmentation& p) {
  std::vector<double> z;
  for (double v : p.values()) z.push_back(std::log(v));
  return ScoreMap(p.height(), p.width(), p.classes(), z);
}

TEST(ExpectedOverlap, TwoPixelExample) {
  const ExpectedOverlap o = expected_overlap(two_pixel_pred(), two_pixel_gt());
  EXPECT_NEAR(o.intersection[0], 0.6, 1e-15);
  EXPECT_NEAR(o.intersection[1], 0.8, 1e-15);
  EXPECT_NEAR(o.union_[0], 1.2, 1e-15);
  EXPECT_NEAR(o.union_[1], 1.4, 1e-15);
}

TEST(ExpectedOverlap, MatchingOneHotGivesCounts) {
  const HardSegmentation h(2, 2, 3, {0, 2, 2, 1});
  const ExpectedOverlap o = expected_overlap(one_hot(h), one_hot(h));
  EXPECT_EQ(o.intersection, (std::vector<double>{1, 1, 2}));
  EXPECT_EQ(o.union_, o.intersection);
}

TEST(ExpectedOverlap, DisjointSupports) {
  const SoftSegmentation pred(1, 2, 2, {1, 0, 1, 0});
  const SoftSegmentation gt(1, 2, 2, {0, 1, 0, 1});
  const ExpectedOverlap o = expected_overlap(pred, gt);
  EXPECT_EQ(o.intersection, (std::vector<double>{0, 0}));
  EXPECT_EQ(o.union_, (std::vector<double>{2, 2}));
  EXPECT_EQ(iou_objective(o).value, 0.0);
}

TEST(ExpectedOverlap, ShapeMismatch) {
  EXPECT_THROW(expected_overlap(two_pixel_pred(), SoftSegmentation(2, 1, 2, {1, 0, 0, 1})), Error);
}

TEST(ExpectedOverlap, MergeIdentityAndCommutativity) {
  std::mt19937_64 rng(1);
  const auto a = expected_overlap(testing::random_soft(3, 3, 4, rng), testing::random_soft(3, 3, 4, rng));
  const auto b = expected_overlap(testing::random_soft(2, 5, 4, rng), testing::random_soft(2, 5, 4, rng));
  const ExpectedOverlap z = merge(a, ExpectedOverlap::zero(4));
  EXPECT_EQ(z.intersection, a.intersection);
  EXPECT_EQ(z.union_, a.union_);
  const ExpectedOverlap ab = merge(a, b);
  const ExpectedOverlap ba = merge(b, a);
  EXPECT_EQ(ab.intersection, ba.intersection);
  EXPECT_EQ(ab.union_, ba.union_);
  EXPECT_EQ(ab.gt_mass, ba.gt_mass);
  EXPECT_THROW(merge(a, ExpectedOverlap::zero(3)), Error);
}

TEST(ExpectedOverlap, MergedBatchEqualsConcatenation) {
  std::mt19937_64 rng(2);
  std::vector<double> pred_all;
  std::vector<int> gt_all;
  ExpectedOverlap merged = ExpectedOverlap::zero(3);
  for (int n = 0; n < 10; ++n) {
    const SoftSegmentation p = testing::random_soft(2, 4, 3, rng);
    const HardSegmentation g = testing::random_labels(2, 4, 3, rng);
    merged = merge(merged, expected_overlap(p, one_hot(g)));
    pred_all.insert(pred_all.end(), p.values().begin(), p.values().end());
    gt_all.insert(gt_all.end(), g.labels().begin(), g.labels().end());
  }
  const ExpectedOverlap whole =
      expected_overlap(SoftSegmentation(20, 4, 3, pred_all), one_hot(HardSegmentation(20, 4, 3, gt_all)));
  for (int k = 0; k < 3; ++k) {
    const auto u = static_cast<std::size_t>(k);
    EXPECT_NEAR(merged.intersection[u], whole.intersection[u], 1e-12);
    EXPECT_NEAR(merged.union_[u], whole.union_[u], 1e-12);
  }
  EXPECT_NEAR(uoi_loss(merged).value, uoi_loss(whole).value, 1e-12);
}

TEST(IouObjective, Examples) {
  const HardSegmentation h(1, 3, 3, {0, 1, 2});
  const LossReport perfect = iou_objective(expected_overlap(one_hot(h), one_hot(h)));
  EXPECT_DOUBLE_EQ(perfect.value, 3.0);
  EXPECT_DOUBLE_EQ(perfect.mean, 1.0);
  const LossReport r = iou_objective(expected_overlap(two_pixel_pred(), two_pixel_gt()));
  EXPECT_NEAR(r.value, 0.5 + 0.8 / 1.4, 1e-12);
  EXPECT_NEAR(r.value, 1.071429, 1e-6);
}

TEST(IouObjective, AbsentClassesAreExcluded) {
  const SoftSegmentation gt(1, 2, 3, {1, 0, 0, 1, 0, 0});
  const SoftSegmentation pred(1, 2, 3, {0.5, 0.25, 0.25, 0.5, 0.25, 0.25});
  const LossReport r = iou_objective(expected_overlap(pred, gt));
  EXPECT_EQ(r.excluded, (std::vector<int>{1, 2}));
  ASSERT_EQ(r.per_class.size(), 1u);
  EXPECT_EQ(r.per_class[0].cls, 0);
}

TEST(UoiLoss, Examples) {
  const HardSegmentation h(1, 4, 4, {0, 1, 2, 3});
  EXPECT_DOUBLE_EQ(uoi_loss(expected_overlap(one_hot(h), one_hot(h))).value, 4.0);
  EXPECT_NEAR(uoi_loss(expected_overlap(two_pixel_pred(), two_pixel_gt())).value, 3.75, 1e-12);
}

TEST(UoiLoss, ZeroIntersectionIsDegenerate) {
  const SoftSegmentation pred(1, 2, 2, {1, 0, 1, 0});
  const SoftSegmentation gt(1, 2, 2, {0, 1, 0, 1});
  try {
    uoi_loss(expected_overlap(pred, gt));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateInput);
  }
}

TEST(UoiLoss, BoundedBelowByClassCount) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const SoftSegmentation p = testing::random_soft(3, 3, 4, rng);
    const SoftSegmentation g = one_hot(testing::random_labels(3, 3, 4, rng));
    const ExpectedOverlap o = expected_overlap(p, g);
    const LossReport u = uoi_loss(o);
    const LossReport i = iou_objective(o);
    EXPECT_GE(u.value, static_cast<double>(u.per_class.size()) - 1e-12);
    for (std::size_t c = 0; c < u.per_class.size(); ++c) {
      EXPECT_NEAR(u.per_class[c].value * i.per_class[c].value, 1.0, 1e-12);
    }
  }
}

TEST(CrossEntropy, Examples) {
  const HardSegmentation h(1, 2, 3, {0, 2});
  const double eps = kProbabilityFloor;
  EXPECT_NEAR(cross_entropy(one_hot(h).clamped(), one_hot(h)).value, -std::log(1 - 2 * eps), 1e-5);
  EXPECT_NEAR(cross_entropy(SoftSegmentation(1, 1, 2, {0.5, 0.5}), SoftSegmentation(1, 1, 2, {1, 0})).value,
              std::log(2.0), 1e-12);
  EXPECT_NEAR(cross_entropy(two_pixel_pred(), two_pixel_gt()).value,
              -(std::log(0.6) + std::log(0.8)) / 2.0, 1e-12);
  EXPECT_NEAR(cross_entropy(two_pixel_pred(), two_pixel_gt()).value, 0.367, 1e-3);
}

TEST(GradCrossEntropy, Examples) {
  const GradientField g = grad_cross_entropy(ScoreMap(1, 1, 2, {0, 0}), SoftSegmentation(1, 1, 2, {1, 0}));
  EXPECT_NEAR(g.values[0], -0.5, 1e-15);
  EXPECT_NEAR(g.values[1], 0.5, 1e-15);
  // pred = gt (soft, unclamped region) gives a zero field.
  const SoftSegmentation p(1, 1, 3, {0.2, 0.3, 0.5});
  for (double v : grad_cross_entropy(scores_for(p), p).values) EXPECT_NEAR(v, 0.0, 1e-15);
  EXPECT_THROW(grad_cross_entropy(ScoreMap(1, 1, 3, {0, 0, 0}), SoftSegmentation(1, 1, 2, {1, 0})), Error);
}

// At a matching one-hot optimum the gradients are stationary: rows sum to zero
// and entries vanish to the floor's order.
TEST(GradRatios, StationaryAtMatchingOneHot) {
  const HardSegmentation h(2, 2, 3, {0, 1, 2, 1});
  std::vector<double> z;
  for (std::size_t i = 0; i < 4; ++i) {
    for (int k = 0; k < 3; ++k) z.push_back(k == h.at(i) ? 30.0 : 0.0);
  }
  const ScoreMap scores(2, 2, 3, z);
  for (const GradientField& g : {grad_iou(scores, one_hot(h)), grad_uoi(scores, one_hot(h))}) {
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) {
        EXPECT_LT(std::abs(g.at(i, k)), 1e-6);
        s += g.at(i, k);
      }
      EXPECT_NEAR(s, 0.0, 1e-12);
    }
  }
}

TEST(GradRatios, RowsSumToZero) {
  std::mt19937_64 rng(4);
  const ScoreMap z = testing::random_scores(4, 4, 3, rng);
  const SoftSegmentation g = one_hot(testing::random_labels(4, 4, 3, rng));
  for (LossKind kind : {LossKind::kCrossEntropy, LossKind::kIouGain, LossKind::kUoi, LossKind::kCombined}) {
    const GradientField f = evaluate_loss(kind, z, g).gradient;
    for (std::size_t i = 0; i < 16; ++i) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += f.at(i, k);
      EXPECT_NEAR(s, 0.0, 1e-12);
    }
  }
}

TEST(FiniteDiff, SmallInstances) {
  std::mt19937_64 rng(5);
  const ScoreMap z43 = testing::random_scores(4, 4, 3, rng);
  const SoftSegmentation g43 = one_hot(testing::random_labels(4, 4, 3, rng));
  EXPECT_LT(finite_diff_check(LossKind::kCrossEntropy, z43, g43), 1e-6);
  EXPECT_LT(finite_diff_check(LossKind::kIouGain, z43, g43), 1e-5);
  EXPECT_LT(finite_diff_check(LossKind::kUoi, z43, g43), 1e-5);
  const ScoreMap z85 = testing::random_scores(8, 8, 5, rng);
  const SoftSegmentation g85 = one_hot(testing::random_labels(8, 8, 5, rng));
  EXPECT_LT(finite_diff_check(LossKind::kUoi, z85, g85), 1e-5);
  EXPECT_LT(finite_diff_check(LossKind::kIouGain, z85, g85), 1e-5);
  EXPECT_LT(finite_diff_check(LossKind::kCombined, z85, g85, 1e-5, 0.3), 1e-5);
}

TEST(FiniteDiff, SoftGroundTruth) {
  std::mt19937_64 rng(6);
  const ScoreMap z = testing::random_scores(3, 3, 4, rng);
  const SoftSegmentation g = testing::random_soft(3, 3, 4, rng);
  for (LossKind kind : {LossKind::kCrossEntropy, LossKind::kIouGain, LossKind::kUoi, LossKind::kCombined}) {
    EXPECT_LT(finite_diff_check(kind, z, g), 1e-5) << loss_name(kind);
  }
}

TEST(FiniteDiff, RejectsBadStep) {
  std::mt19937_64 rng(7);
  const ScoreMap z = testing::random_scores(2, 2, 2, rng);
  const SoftSegmentation g = one_hot(testing::random_labels(2, 2, 2, rng));
  EXPECT_THROW(finite_diff_check(LossKind::kUoi, z, g, 0.0), Error);
}

TEST(Combined, TwoPixelExample) {
  const LossAndGradient c = combined_loss(scores_for(two_pixel_pred()), two_pixel_gt(), 0.7);
  const double ce = -(std::log(0.6) + std::log(0.8)) / 2.0;
  EXPECT_NEAR(c.report.value, 0.7 * 3.75 + 0.3 * ce, 1e-9);
  EXPECT_NEAR(c.report.value, 2.735, 1e-3);
}

TEST(Combined, EndpointsMatchComponents) {
  std::mt19937_64 rng(8);
  const ScoreMap z = testing::random_scores(3, 4, 3, rng);
  const SoftSegmentation g = one_hot(testing::random_labels(3, 4, 3, rng));
  const LossAndGradient c0 = combined_loss(z, g, 0.0);
  const LossAndGradient ce = evaluate_loss(LossKind::kCrossEntropy, z, g);
  EXPECT_EQ(c0.report.value, ce.report.value);
  EXPECT_EQ(c0.gradient.values, ce.gradient.values);
  const LossAndGradient c1 = combined_loss(z, g, 1.0);
  const LossAndGradient u = evaluate_loss(LossKind::kUoi, z, g);
  EXPECT_EQ(c1.report.value, u.report.value);
  EXPECT_EQ(c1.gradient.values, u.gradient.values);
  EXPECT_THROW(combined_loss(z, g, 1.5), Error);
  EXPECT_THROW(combined_loss(z, g, -0.1), Error);
}

TEST(LossKindNames, RoundTrip) {
  for (LossKind kind : {LossKind::kCrossEntropy, LossKind::kIouGain, LossKind::kUoi, LossKind::kCombined}) {
    EXPECT_EQ(parse_loss_kind(loss_name(kind)), kind);
  }
  EXPECT_THROW(parse_loss_kind("hinge"), Error);
}

}  // namespace
}  // namespace segloss
