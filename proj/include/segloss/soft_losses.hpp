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
#ifndef SEGLOSS_SOFT_LOSSES_HPP_
#define SEGLOSS_SOFT_LOSSES_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "segloss/grid.hpp"

namespace segloss {

inline constexpr double kDefaultCombinedWeight = 0.7;
inline constexpr double kDefaultFiniteDiffStep = 1e-5;

// Expected per-class intersection and union of a soft prediction against a
// soft ground truth. All fields are plain sums over pixels, so overlaps of
// disjoint pixel sets merge by addition.
struct ExpectedOverlap {
  int classes = 0;
  std::vector<double> intersection;
  std::vector<double> union_;
  std::vector<double> gt_mass;
  double pixels = 0.0;

  static ExpectedOverlap zero(int classes);

  // Classes with ground-truth mass; the only ones that enter loss sums.
  std::vector<int> active_classes() const;
};

ExpectedOverlap expected_overlap(const SoftSegmentation& pred, const SoftSegmentation& gt);

ExpectedOverlap merge(const ExpectedOverlap& a, const ExpectedOverlap& b);

struct ClassValue {
  int cls = 0;
  double value = 0.0;
  bool operator==(const ClassValue&) const = default;
};

struct LossReport {
  std::string name;
  double value = 0.0;  // sum form (what is optimized)
  double mean = 0.0;   // value / number of active classes (what is reported)
  std::vector<ClassValue> per_class;
  std::vector<int> excluded;  // classes with zero ground-truth mass
};

// Sum over active classes of EI/EU. A gain: higher is better.
LossReport iou_objective(const ExpectedOverlap& overlap);

// Sum over active classes of EU/EI. A loss; throws kDegenerateInput when an
// active class has zero expected intersection.
LossReport uoi_loss(const ExpectedOverlap& overlap);

// -(1/N) sum_i sum_k gt[i,k] log pred[i,k].
LossReport cross_entropy(const SoftSegmentation& pred, const SoftSegmentation& gt);

enum class LossKind { kCrossEntropy, kIouGain, kUoi, kCombined };

std::string_view loss_name(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

// Gradients with respect to the pre-softmax scores. grad_iou is the gradient
// of the gain (an ascent direction); the others are descent gradients.
GradientField grad_iou(const ScoreMap& scores, const SoftSegmentation& gt);
GradientField grad_uoi(const ScoreMap& scores, const SoftSegmentation& gt);
GradientField grad_cross_entropy(const ScoreMap& scores, const SoftSegmentation& gt);

struct LossAndGradient {
  LossReport report;
  GradientField gradient;
};

// alpha * UOI + (1 - alpha) * CE, with the matching linear combination of gradients.
LossAndGradient combined_loss(const ScoreMap& scores, const SoftSegmentation& gt,
                              double alpha = kDefaultCombinedWeight);

// Value and gradient of one objective evaluated at softmax(scores). For
// kIouGain the value is the gain and the gradient its ascent direction.
LossAndGradient evaluate_loss(LossKind kind, const ScoreMap& scores, const SoftSegmentation& gt,
                              double alpha = kDefaultCombinedWeight);

// Max over coordinates of |analytic - numeric| / max(1e-8, |numeric|), where
// numeric is the central difference with step h. The probe objective is
// evaluated in extended precision on a path separate from the kernels.
double finite_diff_check(LossKind kind, const ScoreMap& scores, const SoftSegmentation& gt,
                         double h = kDefaultFiniteDiffStep,
                         double alpha = kDefaultCombinedWeight);

}  // namespace segloss

#endif  // SEGLOSS_SOFT_LOSSES_HPP_
