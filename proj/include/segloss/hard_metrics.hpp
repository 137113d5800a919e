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
#ifndef SEGLOSS_HARD_METRICS_HPP_
#define SEGLOSS_HARD_METRICS_HPP_

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segloss/grid.hpp"

namespace segloss {

// Corpus-level per-class counts. Stored as reals so the continuous
// gradient analysis can run on the same type; counting yields integers.
struct ConfusionCounts {
  int classes = 0;
  std::vector<double> true_positive;
  std::vector<double> false_positive;
  std::vector<double> false_negative;
  std::vector<double> ground_truth;

  static ConfusionCounts zero(int classes);
  double predicted_total() const;
};

ConfusionCounts confusion_counts(std::span<const HardSegmentation> preds,
                                 std::span<const HardSegmentation> gts);

ConfusionCounts merge(const ConfusionCounts& a, const ConfusionCounts& b);

// Per-class values; classes without a value are listed in `excluded`.
struct ClassScores {
  std::vector<std::optional<double>> values;
  std::vector<int> excluded;

  double mean() const;
  std::size_t included_count() const;
};

// TP / (TP + FP + FN); classes with no pixels in prediction or truth are excluded.
ClassScores class_iou(const ConfusionCounts& counts);
// (GT - FN) / (GT + FP), the same quantity written as a function of the mistakes.
ClassScores class_iou_gain_form(const ConfusionCounts& counts);
// (GT + FP) / (GT - FN); classes with GT - FN = 0 are excluded as degenerate.
ClassScores class_uoi(const ConfusionCounts& counts);

double mean_iou(const ConfusionCounts& counts);
double mean_uoi(const ConfusionCounts& counts);

struct MistakeGradient {
  double d_fp = 0.0;
  double d_fn = 0.0;
};

// dIOU_k/dFP = -(GT - FN) / (GT + FP)^2, dIOU_k/dFN = -1 / (GT + FP).
MistakeGradient iou_grad_fpfn(double gt, double fn, double fp);
// dUOI_k/dFP = 1 / (GT - FN), dUOI_k/dFN = (GT + FP) / (GT - FN)^2.
MistakeGradient uoi_grad_fpfn(double gt, double fn, double fp);

// sum_k IOU_k - 1 / sum_k (1 / IOU_k); nonnegative for IOUs in (0, 1].
double lower_bound_gap(std::span<const double> per_class_iou);

struct SweepRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct SweepRow {
  double fp = 0.0;
  double fn = 0.0;
  double iou = 0.0;
  double uoi = 0.0;
  MistakeGradient iou_grad;
  MistakeGradient uoi_grad;
};

// Dense evaluation over an FN x FP grid, FN-major. FN values with
// GT - FN <= 0 are dropped and reported in `warnings`.
struct SweepTable {
  double gt = 0.0;
  std::vector<double> fp_values;
  std::vector<double> fn_values;
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;

  const SweepRow& at(std::size_t fn_index, std::size_t fp_index) const {
    return rows[fn_index * fp_values.size() + fp_index];
  }
};

SweepTable gradient_sweep(double gt, SweepRange fp, SweepRange fn, int steps);

struct SweepCheck {
  bool iou_fp_decreasing = true;  // |dIOU/dFP| strictly decreasing along every FP line
  bool uoi_fp_constant = true;    // dUOI/dFP constant along every FP line
  bool uoi_fn_increasing = true;  // |dUOI/dFN| strictly increasing along every FN line
  std::size_t lines_checked = 0;

  bool all() const { return iou_fp_decreasing && uoi_fp_constant && uoi_fn_increasing; }
};

SweepCheck check_sweep(const SweepTable& table);

// Header FP,FN,IOU,UOI,dIOU_dFP,dIOU_dFN,dUOI_dFP,dUOI_dFN; 9 significant digits.
void write_sweep_csv(std::ostream& out, const SweepTable& table);

}  // namespace segloss

#endif  // SEGLOSS_HARD_METRICS_HPP_
