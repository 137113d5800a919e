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
#include "segloss/hard_metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "segloss/error.hpp"
#include "segloss/kernels.hpp"

namespace segloss {
namespace {

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double grid_point(SweepRange range, int j, int steps) {
  if (steps == 1) return range.lo;
  return range.lo + (range.hi - range.lo) * static_cast<double>(j) / static_cast<double>(steps - 1);
}

}  // namespace

ConfusionCounts ConfusionCounts::zero(int classes) {
  const auto k = static_cast<std::size_t>(classes);
  return ConfusionCounts{classes, std::vector<double>(k, 0.0), std::vector<double>(k, 0.0),
                         std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
}

double ConfusionCounts::predicted_total() const {
  double total = 0.0;
  for (std::size_t k = 0; k < true_positive.size(); ++k) {
    total += true_positive[k] + false_positive[k];
  }
  return total;
}

ConfusionCounts confusion_counts(std::span<const HardSegmentation> preds,
                                 std::span<const HardSegmentation> gts) {
  require(!preds.empty(), "empty corpus");
  require(preds.size() == gts.size(), "prediction and ground-truth lists differ in length");
  const int classes = gts.front().classes();
  ConfusionCounts counts = ConfusionCounts::zero(classes);
  for (std::size_t n = 0; n < preds.size(); ++n) {
    require(preds[n].shape() == gts[n].shape(),
            "shape mismatch for image " + std::to_string(n));
    require(gts[n].classes() == classes, "class count differs across the corpus");
    const kernels::ConfusionSums sums =
        kernels::confusion_sums(preds[n].labels(), gts[n].labels(), classes);
    for (std::size_t k = 0; k < static_cast<std::size_t>(classes); ++k) {
      counts.true_positive[k] += static_cast<double>(sums.true_positive[k]);
      counts.false_positive[k] += static_cast<double>(sums.false_positive[k]);
      counts.false_negative[k] += static_cast<double>(sums.false_negative[k]);
      counts.ground_truth[k] +=
          static_cast<double>(sums.true_positive[k] + sums.false_negative[k]);
    }
  }
  return counts;
}

ConfusionCounts merge(const ConfusionCounts& a, const ConfusionCounts& b) {
  require(a.classes == b.classes, "cannot merge counts with different class counts");
  ConfusionCounts out = a;
  for (std::size_t k = 0; k < out.true_positive.size(); ++k) {
    out.true_positive[k] += b.true_positive[k];
    out.false_positive[k] += b.false_positive[k];
    out.false_negative[k] += b.false_negative[k];
    out.ground_truth[k] += b.ground_truth[k];
  }
  return out;
}

double ClassScores::mean() const {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      total += *v;
      ++n;
    }
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

std::size_t ClassScores::included_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.has_value() ? 1 : 0;
  return n;
}

ClassScores class_iou(const ConfusionCounts& c) {
  ClassScores out;
  for (int k = 0; k < c.classes; ++k) {
    const auto u = static_cast<std::size_t>(k);
    const double denom = c.true_positive[u] + c.false_positive[u] + c.false_negative[u];
    if (denom > 0.0) {
      out.values.emplace_back(c.true_positive[u] / denom);
    } else {
      out.values.emplace_back(std::nullopt);
      out.excluded.push_back(k);
    }
  }
  return out;
}

ClassScores class_iou_gain_form(const ConfusionCounts& c) {
  ClassScores out;
  for (int k = 0; k < c.classes; ++k) {
    const auto u = static_cast<std::size_t>(k);
    const double denom = c.ground_truth[u] + c.false_positive[u];
    if (denom > 0.0) {
      out.values.emplace_back((c.ground_truth[u] - c.false_negative[u]) / denom);
    } else {
      out.values.emplace_back(std::nullopt);
      out.excluded.push_back(k);
    }
  }
  return out;
}

ClassScores class_uoi(const ConfusionCounts& c) {
  ClassScores out;
  for (int k = 0; k < c.classes; ++k) {
    const auto u = static_cast<std::size_t>(k);
    const double hits = c.ground_truth[u] - c.false_negative[u];
    if (hits > 0.0) {
      out.values.emplace_back((c.ground_truth[u] + c.false_positive[u]) / hits);
    } else {
      out.values.emplace_back(std::nullopt);
      out.excluded.push_back(k);
    }
  }
  return out;
}

double mean_iou(const ConfusionCounts& counts) { return class_iou(counts).mean(); }

double mean_uoi(const ConfusionCounts& counts) { return class_uoi(counts).mean(); }

MistakeGradient iou_grad_fpfn(double gt, double fn, double fp) {
  const double denom = gt + fp;
  if (!(denom > 0.0)) throw Error(ErrorKind::kDegenerateInput, "GT + FP must be positive");
  return {-(gt - fn) / (denom * denom), -1.0 / denom};
}

MistakeGradient uoi_grad_fpfn(double gt, double fn, double fp) {
  const double hits = gt - fn;
  if (!(hits > 0.0)) throw Error(ErrorKind::kDegenerateInput, "GT - FN must be positive");
  return {1.0 / hits, (gt + fp) / (hits * hits)};
}

double lower_bound_gap(std::span<const double> per_class_iou) {
  require(!per_class_iou.empty(), "empty IOU vector");
  double sum = 0.0;
  double reciprocal_sum = 0.0;
  for (double x : per_class_iou) {
    require(x > 0.0, "per-class IOU must be strictly positive");
    sum += x;
    reciprocal_sum += 1.0 / x;
  }
  return sum - 1.0 / reciprocal_sum;
}

SweepTable gradient_sweep(double gt, SweepRange fp, SweepRange fn, int steps) {
  require(gt > 0.0, "sweep ground-truth count must be positive");
  require(steps >= 1, "sweep needs at least one step");
  require(fp.lo >= 0.0 && fp.hi >= fp.lo, "invalid FP range");
  require(fn.lo >= 0.0 && fn.hi >= fn.lo, "invalid FN range");
  SweepTable table;
  table.gt = gt;
  for (int j = 0; j < steps; ++j) table.fp_values.push_back(grid_point(fp, j, steps));
  std::size_t dropped = 0;
  for (int j = 0; j < steps; ++j) {
    const double v = grid_point(fn, j, steps);
    if (gt - v > 0.0) {
      table.fn_values.push_back(v);
    } else {
      ++dropped;
    }
  }
  if (dropped > 0) {
    table.warnings.push_back("dropped " + std::to_string(dropped) +
                             " FN values with GT - FN <= 0");
  }
  table.rows.reserve(table.fn_values.size() * table.fp_values.size());
  for (double fn_v : table.fn_values) {
    for (double fp_v : table.fp_values) {
      SweepRow row;
      row.fp = fp_v;
      row.fn = fn_v;
      row.iou = (gt - fn_v) / (gt + fp_v);
      row.uoi = (gt + fp_v) / (gt - fn_v);
      row.iou_grad = iou_grad_fpfn(gt, fn_v, fp_v);
      row.uoi_grad = uoi_grad_fpfn(gt, fn_v, fp_v);
      table.rows.push_back(row);
    }
  }
  return table;
}

SweepCheck check_sweep(const SweepTable& table) {
  SweepCheck check;
  const std::size_t n_fp = table.fp_values.size();
  const std::size_t n_fn = table.fn_values.size();
  for (std::size_t a = 0; a < n_fn; ++a) {
    ++check.lines_checked;
    for (std::size_t b = 1; b < n_fp; ++b) {
      const SweepRow& prev = table.at(a, b - 1);
      const SweepRow& cur = table.at(a, b);
      if (!(std::abs(cur.iou_grad.d_fp) < std::abs(prev.iou_grad.d_fp))) {
        check.iou_fp_decreasing = false;
      }
      if (cur.uoi_grad.d_fp != prev.uoi_grad.d_fp) check.uoi_fp_constant = false;
    }
  }
  for (std::size_t b = 0; b < n_fp; ++b) {
    ++check.lines_checked;
    for (std::size_t a = 1; a < n_fn; ++a) {
      if (!(std::abs(table.at(a, b).uoi_grad.d_fn) > std::abs(table.at(a - 1, b).uoi_grad.d_fn))) {
        check.uoi_fn_increasing = false;
      }
    }
  }
  return check;
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
  out << "FP,FN,IOU,UOI,dIOU_dFP,dIOU_dFN,dUOI_dFP,dUOI_dFN\n";
  for (const SweepRow& r : table.rows) {
    out << fmt9(r.fp) << ',' << fmt9(r.fn) << ',' << fmt9(r.iou) << ',' << fmt9(r.uoi) << ','
        << fmt9(r.iou_grad.d_fp) << ',' << fmt9(r.iou_grad.d_fn) << ',' << fmt9(r.uoi_grad.d_fp)
        << ',' << fmt9(r.uoi_grad.d_fn) << '\n';
  }
}

}  // namespace segloss
