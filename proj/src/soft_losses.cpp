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
#include "segloss/soft_losses.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "segloss/error.hpp"
#include "segloss/kernels.hpp"

namespace segloss {
namespace {

void require_same_shape(const GridShape& a, const GridShape& b) {
  require(a == b, "shape mismatch between prediction and ground truth");
}

LossReport ratio_report(const ExpectedOverlap& o, const char* name, bool union_over_intersection) {
  LossReport report;
  report.name = name;
  for (int k = 0; k < o.classes; ++k) {
    const auto u = static_cast<std::size_t>(k);
    if (!(o.gt_mass[u] > 0.0)) {
      report.excluded.push_back(k);
      continue;
    }
    double ratio = 0.0;
    if (union_over_intersection) {
      if (!(o.intersection[u] > 0.0)) {
        throw Error(ErrorKind::kDegenerateInput,
                    "zero expected intersection for class " + std::to_string(k));
      }
      ratio = o.union_[u] / o.intersection[u];
    } else {
      ratio = o.intersection[u] / o.union_[u];
    }
    report.value += ratio;
    report.per_class.push_back({k, ratio});
  }
  report.mean =
      report.per_class.empty() ? 0.0 : report.value / static_cast<double>(report.per_class.size());
  return report;
}

GradientField chain_through_softmax(const SoftSegmentation& pred, const SoftSegmentation& gt,
                                    const std::vector<double>& slope,
                                    const std::vector<double>& offset) {
  GradientField g{pred.shape(), std::vector<double>(pred.shape().size())};
  kernels::softmax_chain_gradient(pred.values(), gt.values(), slope, offset, g.values);
  return g;
}

// Per-class coefficients a[k'] = gt * slope + offset of d(ratio_k')/d pred[i,k'].
//   EI/EU: (gt * (EI + EU) - EI) / EU^2
//   EU/EI: (EI - gt * (EI + EU)) / EI^2
void ratio_coefficients(const ExpectedOverlap& o, bool union_over_intersection,
                        std::vector<double>& slope, std::vector<double>& offset) {
  const auto k = static_cast<std::size_t>(o.classes);
  slope.assign(k, 0.0);
  offset.assign(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (!(o.gt_mass[c] > 0.0)) continue;
    const double ei = o.intersection[c];
    const double eu = o.union_[c];
    if (union_over_intersection) {
      if (!(ei > 0.0)) {
        throw Error(ErrorKind::kDegenerateInput,
                    "zero expected intersection for class " + std::to_string(c));
      }
      slope[c] = -(ei + eu) / (ei * ei);
      offset[c] = 1.0 / ei;
    } else {
      slope[c] = (ei + eu) / (eu * eu);
      offset[c] = -ei / (eu * eu);
    }
  }
}

GradientField ratio_gradient(const ScoreMap& scores, const SoftSegmentation& gt,
                             bool union_over_intersection) {
  require_same_shape(scores.shape(), gt.shape());
  const SoftSegmentation pred = softmax(scores);
  std::vector<double> slope;
  std::vector<double> offset;
  ratio_coefficients(expected_overlap(pred, gt), union_over_intersection, slope, offset);
  return chain_through_softmax(pred, gt, slope, offset);
}

GradientField cross_entropy_gradient_of(const SoftSegmentation& pred, const SoftSegmentation& gt) {
  GradientField g{pred.shape(), std::vector<double>(pred.shape().size())};
  kernels::cross_entropy_gradient(pred.values(), gt.values(),
                                  1.0 / static_cast<double>(pred.pixels()), g.values);
  return g;
}

// Independent evaluation of L(softmax(z)) in precision T, used only as the
// finite-difference probe. Mirrors the clamping rule of the kernels.
template <typename T>
void clamped_softmax_row(const double* z, std::size_t classes, T* p) {
  const double top = *std::max_element(z, z + classes);
  T total = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    p[c] = std::exp(static_cast<T>(z[c]) - static_cast<T>(top));
    total += p[c];
  }
  const T floor = static_cast<T>(kProbabilityFloor);
  bool clamped = false;
  for (std::size_t c = 0; c < classes; ++c) {
    p[c] /= total;
    if (p[c] < floor) {
      p[c] = floor;
      clamped = true;
    }
  }
  if (clamped) {
    T renorm = 0;
    for (std::size_t c = 0; c < classes; ++c) renorm += p[c];
    for (std::size_t c = 0; c < classes; ++c) p[c] /= renorm;
  }
}

// Caches every pixel's probabilities so a probe that moves one score only
// re-runs that pixel's softmax. Sums still run over all pixels in order, so
// the value equals a from-scratch evaluation.
template <typename T>
class ObjectiveProbe {
 public:
  ObjectiveProbe(std::span<const double> z, std::span<const double> gt, std::size_t classes)
      : gt_(gt), classes_(classes), pixels_(z.size() / classes), probs_(z.size()), row_(classes) {
    for (std::size_t i = 0; i < pixels_; ++i) {
      clamped_softmax_row(&z[i * classes], classes, &probs_[i * classes]);
    }
  }

  // Objective with pixel `pixel`'s scores replaced by `scores`.
  T value(LossKind kind, double alpha, std::size_t pixel, const double* scores) {
    clamped_softmax_row(scores, classes_, row_.data());
    std::vector<T> ei(classes_, T(0)), eu(classes_, T(0)), mass(classes_, T(0));
    T ce = 0;
    for (std::size_t i = 0; i < pixels_; ++i) {
      const T* p = i == pixel ? row_.data() : &probs_[i * classes_];
      for (std::size_t c = 0; c < classes_; ++c) {
        const T g = static_cast<T>(gt_[i * classes_ + c]);
        ei[c] += p[c] * g;
        eu[c] += p[c] + g - p[c] * g;
        mass[c] += g;
        if (g != T(0)) ce -= g * std::log(p[c]);
      }
    }
    T iou = 0;
    T uoi = 0;
    for (std::size_t c = 0; c < classes_; ++c) {
      if (!(mass[c] > T(0))) continue;
      iou += ei[c] / eu[c];
      uoi += eu[c] / ei[c];
    }
    ce /= static_cast<T>(pixels_);
    switch (kind) {
      case LossKind::kCrossEntropy:
        return ce;
      case LossKind::kIouGain:
        return iou;
      case LossKind::kUoi:
        return uoi;
      case LossKind::kCombined:
        return static_cast<T>(alpha) * uoi + (T(1) - static_cast<T>(alpha)) * ce;
    }
    return T(0);
  }

 private:
  std::span<const double> gt_;
  std::size_t classes_;
  std::size_t pixels_;
  std::vector<T> probs_;
  std::vector<T> row_;
};

void require_weight(double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, "combined-loss weight must lie in [0, 1]");
}

}  // namespace

ExpectedOverlap ExpectedOverlap::zero(int classes) {
  const auto k = static_cast<std::size_t>(classes);
  return ExpectedOverlap{classes, std::vector<double>(k, 0.0), std::vector<double>(k, 0.0),
                         std::vector<double>(k, 0.0), 0.0};
}

std::vector<int> ExpectedOverlap::active_classes() const {
  std::vector<int> active;
  for (int k = 0; k < classes; ++k) {
    if (gt_mass[static_cast<std::size_t>(k)] > 0.0) active.push_back(k);
  }
  return active;
}

ExpectedOverlap expected_overlap(const SoftSegmentation& pred, const SoftSegmentation& gt) {
  require_same_shape(pred.shape(), gt.shape());
  kernels::OverlapSums sums = kernels::overlap_sums(pred.values(), gt.values(), pred.classes());
  return ExpectedOverlap{pred.classes(), std::move(sums.intersection), std::move(sums.union_),
                         std::move(sums.gt_mass), static_cast<double>(pred.pixels())};
}

ExpectedOverlap merge(const ExpectedOverlap& a, const ExpectedOverlap& b) {
  require(a.classes == b.classes, "cannot merge overlaps with different class counts");
  ExpectedOverlap out = a;
  for (std::size_t k = 0; k < out.intersection.size(); ++k) {
    out.intersection[k] += b.intersection[k];
    out.union_[k] += b.union_[k];
    out.gt_mass[k] += b.gt_mass[k];
  }
  out.pixels += b.pixels;
  return out;
}

LossReport iou_objective(const ExpectedOverlap& overlap) {
  return ratio_report(overlap, "iou", false);
}

LossReport uoi_loss(const ExpectedOverlap& overlap) { return ratio_report(overlap, "uoi", true); }

LossReport cross_entropy(const SoftSegmentation& pred, const SoftSegmentation& gt) {
  require_same_shape(pred.shape(), gt.shape());
  LossReport report;
  report.name = "cross_entropy";
  report.value = kernels::cross_entropy_sum(pred.values(), gt.values(), pred.classes()) /
                 static_cast<double>(pred.pixels());
  report.mean = report.value;
  return report;
}

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy:
      return "ce";
    case LossKind::kIouGain:
      return "iou";
    case LossKind::kUoi:
      return "uoi";
    case LossKind::kCombined:
      return "combined";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind kind :
       {LossKind::kCrossEntropy, LossKind::kIouGain, LossKind::kUoi, LossKind::kCombined}) {
    if (loss_name(kind) == name) return kind;
  }
  throw_invalid("unknown loss '" + std::string(name) + "' (expected ce, iou, uoi, combined)");
}

GradientField grad_iou(const ScoreMap& scores, const SoftSegmentation& gt) {
  return ratio_gradient(scores, gt, false);
}

GradientField grad_uoi(const ScoreMap& scores, const SoftSegmentation& gt) {
  return ratio_gradient(scores, gt, true);
}

GradientField grad_cross_entropy(const ScoreMap& scores, const SoftSegmentation& gt) {
  require_same_shape(scores.shape(), gt.shape());
  return cross_entropy_gradient_of(softmax(scores), gt);
}

LossAndGradient combined_loss(const ScoreMap& scores, const SoftSegmentation& gt, double alpha) {
  require_weight(alpha);
  return evaluate_loss(LossKind::kCombined, scores, gt, alpha);
}

LossAndGradient evaluate_loss(LossKind kind, const ScoreMap& scores, const SoftSegmentation& gt,
                              double alpha) {
  require_same_shape(scores.shape(), gt.shape());
  const SoftSegmentation pred = softmax(scores);
  switch (kind) {
    case LossKind::kCrossEntropy:
      return {cross_entropy(pred, gt), cross_entropy_gradient_of(pred, gt)};
    case LossKind::kIouGain:
    case LossKind::kUoi: {
      const bool uoi = kind == LossKind::kUoi;
      const ExpectedOverlap overlap = expected_overlap(pred, gt);
      std::vector<double> slope;
      std::vector<double> offset;
      ratio_coefficients(overlap, uoi, slope, offset);
      return {uoi ? uoi_loss(overlap) : iou_objective(overlap),
              chain_through_softmax(pred, gt, slope, offset)};
    }
    case LossKind::kCombined: {
      require_weight(alpha);
      const ExpectedOverlap overlap = expected_overlap(pred, gt);
      std::vector<double> slope;
      std::vector<double> offset;
      ratio_coefficients(overlap, true, slope, offset);
      const LossReport uoi = uoi_loss(overlap);
      const LossReport ce = cross_entropy(pred, gt);
      const GradientField g_uoi = chain_through_softmax(pred, gt, slope, offset);
      const GradientField g_ce = cross_entropy_gradient_of(pred, gt);
      LossAndGradient out;
      out.report.name = "combined";
      out.report.value = alpha * uoi.value + (1.0 - alpha) * ce.value;
      out.report.mean = alpha * uoi.mean + (1.0 - alpha) * ce.value;
      out.report.excluded = uoi.excluded;
      out.gradient.shape = g_uoi.shape;
      out.gradient.values.resize(g_uoi.values.size());
      for (std::size_t j = 0; j < g_uoi.values.size(); ++j) {
        out.gradient.values[j] = alpha * g_uoi.values[j] + (1.0 - alpha) * g_ce.values[j];
      }
      return out;
    }
  }
  throw_invalid("unknown loss kind");
}

double finite_diff_check(LossKind kind, const ScoreMap& scores, const SoftSegmentation& gt,
                         double h, double alpha) {
  require(h > 0.0, "finite-difference step must be positive");
  if (kind == LossKind::kCombined) require_weight(alpha);
  const GradientField analytic = evaluate_loss(kind, scores, gt, alpha).gradient;
  const auto k = static_cast<std::size_t>(scores.classes());
  std::vector<double> z(scores.values().begin(), scores.values().end());
  ObjectiveProbe<long double> probe(scores.values(), gt.values(), k);
  double worst = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const std::size_t pixel = j / k;
    const double* row = &z[pixel * k];
    const double saved = z[j];
    const double up = saved + h;
    const double down = saved - h;
    z[j] = up;
    const long double plus = probe.value(kind, alpha, pixel, row);
    z[j] = down;
    const long double minus = probe.value(kind, alpha, pixel, row);
    z[j] = saved;
    // Divide by the step actually taken after rounding z +- h to double.
    const long double span = static_cast<long double>(up) - static_cast<long double>(down);
    const double numeric = static_cast<double>((plus - minus) / span);
    const double err = std::abs(analytic.values[j] - numeric) / std::max(1e-8, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace segloss
