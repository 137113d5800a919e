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
#include "segloss/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "segloss/error.hpp"
#include "segloss/kernels.hpp"

namespace segloss {
namespace {

void check_dims(int height, int width, int classes, int min_classes) {
  require(height > 0 && width > 0, "grid dimensions must be positive");
  require(classes >= min_classes,
          "class count must be at least " + std::to_string(min_classes));
}

}  // namespace

SoftSegmentation::SoftSegmentation(int height, int width, int classes, std::vector<double> values)
    : shape_{height, width, classes}, values_(std::move(values)) {
  check_dims(height, width, classes, 2);
  require(values_.size() == shape_.size(), "soft segmentation value count mismatch");
  const auto k = static_cast<std::size_t>(classes);
  for (std::size_t i = 0; i < shape_.pixels(); ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = values_[i * k + c];
      if (!(std::isfinite(p) && p >= 0.0 && p <= 1.0 + kRowSumTolerance)) {
        throw_invalid("probability outside [0, 1] at pixel " + std::to_string(i));
      }
      total += p;
    }
    if (!(std::abs(total - 1.0) <= kRowSumTolerance)) {
      throw_invalid("probabilities do not sum to 1 at pixel " + std::to_string(i));
    }
  }
}

SoftSegmentation SoftSegmentation::clamped(double floor) const {
  SoftSegmentation out = *this;
  const auto k = static_cast<std::size_t>(shape_.classes);
  for (std::size_t i = 0; i < shape_.pixels(); ++i) {
    double* row = out.values_.data() + i * k;
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      row[c] = std::clamp(row[c], floor, 1.0);
      total += row[c];
    }
    for (std::size_t c = 0; c < k; ++c) row[c] /= total;
  }
  return out;
}

HardSegmentation::HardSegmentation(int height, int width, int classes, std::vector<int> labels)
    : shape_{height, width, classes}, labels_(std::move(labels)) {
  check_dims(height, width, classes, 1);
  require(labels_.size() == shape_.pixels(), "hard segmentation label count mismatch");
  for (int label : labels_) {
    if (label < 0 || label >= classes) {
      throw_invalid("label " + std::to_string(label) + " out of range");
    }
  }
}

ScoreMap::ScoreMap(int height, int width, int classes, std::vector<double> scores)
    : shape_{height, width, classes}, scores_(std::move(scores)) {
  check_dims(height, width, classes, 2);
  require(scores_.size() == shape_.size(), "score map value count mismatch");
  for (double z : scores_) require(std::isfinite(z), "non-finite score");
}

ScoreMap ScoreMap::perturbed(std::size_t index, double delta) const {
  ScoreMap out = *this;
  out.scores_.at(index) += delta;
  return out;
}

SuperpixelMap::SuperpixelMap(int height, int width, std::vector<int> ids)
    : height_(height), width_(width), ids_(std::move(ids)) {
  check_dims(height, width, 1, 1);
  require(ids_.size() == static_cast<std::size_t>(height) * static_cast<std::size_t>(width),
          "superpixel id count mismatch");
  int top = -1;
  for (int id : ids_) {
    require(id >= 0, "negative superpixel id");
    top = std::max(top, id);
  }
  count_ = top + 1;
  std::vector<char> seen(static_cast<std::size_t>(count_), 0);
  for (int id : ids_) seen[static_cast<std::size_t>(id)] = 1;
  require(std::all_of(seen.begin(), seen.end(), [](char s) { return s != 0; }),
          "superpixel ids are not contiguous (empty superpixel)");
}

void softmax_row(std::span<const double> scores, std::span<double> out) {
  require(scores.size() == out.size() && !scores.empty(), "softmax row size mismatch");
  for (double z : scores) require(std::isfinite(z), "non-finite score");
  kernels::serial::softmax_rows(scores, static_cast<int>(scores.size()), 0.0, out);
}

SoftSegmentation softmax(const ScoreMap& scores) {
  const GridShape& s = scores.shape();
  std::vector<double> probs(s.size());
  kernels::softmax_rows(scores.values(), s.classes, kProbabilityFloor, probs);
  return SoftSegmentation(s.height, s.width, s.classes, std::move(probs));
}

std::vector<double> softmax_jacobian(std::span<const double> p) {
  require(!p.empty(), "empty probability row");
  double total = 0.0;
  for (double v : p) total += v;
  require(std::abs(total - 1.0) <= kRowSumTolerance, "probability row does not sum to 1");
  const std::size_t k = p.size();
  std::vector<double> jac(k * k);
  for (std::size_t out = 0; out < k; ++out) {
    for (std::size_t in = 0; in < k; ++in) {
      jac[out * k + in] = p[out] * ((in == out ? 1.0 : 0.0) - p[in]);
    }
  }
  return jac;
}

int argmax(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

HardSegmentation argmax(const SoftSegmentation& soft) {
  std::vector<int> labels(soft.pixels());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = argmax(soft.row(i));
  return HardSegmentation(soft.height(), soft.width(), soft.classes(), std::move(labels));
}

SoftSegmentation one_hot(const HardSegmentation& hard) {
  const auto k = static_cast<std::size_t>(hard.classes());
  std::vector<double> values(hard.pixels() * k, 0.0);
  for (std::size_t i = 0; i < hard.pixels(); ++i) {
    values[i * k + static_cast<std::size_t>(hard.at(i))] = 1.0;
  }
  return SoftSegmentation(hard.height(), hard.width(), hard.classes(), std::move(values));
}

std::vector<int> patch_bounds(int full, int coarse) {
  require(coarse > 0, "coarse dimension must be positive");
  require(coarse <= full, "coarse dimension exceeds full dimension");
  std::vector<int> bounds(static_cast<std::size_t>(coarse) + 1);
  for (int r = 0; r <= coarse; ++r) {
    // round(r * full / coarse), halves up, in exact integer arithmetic.
    const long long num = 2LL * r * full + coarse;
    bounds[static_cast<std::size_t>(r)] = static_cast<int>(num / (2LL * coarse));
  }
  return bounds;
}

std::vector<int> patch_index(int full, int coarse) {
  const std::vector<int> bounds = patch_bounds(full, coarse);
  std::vector<int> index(static_cast<std::size_t>(full));
  for (int r = 0; r < coarse; ++r) {
    for (int j = bounds[static_cast<std::size_t>(r)]; j < bounds[static_cast<std::size_t>(r) + 1];
         ++j) {
      index[static_cast<std::size_t>(j)] = r;
    }
  }
  return index;
}

SoftSegmentation downsample_to_soft(const HardSegmentation& gt, int coarse_height,
                                    int coarse_width) {
  const std::vector<int> rows = patch_index(gt.height(), coarse_height);
  const std::vector<int> cols = patch_index(gt.width(), coarse_width);
  const auto k = static_cast<std::size_t>(gt.classes());
  const std::size_t coarse_pixels =
      static_cast<std::size_t>(coarse_height) * static_cast<std::size_t>(coarse_width);
  std::vector<double> counts(coarse_pixels * k, 0.0);
  std::vector<double> area(coarse_pixels, 0.0);
  for (int r = 0; r < gt.height(); ++r) {
    for (int c = 0; c < gt.width(); ++c) {
      const std::size_t cell = static_cast<std::size_t>(rows[static_cast<std::size_t>(r)]) *
                                   static_cast<std::size_t>(coarse_width) +
                               static_cast<std::size_t>(cols[static_cast<std::size_t>(c)]);
      counts[cell * k + static_cast<std::size_t>(gt.at(r, c))] += 1.0;
      area[cell] += 1.0;
    }
  }
  for (std::size_t cell = 0; cell < coarse_pixels; ++cell) {
    for (std::size_t j = 0; j < k; ++j) counts[cell * k + j] /= area[cell];
  }
  return SoftSegmentation(coarse_height, coarse_width, gt.classes(), std::move(counts));
}

HardSegmentation upsample_naive(const SoftSegmentation& coarse, int full_height, int full_width) {
  require(full_height >= coarse.height() && full_width >= coarse.width(),
          "full resolution smaller than coarse grid");
  const std::vector<int> rows = patch_index(full_height, coarse.height());
  const std::vector<int> cols = patch_index(full_width, coarse.width());
  std::vector<int> coarse_labels(coarse.pixels());
  for (std::size_t i = 0; i < coarse.pixels(); ++i) coarse_labels[i] = argmax(coarse.row(i));
  std::vector<int> labels(static_cast<std::size_t>(full_height) *
                          static_cast<std::size_t>(full_width));
  for (int r = 0; r < full_height; ++r) {
    for (int c = 0; c < full_width; ++c) {
      labels[static_cast<std::size_t>(r) * static_cast<std::size_t>(full_width) +
             static_cast<std::size_t>(c)] =
          coarse_labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)]) *
                            static_cast<std::size_t>(coarse.width()) +
                        static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])];
    }
  }
  return HardSegmentation(full_height, full_width, coarse.classes(), std::move(labels));
}

HardSegmentation upsample_superpixel(const SoftSegmentation& coarse, const SuperpixelMap& sp) {
  const int full_height = sp.height();
  const int full_width = sp.width();
  require(full_height >= coarse.height() && full_width >= coarse.width(),
          "full resolution smaller than coarse grid");
  const std::vector<int> rows = patch_index(full_height, coarse.height());
  const std::vector<int> cols = patch_index(full_width, coarse.width());
  const auto k = static_cast<std::size_t>(coarse.classes());
  const auto count = static_cast<std::size_t>(sp.count());

  // overlap[s] maps patch -> |s ∩ patch|.
  std::vector<std::map<std::size_t, double>> overlap(count);
  std::vector<double> size(count, 0.0);
  for (int r = 0; r < full_height; ++r) {
    for (int c = 0; c < full_width; ++c) {
      const std::size_t j = static_cast<std::size_t>(r) * static_cast<std::size_t>(full_width) +
                            static_cast<std::size_t>(c);
      const auto s = static_cast<std::size_t>(sp.at(j));
      const std::size_t cell = static_cast<std::size_t>(rows[static_cast<std::size_t>(r)]) *
                                   static_cast<std::size_t>(coarse.width()) +
                               static_cast<std::size_t>(cols[static_cast<std::size_t>(c)]);
      overlap[s][cell] += 1.0;
      size[s] += 1.0;
    }
  }
  std::vector<int> sp_label(count);
  std::vector<double> dist(k);
  for (std::size_t s = 0; s < count; ++s) {
    require(size[s] > 0.0, "empty superpixel");
    std::fill(dist.begin(), dist.end(), 0.0);
    for (const auto& [cell, shared] : overlap[s]) {
      const double weight = shared / size[s];
      for (std::size_t m = 0; m < k; ++m) dist[m] += weight * coarse.at(cell, static_cast<int>(m));
    }
    sp_label[s] = argmax(dist);
  }
  std::vector<int> labels(sp.ids().size());
  for (std::size_t j = 0; j < labels.size(); ++j) {
    labels[j] = sp_label[static_cast<std::size_t>(sp.at(j))];
  }
  return HardSegmentation(full_height, full_width, coarse.classes(), std::move(labels));
}

}  // namespace segloss
