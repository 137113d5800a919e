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
#ifndef SEGLOSS_GRID_HPP_
#define SEGLOSS_GRID_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace segloss {

// Every stored prediction probability is clamped to [kProbabilityFloor, 1]
// and renormalized, so expected intersections never reach zero.
inline constexpr double kProbabilityFloor = 1e-7;

// Tolerance used when validating that a probability row sums to one.
inline constexpr double kRowSumTolerance = 1e-6;

struct GridShape {
  int height = 0;
  int width = 0;
  int classes = 0;

  std::size_t pixels() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t size() const { return pixels() * static_cast<std::size_t>(classes); }
  bool operator==(const GridShape&) const = default;
};

// Per-pixel class distributions, row-major pixel order (i = row * W + col),
// class-minor storage. Class 0 is background.
class SoftSegmentation {
 public:
  SoftSegmentation() = default;
  SoftSegmentation(int height, int width, int classes, std::vector<double> values);

  const GridShape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int classes() const { return shape_.classes; }
  std::size_t pixels() const { return shape_.pixels(); }

  double at(std::size_t pixel, int k) const {
    return values_[pixel * static_cast<std::size_t>(shape_.classes) +
                   static_cast<std::size_t>(k)];
  }
  std::span<const double> row(std::size_t pixel) const {
    return {values_.data() + pixel * static_cast<std::size_t>(shape_.classes),
            static_cast<std::size_t>(shape_.classes)};
  }
  std::span<const double> values() const { return values_; }

  // Copy with every entry clamped to [floor, 1] and each row renormalized.
  SoftSegmentation clamped(double floor = kProbabilityFloor) const;

 private:
  GridShape shape_;
  std::vector<double> values_;
};

class HardSegmentation {
 public:
  HardSegmentation() = default;
  HardSegmentation(int height, int width, int classes, std::vector<int> labels);

  const GridShape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int classes() const { return shape_.classes; }
  std::size_t pixels() const { return shape_.pixels(); }

  int at(std::size_t pixel) const { return labels_[pixel]; }
  int at(int row, int col) const {
    return labels_[static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_.width) +
                   static_cast<std::size_t>(col)];
  }
  std::span<const int> labels() const { return labels_; }

  bool operator==(const HardSegmentation&) const = default;

 private:
  GridShape shape_;
  std::vector<int> labels_;
};

// Unconstrained pre-softmax scores z[i,k].
class ScoreMap {
 public:
  ScoreMap() = default;
  ScoreMap(int height, int width, int classes, std::vector<double> scores);

  const GridShape& shape() const { return shape_; }
  std::size_t pixels() const { return shape_.pixels(); }
  int classes() const { return shape_.classes; }

  double at(std::size_t pixel, int k) const {
    return scores_[pixel * static_cast<std::size_t>(shape_.classes) +
                   static_cast<std::size_t>(k)];
  }
  std::span<const double> row(std::size_t pixel) const {
    return {scores_.data() + pixel * static_cast<std::size_t>(shape_.classes),
            static_cast<std::size_t>(shape_.classes)};
  }
  std::span<const double> values() const { return scores_; }

  // Copy with one coordinate shifted; used by finite-difference probes.
  ScoreMap perturbed(std::size_t index, double delta) const;

 private:
  GridShape shape_;
  std::vector<double> scores_;
};

// dL/dz[i,k], same layout as ScoreMap.
struct GradientField {
  GridShape shape;
  std::vector<double> values;

  double at(std::size_t pixel, int k) const {
    return values[pixel * static_cast<std::size_t>(shape.classes) + static_cast<std::size_t>(k)];
  }
};

// Full-resolution superpixel ids; ids must cover {0..count-1} with no gaps.
class SuperpixelMap {
 public:
  SuperpixelMap() = default;
  SuperpixelMap(int height, int width, std::vector<int> ids);

  int height() const { return height_; }
  int width() const { return width_; }
  int count() const { return count_; }
  int at(std::size_t pixel) const { return ids_[pixel]; }
  std::span<const int> ids() const { return ids_; }

 private:
  int height_ = 0;
  int width_ = 0;
  int count_ = 0;
  std::vector<int> ids_;
};

// Numerically stable softmax of one score row (max subtracted), unclamped.
void softmax_row(std::span<const double> scores, std::span<double> out);

// Softmax over every pixel; the result is clamped to kProbabilityFloor.
SoftSegmentation softmax(const ScoreMap& scores);

// J[k'][k] = d p[k'] / d z[k] = p[k'] * (1[k == k'] - p[k]), row-major K x K.
std::vector<double> softmax_jacobian(std::span<const double> probabilities);

// Lowest index attaining the maximum.
int argmax(std::span<const double> row);

HardSegmentation argmax(const SoftSegmentation& soft);

// Exact one-hot encoding of a label map (no clamping).
SoftSegmentation one_hot(const HardSegmentation& hard);

// Boundaries of the coarse patches along one axis: bounds[r] = round(r * full / coarse),
// with halves rounded up. Returns coarse + 1 entries.
std::vector<int> patch_bounds(int full, int coarse);

// For each full-resolution coordinate along one axis, the coarse patch containing it.
std::vector<int> patch_index(int full, int coarse);

SoftSegmentation downsample_to_soft(const HardSegmentation& gt, int coarse_height,
                                    int coarse_width);

HardSegmentation upsample_naive(const SoftSegmentation& coarse, int full_height, int full_width);

HardSegmentation upsample_superpixel(const SoftSegmentation& coarse, const SuperpixelMap& sp);

}  // namespace segloss

#endif  // SEGLOSS_GRID_HPP_
