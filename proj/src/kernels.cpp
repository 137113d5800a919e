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
#include "segloss/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <omp.h>

namespace segloss::kernels {
namespace {

std::size_t as_size(int n) { return static_cast<std::size_t>(n); }

void softmax_one(const double* z, std::size_t k, double floor, double* p) {
  const double top = *std::max_element(z, z + k);
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    p[c] = std::exp(z[c] - top);
    total += p[c];
  }
  bool clamped = false;
  for (std::size_t c = 0; c < k; ++c) {
    p[c] /= total;
    if (p[c] < floor) {
      p[c] = floor;
      clamped = true;
    }
  }
  if (!clamped) return;
  double renorm = 0.0;
  for (std::size_t c = 0; c < k; ++c) renorm += p[c];
  for (std::size_t c = 0; c < k; ++c) p[c] /= renorm;
}

void chain_one(const double* pred, const double* gt, const double* slope, const double* offset,
               std::size_t k, double* v, double* out) {
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    v[c] = (gt[c] * slope[c] + offset[c]) * pred[c];
    total += v[c];
  }
  for (std::size_t c = 0; c < k; ++c) out[c] = v[c] - pred[c] * total;
}

std::size_t chunk_count(std::size_t pixels) {
  return (pixels + kReductionChunk - 1) / kReductionChunk;
}

}  // namespace

namespace serial {

void softmax_rows(std::span<const double> scores, int classes, double floor,
                  std::span<double> out) {
  const std::size_t k = as_size(classes);
  const std::size_t n = scores.size() / k;
  for (std::size_t i = 0; i < n; ++i) softmax_one(&scores[i * k], k, floor, &out[i * k]);
}

OverlapSums overlap_sums(std::span<const double> pred, std::span<const double> gt, int classes) {
  const std::size_t k = as_size(classes);
  const std::size_t n = pred.size() / k;
  OverlapSums sums{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0),
                   std::vector<double>(k, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const double a = pred[i * k + c];
      const double b = gt[i * k + c];
      sums.intersection[c] += a * b;
      sums.union_[c] += a + b - a * b;
      sums.gt_mass[c] += b;
    }
  }
  return sums;
}

double cross_entropy_sum(std::span<const double> pred, std::span<const double> gt, int classes) {
  (void)classes;
  double total = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    if (gt[j] != 0.0) total -= gt[j] * std::log(pred[j]);
  }
  return total;
}

void softmax_chain_gradient(std::span<const double> pred, std::span<const double> gt,
                            std::span<const double> slope, std::span<const double> offset,
                            std::span<double> out) {
  const std::size_t k = slope.size();
  const std::size_t n = pred.size() / k;
  std::vector<double> v(k);
  for (std::size_t i = 0; i < n; ++i) {
    chain_one(&pred[i * k], &gt[i * k], slope.data(), offset.data(), k, v.data(), &out[i * k]);
  }
}

void cross_entropy_gradient(std::span<const double> pred, std::span<const double> gt,
                            double scale, std::span<double> out) {
  for (std::size_t j = 0; j < pred.size(); ++j) out[j] = scale * (pred[j] - gt[j]);
}

ConfusionSums confusion_sums(std::span<const int> pred, std::span<const int> gt, int classes) {
  const std::size_t k = as_size(classes);
  ConfusionSums sums{std::vector<std::int64_t>(k, 0), std::vector<std::int64_t>(k, 0),
                     std::vector<std::int64_t>(k, 0)};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = static_cast<std::size_t>(pred[i]);
    const auto g = static_cast<std::size_t>(gt[i]);
    if (p == g) {
      ++sums.true_positive[p];
    } else {
      ++sums.false_positive[p];
      ++sums.false_negative[g];
    }
  }
  return sums;
}

void linear_forward(std::span<const double> features, int dims, std::span<const double> weights,
                    std::span<const double> bias, std::span<double> scores) {
  const std::size_t d = as_size(dims);
  const std::size_t k = bias.size();
  const std::size_t n = features.size() / d;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double acc = bias[c];
      for (std::size_t f = 0; f < d; ++f) acc += weights[c * d + f] * features[i * d + f];
      scores[i * k + c] = acc;
    }
  }
}

void linear_backward(std::span<const double> features, int dims, std::span<const double> grad,
                     int classes, std::span<double> grad_weights, std::span<double> grad_bias) {
  const std::size_t d = as_size(dims);
  const std::size_t k = as_size(classes);
  const std::size_t n = features.size() / d;
  std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const double g = grad[i * k + c];
      grad_bias[c] += g;
      for (std::size_t f = 0; f < d; ++f) grad_weights[c * d + f] += g * features[i * d + f];
    }
  }
}

}  // namespace serial

void softmax_rows(std::span<const double> scores, int classes, double floor,
                  std::span<double> out) {
  const std::size_t k = as_size(classes);
  const auto n = static_cast<std::ptrdiff_t>(scores.size() / k);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i) * k;
    softmax_one(&scores[row], k, floor, &out[row]);
  }
}

OverlapSums overlap_sums(std::span<const double> pred, std::span<const double> gt, int classes) {
  const std::size_t k = as_size(classes);
  const std::size_t n = pred.size() / k;
  const std::size_t chunks = chunk_count(n);
  std::vector<OverlapSums> partial(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t end = std::min(n, begin + kReductionChunk);
    partial[static_cast<std::size_t>(c)] =
        serial::overlap_sums(pred.subspan(begin * k, (end - begin) * k),
                             gt.subspan(begin * k, (end - begin) * k), classes);
  }
  OverlapSums sums{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0),
                   std::vector<double>(k, 0.0)};
  for (const auto& part : partial) {
    for (std::size_t j = 0; j < k; ++j) {
      sums.intersection[j] += part.intersection[j];
      sums.union_[j] += part.union_[j];
      sums.gt_mass[j] += part.gt_mass[j];
    }
  }
  return sums;
}

double cross_entropy_sum(std::span<const double> pred, std::span<const double> gt, int classes) {
  const std::size_t k = as_size(classes);
  const std::size_t n = pred.size() / k;
  const std::size_t chunks = chunk_count(n);
  std::vector<double> partial(chunks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t end = std::min(n, begin + kReductionChunk);
    partial[static_cast<std::size_t>(c)] =
        serial::cross_entropy_sum(pred.subspan(begin * k, (end - begin) * k),
                                  gt.subspan(begin * k, (end - begin) * k), classes);
  }
  double total = 0.0;
  for (double part : partial) total += part;
  return total;
}

void softmax_chain_gradient(std::span<const double> pred, std::span<const double> gt,
                            std::span<const double> slope, std::span<const double> offset,
                            std::span<double> out) {
  const std::size_t k = slope.size();
  const auto n = static_cast<std::ptrdiff_t>(pred.size() / k);
#pragma omp parallel
  {
    std::vector<double> v(k);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto row = static_cast<std::size_t>(i) * k;
      chain_one(&pred[row], &gt[row], slope.data(), offset.data(), k, v.data(), &out[row]);
    }
  }
}

void cross_entropy_gradient(std::span<const double> pred, std::span<const double> gt,
                            double scale, std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(pred.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    const auto u = static_cast<std::size_t>(j);
    out[u] = scale * (pred[u] - gt[u]);
  }
}

ConfusionSums confusion_sums(std::span<const int> pred, std::span<const int> gt, int classes) {
  const std::size_t k = as_size(classes);
  const std::size_t n = pred.size();
  const std::size_t chunks = chunk_count(n);
  std::vector<ConfusionSums> partial(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t end = std::min(n, begin + kReductionChunk);
    partial[static_cast<std::size_t>(c)] = serial::confusion_sums(
        pred.subspan(begin, end - begin), gt.subspan(begin, end - begin), classes);
  }
  ConfusionSums sums{std::vector<std::int64_t>(k, 0), std::vector<std::int64_t>(k, 0),
                     std::vector<std::int64_t>(k, 0)};
  for (const auto& part : partial) {
    for (std::size_t j = 0; j < k; ++j) {
      sums.true_positive[j] += part.true_positive[j];
      sums.false_positive[j] += part.false_positive[j];
      sums.false_negative[j] += part.false_negative[j];
    }
  }
  return sums;
}

void linear_forward(std::span<const double> features, int dims, std::span<const double> weights,
                    std::span<const double> bias, std::span<double> scores) {
  const std::size_t d = as_size(dims);
  const std::size_t k = bias.size();
  const auto n = static_cast<std::ptrdiff_t>(features.size() / d);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    for (std::size_t c = 0; c < k; ++c) {
      double acc = bias[c];
      for (std::size_t f = 0; f < d; ++f) acc += weights[c * d + f] * features[u * d + f];
      scores[u * k + c] = acc;
    }
  }
}

void linear_backward(std::span<const double> features, int dims, std::span<const double> grad,
                     int classes, std::span<double> grad_weights, std::span<double> grad_bias) {
  const std::size_t d = as_size(dims);
  const std::size_t k = as_size(classes);
  const std::size_t n = features.size() / d;
  const std::size_t chunks = chunk_count(n);
  const std::size_t stride = k * d + k;
  std::vector<double> partial(chunks * stride, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t end = std::min(n, begin + kReductionChunk);
    std::span<double> slot(partial.data() + static_cast<std::size_t>(c) * stride, stride);
    serial::linear_backward(features.subspan(begin * d, (end - begin) * d), dims,
                            grad.subspan(begin * k, (end - begin) * k), classes,
                            slot.subspan(0, k * d), slot.subspan(k * d, k));
  }
  std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    const double* slot = partial.data() + c * stride;
    for (std::size_t j = 0; j < k * d; ++j) grad_weights[j] += slot[j];
    for (std::size_t j = 0; j < k; ++j) grad_bias[j] += slot[k * d + j];
  }
}

}  // namespace segloss::kernels
