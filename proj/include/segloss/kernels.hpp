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
#ifndef SEGLOSS_KERNELS_HPP_
#define SEGLOSS_KERNELS_HPP_

// Data-parallel inner loops. Each kernel has an OpenMP version (top-level
// namespace) and a plain row-major reference in kernels::serial that the
// tests and the benchmark compare against.
//
// Reductions split the pixel range into fixed chunks of kReductionChunk
// pixels, reduce each chunk in row-major order, then add the chunk partials
// in chunk order. Results therefore do not depend on the thread count, and
// for inputs of at most one chunk they are bitwise equal to the serial path.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace segloss::kernels {

inline constexpr std::size_t kReductionChunk = 4096;

struct OverlapSums {
  std::vector<double> intersection;  // sum_i pred[i,k] * gt[i,k]
  std::vector<double> union_;        // sum_i pred + gt - pred * gt
  std::vector<double> gt_mass;       // sum_i gt[i,k]
};

struct ConfusionSums {
  std::vector<std::int64_t> true_positive;
  std::vector<std::int64_t> false_positive;
  std::vector<std::int64_t> false_negative;
};

namespace serial {

void softmax_rows(std::span<const double> scores, int classes, double floor,
                  std::span<double> out);

OverlapSums overlap_sums(std::span<const double> pred, std::span<const double> gt, int classes);

// -sum_i sum_k gt[i,k] * log(pred[i,k]).
double cross_entropy_sum(std::span<const double> pred, std::span<const double> gt, int classes);

// Chain rule through the softmax for objectives of the form
// sum_k' f_k'(EI[k'], EU[k']): per pixel, a[k'] = gt[i,k'] * slope[k'] + offset[k'],
// v[k'] = a[k'] * pred[i,k'], out[i,k] = v[k] - pred[i,k] * sum_k' v[k'].
void softmax_chain_gradient(std::span<const double> pred, std::span<const double> gt,
                            std::span<const double> slope, std::span<const double> offset,
                            std::span<double> out);

// out[i,k] = scale * (pred[i,k] - gt[i,k]).
void cross_entropy_gradient(std::span<const double> pred, std::span<const double> gt,
                            double scale, std::span<double> out);

ConfusionSums confusion_sums(std::span<const int> pred, std::span<const int> gt, int classes);

// scores[i,k] = bias[k] + sum_d weights[k,d] * features[i,d].
void linear_forward(std::span<const double> features, int dims, std::span<const double> weights,
                    std::span<const double> bias, std::span<double> scores);

// grad_weights[k,d] = sum_i grad[i,k] * features[i,d]; grad_bias[k] = sum_i grad[i,k].
void linear_backward(std::span<const double> features, int dims, std::span<const double> grad,
                     int classes, std::span<double> grad_weights, std::span<double> grad_bias);

}  // namespace serial

void softmax_rows(std::span<const double> scores, int classes, double floor,
                  std::span<double> out);

OverlapSums overlap_sums(std::span<const double> pred, std::span<const double> gt, int classes);

double cross_entropy_sum(std::span<const double> pred, std::span<const double> gt, int classes);

void softmax_chain_gradient(std::span<const double> pred, std::span<const double> gt,
                            std::span<const double> slope, std::span<const double> offset,
                            std::span<double> out);

void cross_entropy_gradient(std::span<const double> pred, std::span<const double> gt,
                            double scale, std::span<double> out);

ConfusionSums confusion_sums(std::span<const int> pred, std::span<const int> gt, int classes);

void linear_forward(std::span<const double> features, int dims, std::span<const double> weights,
                    std::span<const double> bias, std::span<double> scores);

void linear_backward(std::span<const double> features, int dims, std::span<const double> grad,
                     int classes, std::span<double> grad_weights, std::span<double> grad_bias);

}  // namespace segloss::kernels

#endif  // SEGLOSS_KERNELS_HPP_
