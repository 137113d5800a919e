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
// Serial reference vs OpenMP kernels on corpus-sized inputs.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "segloss/kernels.hpp"

namespace {

namespace k = segloss::kernels;
constexpr int kClasses = 21;

struct Data {
  std::vector<double> scores, pred, gt;
  std::vector<int> pred_labels, gt_labels;
};

const Data& data_for(std::size_t pixels) {
  static std::size_t cached_pixels = 0;
  static Data d;
  if (cached_pixels == pixels) return d;
  std::mt19937_64 rng(0);
  std::normal_distribution<double> gauss(0.0, 2.0);
  std::uniform_int_distribution<int> label(0, kClasses - 1);
  const std::size_t n = pixels * kClasses;
  d.scores.resize(n);
  for (double& v : d.scores) v = gauss(rng);
  d.pred.resize(n);
  k::softmax_rows(d.scores, kClasses, 1e-7, d.pred);
  d.gt.assign(n, 0.0);
  d.pred_labels.resize(pixels);
  d.gt_labels.resize(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    d.gt_labels[i] = label(rng);
    d.pred_labels[i] = label(rng);
    d.gt[i * kClasses + static_cast<std::size_t>(d.gt_labels[i])] = 1.0;
  }
  cached_pixels = pixels;
  return d;
}

template <bool kParallel>
void BM_Softmax(benchmark::State& state) {
  const Data& d = data_for(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(d.scores.size());
  for (auto _ : state) {
    if constexpr (kParallel) {
      k::softmax_rows(d.scores, kClasses, 1e-7, out);
    } else {
      k::serial::softmax_rows(d.scores, kClasses, 1e-7, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool kParallel>
void BM_OverlapSums(benchmark::State& state) {
  const Data& d = data_for(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto s = kParallel ? k::overlap_sums(d.pred, d.gt, kClasses)
                       : k::serial::overlap_sums(d.pred, d.gt, kClasses);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool kParallel>
void BM_ChainGradient(benchmark::State& state) {
  const Data& d = data_for(static_cast<std::size_t>(state.range(0)));
  const std::vector<double> slope(kClasses, 0.5), offset(kClasses, -0.25);
  std::vector<double> out(d.pred.size());
  for (auto _ : state) {
    if constexpr (kParallel) {
      k::softmax_chain_gradient(d.pred, d.gt, slope, offset, out);
    } else {
      k::serial::softmax_chain_gradient(d.pred, d.gt, slope, offset, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool kParallel>
void BM_ConfusionSums(benchmark::State& state) {
  const Data& d = data_for(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto s = kParallel ? k::confusion_sums(d.pred_labels, d.gt_labels, kClasses)
                       : k::serial::confusion_sums(d.pred_labels, d.gt_labels, kClasses);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

#define SEGLOSS_BENCH_PAIR(fn)                                         \
  BENCHMARK_TEMPLATE(fn, false)->Name(#fn "/serial")->Arg(1 << 14)->Arg(1 << 18); \
  BENCHMARK_TEMPLATE(fn, true)->Name(#fn "/parallel")->Arg(1 << 14)->Arg(1 << 18)

SEGLOSS_BENCH_PAIR(BM_Softmax);
SEGLOSS_BENCH_PAIR(BM_OverlapSums);
SEGLOSS_BENCH_PAIR(BM_ChainGradient);
SEGLOSS_BENCH_PAIR(BM_ConfusionSums);

}  // namespace

BENCHMARK_MAIN();
