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
#ifndef SEGLOSS_TRAINER_HPP_
#define SEGLOSS_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "segloss/grid.hpp"
#include "segloss/reranker.hpp"
#include "segloss/soft_losses.hpp"

namespace segloss {

struct SyntheticOptions {
  std::uint64_t seed = 0;
  int image_count = 50;
  int height = 32;
  int width = 32;
  int classes = 5;
  int dims = 8;
  double background_fraction = 0.9;
  double noise = 0.5;
};

struct SyntheticImage {
  std::vector<double> features;  // pixels x dims, row-major
  HardSegmentation gt;
};

struct SyntheticDataset {
  SyntheticOptions options;
  std::vector<SyntheticImage> images;

  int classes() const { return options.classes; }
  int dims() const { return options.dims; }
  std::size_t pixels() const;
  double background_fraction() const;
};

// Foreground rectangles on a background canvas; features are the one-hot
// class code in the first K of D dims plus N(0, noise^2) on every dim.
SyntheticDataset gen_synthetic(const SyntheticOptions& options);

struct ProposalOptions {
  int count = 10;
  std::uint64_t seed = 0;
  double flip_rate = 0.1;
  int shift_max = 2;
  bool include_gt = false;
  int block = 4;  // side of the square regions that get relabeled
  int coarse_height = 13;
  int coarse_width = 13;
};

// Degraded copies of `gt`: each is translated by up to shift_max pixels per
// axis (vacated pixels become background), then every block x block region
// is relabeled to a random class with probability flip_rate. With
// include_gt the unmodified truth replaces the member at a seeded position.
ProposalSet gen_proposals(const HardSegmentation& gt, const ProposalOptions& options);

struct PredictionOptions {
  std::uint64_t seed = 0;
  double confidence = 3.0;  // weight of the downsampled truth in the scores
  double noise = 1.0;       // std-dev of the additive score noise
  int coarse_height = 13;
  int coarse_width = 13;
};

// Stand-in for a coarse network output: softmax(confidence * downsample(gt) + noise).
SoftSegmentation gen_noisy_prediction(const HardSegmentation& gt, const PredictionOptions& options);

struct RerankCorpusOptions {
  std::uint64_t seed = 0;
  int image_count = 50;
  int height = 32;
  int width = 32;
  int classes = 5;
  double background_fraction = 0.7;
  int proposals = 10;
  double flip_rate = 0.15;
  int shift_max = 2;
  bool include_gt = false;
  // Replace the prediction by the coarse version of one seeded proposal.
  bool embed_prediction = false;
  double confidence = 3.0;
  double noise = 1.0;
  int coarse_height = 13;
  int coarse_width = 13;
};

// Ground truths, coarse predictions and proposal sets for re-ranking experiments.
struct RerankCorpus {
  std::vector<std::string> ids;
  std::vector<HardSegmentation> gts;
  std::vector<SoftSegmentation> preds;
  std::vector<ProposalSet> sets;
  std::vector<std::optional<std::size_t>> embedded;  // proposal copied into preds, if any
};

RerankCorpus gen_rerank_corpus(const RerankCorpusOptions& options);

// <root>/pred/<id>.soft, <root>/gt/<id>.hard, <root>/proposals/<id>/manifest.txt
void save_rerank_corpus(const std::filesystem::path& root, const RerankCorpus& corpus);
RerankCorpus load_rerank_corpus(const std::filesystem::path& pred_dir,
                                const std::filesystem::path& proposal_dir,
                                const std::filesystem::path& gt_dir);

enum class ModelKind { kFreeScores, kLinear };

std::string_view model_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

inline constexpr double kInitScale = 0.01;

struct TrainConfig {
  LossKind loss = LossKind::kUoi;
  double alpha = kDefaultCombinedWeight;
  ModelKind model = ModelKind::kLinear;
  double learning_rate = 0.1;
  int iterations = 300;
  std::uint64_t seed = 0;
  int log_every = 10;
  std::optional<std::vector<double>> warm_start;

  void validate() const;
};

struct HistoryEntry {
  int iteration = 0;
  double loss = 0.0;
  double mean_iou = 0.0;
  double background_fraction = 0.0;
};

struct TrainResult {
  std::vector<double> params;
  std::vector<HistoryEntry> history;
  bool diverged = false;
  std::string diagnostic;
};

std::size_t parameter_count(const SyntheticDataset& data, ModelKind model);

// Seeded N(0, 1) * kInitScale.
std::vector<double> initial_parameters(const SyntheticDataset& data, ModelKind model,
                                       std::uint64_t seed);

// Scores of every pixel of the corpus, images stacked vertically.
ScoreMap corpus_scores(const SyntheticDataset& data, ModelKind model,
                       const std::vector<double>& params);

SoftSegmentation corpus_truth(const SyntheticDataset& data);
HardSegmentation corpus_labels(const SyntheticDataset& data);

struct CorpusQuality {
  double mean_iou = 0.0;
  double background_fraction = 0.0;
};

// Hard metrics of argmax predictions over the whole corpus.
CorpusQuality evaluate_corpus(const SyntheticDataset& data, ModelKind model,
                              const std::vector<double>& params);

// Full-batch gradient descent; gains are ascended by negation.
TrainResult train(const SyntheticDataset& data, const TrainConfig& config);

struct WarmStartOptions {
  ModelKind model = ModelKind::kLinear;
  double learning_rate = 0.1;
  int pretrain_iterations = 300;
  int branch_iterations = 300;
  double alpha = kDefaultCombinedWeight;
  std::uint64_t seed = 0;
};

struct WarmStartBranch {
  std::string name;
  TrainConfig config;
  std::vector<double> start_params;
  TrainResult result;
  double final_mean_iou = 0.0;
};

struct WarmStartReport {
  double checkpoint_mean_iou = 0.0;
  std::vector<WarmStartBranch> branches;  // ce, uoi, combined
};

// Continues from `checkpoint` under CE, UOI and alpha*UOI + (1-alpha)*CE.
WarmStartReport warm_start_protocol(const SyntheticDataset& data,
                                    const std::vector<double>& checkpoint,
                                    const WarmStartOptions& options);

// Runs the CE pretraining that produces the shared checkpoint.
std::vector<double> pretrain_checkpoint(const SyntheticDataset& data,
                                        const WarmStartOptions& options);

// PARAMS n, then one value per line (17 significant digits).
void write_params(std::ostream& out, const std::vector<double>& params);
std::vector<double> read_params(std::istream& in);
void save_params(const std::filesystem::path& path, const std::vector<double>& params);
std::vector<double> load_params(const std::filesystem::path& path);

// iteration,loss,meanIOU,bgFraction
void write_history_csv(std::ostream& out, const std::vector<HistoryEntry>& history);

}  // namespace segloss

#endif  // SEGLOSS_TRAINER_HPP_
