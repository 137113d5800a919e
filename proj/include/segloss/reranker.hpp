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
#ifndef SEGLOSS_RERANKER_HPP_
#define SEGLOSS_RERANKER_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "segloss/grid.hpp"

namespace segloss {

inline constexpr double kDefaultBackgroundPenalty = 0.02;

// Candidate segmentations of one image: coarse soft versions (always) and
// the full-resolution label maps they came from (optional).
struct ProposalSet {
  std::string image_id;
  std::vector<SoftSegmentation> coarse;
  std::vector<HardSegmentation> full;

  std::size_t size() const { return coarse.size(); }
  bool has_full() const { return !full.empty(); }
  void validate() const;
};

// sum_i [KL(pred_i || q_i) + KL(q_i || pred_i) + lambda_bg * q_i0], natural
// log, both arguments clamped to kProbabilityFloor. Lower is better.
double kl_score(const SoftSegmentation& pred, const SoftSegmentation& proposal,
                double lambda_bg = kDefaultBackgroundPenalty);

// argmin of kl_score over the set, lowest index on ties.
std::size_t select_by_score(const SoftSegmentation& pred, const ProposalSet& set,
                            double lambda_bg = kDefaultBackgroundPenalty);

// Features of a (prediction, proposal) pair. Flattened layout:
//   [kl_forward, kl_backward, EI[0..K), EU[0..K), EI/EU[0..K), EU/EI[0..K), extra...]
// `extra` is an opaque slot for externally computed feature blocks.
struct FeatureVector {
  double kl_forward = 0.0;
  double kl_backward = 0.0;
  std::vector<double> intersection;
  std::vector<double> union_;
  std::vector<double> ratio_iu;
  std::vector<double> ratio_ui;
  std::vector<double> extra;

  static std::size_t overlap_length(int classes) { return 2 + 4 * static_cast<std::size_t>(classes); }
  std::size_t length() const { return 2 + 4 * intersection.size() + extra.size(); }
  std::vector<double> flatten() const;
};

FeatureVector proposal_features(const SoftSegmentation& pred, const SoftSegmentation& proposal);

// Linear scorer over standardized features: score = w . ((phi - mean) / scale).
struct RankModel {
  std::vector<double> weights;
  std::vector<double> mean;
  std::vector<double> scale;
  double lambda = 0.0;
  int trained_epochs = 0;

  std::size_t dim() const { return weights.size(); }
  double score(std::span<const double> features) const;

  // Identity standardization around the given raw weights.
  static RankModel from_weights(std::vector<double> weights);
};

struct RankerOptions {
  double lambda = 1e-3;
  int epochs = 50;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
};

// Per-image training data: one flattened feature vector and one quality per proposal.
struct RankingExample {
  std::vector<std::vector<double>> features;
  std::vector<double> quality;
};

RankingExample make_ranking_example(const SoftSegmentation& pred, const ProposalSet& set,
                                    std::vector<double> quality);

// Pairwise hinge ranker: for each image, pairs (best, other) with strictly
// lower quality; loss max(0, 1 - w.(phi_best - phi_other)) + lambda/2 |w|^2,
// minimized by shuffled subgradient descent with step lr / sqrt(t).
// Throws kTrainingDegenerate when no pair has distinct qualities.
RankModel train_ranker(std::span<const RankingExample> examples, const RankerOptions& options);

// argmax of the model score over the set, lowest index on ties.
std::size_t rank_select(const RankModel& model, const SoftSegmentation& pred,
                        const ProposalSet& set);

std::size_t random_select(const ProposalSet& set, std::mt19937_64& rng);

// Mean IOU of one label map against the truth over classes present in either.
double image_mean_iou(const HardSegmentation& proposal, const HardSegmentation& gt);

struct OracleChoice {
  std::size_t index = 0;
  double quality = 0.0;
};

OracleChoice oracle_select(const ProposalSet& set, const HardSegmentation& gt);

// RANKMODEL <dim> <lambda> <epochs>, then <dim> weight lines, then <dim>
// lines of "<mean> <scale>".
void write_rank_model(std::ostream& out, const RankModel& model);
RankModel read_rank_model(std::istream& in);
void save_rank_model(const std::filesystem::path& path, const RankModel& model);
RankModel load_rank_model(const std::filesystem::path& path);

// A proposal directory holds manifest.txt with one line per member in index
// order: "<coarse.soft> [<full.hard>]", paths relative to the directory.
void save_proposal_set(const std::filesystem::path& dir, const ProposalSet& set);
ProposalSet load_proposal_set(const std::filesystem::path& dir);

}  // namespace segloss

#endif  // SEGLOSS_RERANKER_HPP_
