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
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "segloss/error.hpp"
#include "segloss/hard_metrics.hpp"
#include "segloss/trainer.hpp"
#include "test_util.hpp"

namespace segloss {
namespace {

SyntheticOptions tiny_options() {
  SyntheticOptions o;
  o.image_count = 4;
  o.height = 8;
  o.width = 8;
  o.classes = 3;
  o.dims = 4;
  o.background_fraction = 0.6;
  return o;
}

TEST(Synthetic, SameSeedSameData) {
  const SyntheticDataset a = gen_synthetic(tiny_options());
  const SyntheticDataset b = gen_synthetic(tiny_options());
  ASSERT_EQ(a.images.size(), b.images.size());
  for (std::size_t n = 0; n < a.images.size(); ++n) {
    EXPECT_EQ(a.images[n].gt, b.images[n].gt);
    EXPECT_EQ(a.images[n].features, b.images[n].features);
  }
}

TEST(Synthetic, DefaultBackgroundFraction) {
  const SyntheticDataset d = gen_synthetic(SyntheticOptions{});
  EXPECT_EQ(d.images.size(), 50u);
  EXPECT_GE(d.background_fraction(), 0.85);
  EXPECT_LE(d.background_fraction(), 0.95);
}

TEST(Synthetic, InfeasibleBackgroundFraction) {
  SyntheticOptions o = tiny_options();
  o.background_fraction = 1.0;
  EXPECT_THROW(gen_synthetic(o), Error);
}

TEST(Proposals, NoPerturbationReproducesTruth) {
  std::mt19937_64 rng(1);
  const HardSegmentation gt = testing::random_labels(8, 8, 3, rng);
  ProposalOptions o;
  o.flip_rate = 0.0;
  o.shift_max = 0;
  o.coarse_height = 4;
  o.coarse_width = 4;
  const ProposalSet set = gen_proposals(gt, o);
  for (const auto& f : set.full) EXPECT_EQ(f, gt);
  EXPECT_EQ(oracle_select(set, gt).quality, 1.0);
}

TEST(Proposals, IncludeGtUnderHeavyPerturbation) {
  std::mt19937_64 rng(2);
  const HardSegmentation gt = testing::random_labels(16, 16, 4, rng);
  ProposalOptions o;
  o.include_gt = true;
  o.flip_rate = 0.8;
  o.shift_max = 4;
  const ProposalSet set = gen_proposals(gt, o);
  EXPECT_EQ(set.full[oracle_select(set, gt).index], gt);
}

TEST(Train, FreeScoreCrossEntropyReachesOneHot) {
  const SyntheticDataset d = gen_synthetic(tiny_options());
  TrainConfig c;
  c.loss = LossKind::kCrossEntropy;
  c.model = ModelKind::kFreeScores;
  c.learning_rate = 1.0;
  c.iterations = 500;
  const TrainResult r = train(d, c);
  ASSERT_FALSE(r.diverged) << r.diagnostic;
  EXPECT_GE(r.history.back().mean_iou, 0.99);
}

TEST(Train, FreeScoreCrossEntropyIsMonotone) {
  const SyntheticDataset d = gen_synthetic(tiny_options());
  TrainConfig c;
  c.loss = LossKind::kCrossEntropy;
  c.model = ModelKind::kFreeScores;
  c.learning_rate = 0.5;
  c.iterations = 100;
  c.log_every = 1;
  const TrainResult r = train(d, c);
  for (std::size_t j = 1; j < r.history.size(); ++j) {
    EXPECT_TRUE(std::isfinite(r.history[j].loss));
    EXPECT_LE(r.history[j].loss, r.history[j - 1].loss);
  }
}

TEST(Train, DeterministicHistories) {
  const SyntheticDataset d = gen_synthetic(tiny_options());
  TrainConfig c;
  c.iterations = 30;
  c.seed = 4;
  const TrainResult a = train(d, c);
  const TrainResult b = train(d, c);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t j = 0; j < a.history.size(); ++j) {
    EXPECT_EQ(a.history[j].loss, b.history[j].loss);
    EXPECT_EQ(a.history[j].mean_iou, b.history[j].mean_iou);
  }
}

TEST(Train, DivergenceIsReported) {
  const SyntheticDataset d = gen_synthetic(tiny_options());
  TrainConfig c;
  c.loss = LossKind::kCrossEntropy;
  c.iterations = 20;
  // Parameters this large overflow the linear scores on the first pass.
  c.warm_start = std::vector<double>(parameter_count(d, ModelKind::kLinear), 1.5e308);
  const TrainResult r = train(d, c);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.diagnostic.empty());
}

TEST(Train, RejectsBadConfig) {
  const SyntheticDataset d = gen_synthetic(tiny_options());
  TrainConfig c;
  c.iterations = 0;
  EXPECT_THROW(train(d, c), Error);
  c.iterations = 5;
  c.warm_start = std::vector<double>(3, 0.0);
  EXPECT_THROW(train(d, c), Error);
}

// The logged background fraction and mean IOU match the hard-metric path.
TEST(Train, QualityMatchesHardMetrics) {
  const SyntheticDataset d = gen_synthetic(tiny_options());
  const std::vector<double> params = initial_parameters(d, ModelKind::kLinear, 3);
  const CorpusQuality q = evaluate_corpus(d, ModelKind::kLinear, params);
  const HardSegmentation pred = argmax(softmax(corpus_scores(d, ModelKind::kLinear, params)));
  const HardSegmentation gt = corpus_labels(d);
  const ConfusionCounts c = confusion_counts(std::span(&pred, 1), std::span(&gt, 1));
  EXPECT_DOUBLE_EQ(q.mean_iou, mean_iou(c));
  const double bg = (c.true_positive[0] + c.false_positive[0]) / c.predicted_total();
  EXPECT_DOUBLE_EQ(q.background_fraction, bg);
}

TEST(WarmStart, BranchesShareStart) {
  const SyntheticDataset d = gen_synthetic(tiny_options());
  WarmStartOptions o;
  o.pretrain_iterations = 20;
  o.branch_iterations = 10;
  const std::vector<double> ckpt = pretrain_checkpoint(d, o);
  const WarmStartReport r = warm_start_protocol(d, ckpt, o);
  ASSERT_EQ(r.branches.size(), 3u);
  for (const auto& b : r.branches) EXPECT_EQ(b.start_params, ckpt);
  EXPECT_THROW(warm_start_protocol(d, {}, o), Error);
}

TEST(Params, RoundTripAndMissingFile) {
  const std::vector<double> p = {1.0, -2.5e-300, 3.14159265358979};
  std::stringstream buf;
  write_params(buf, p);
  EXPECT_EQ(read_params(buf), p);
  try {
    load_params("/nonexistent/segloss.params");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
  std::stringstream bad("PARAMS 3\n1\n2\n");
  EXPECT_THROW(read_params(bad), Error);
}

TEST(History, CsvHeader) {
  std::stringstream out;
  write_history_csv(out, {{0, 1.5, 0.25, 0.9}});
  EXPECT_EQ(out.str(), "iteration,loss,meanIOU,bgFraction\n0,1.5,0.25,0.9\n");
}

TEST(RerankCorpus, EmbeddedPredictionAndRoundTrip) {
  RerankCorpusOptions o;
  o.image_count = 3;
  o.height = 16;
  o.width = 16;
  o.embed_prediction = true;
  const RerankCorpus c = gen_rerank_corpus(o);
  for (std::size_t n = 0; n < c.sets.size(); ++n) {
    ASSERT_TRUE(c.embedded[n].has_value());
    EXPECT_EQ(select_by_score(c.preds[n], c.sets[n], 0.0), *c.embedded[n]);
  }
  testing::TempDir dir("corpus");
  save_rerank_corpus(dir.path(), c);
  const RerankCorpus back =
      load_rerank_corpus(dir.path() / "pred", dir.path() / "proposals", dir.path() / "gt");
  EXPECT_EQ(back.ids, c.ids);
  for (std::size_t n = 0; n < c.sets.size(); ++n) {
    EXPECT_EQ(back.gts[n], c.gts[n]);
    EXPECT_EQ(back.sets[n].full, c.sets[n].full);
  }
}

}  // namespace
}  // namespace segloss
