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
#include <random>
#include <sstream>

#include "segloss/error.hpp"
#include "segloss/reranker.hpp"
#include "segloss/trainer.hpp"
#include "test_util.hpp"

namespace segloss {
namespace {

TEST(KlScore, Examples) {
  // No background mass: class 0 is zero everywhere (up to the clamp).
  const SoftSegmentation p(1, 2, 3, {0.0, 0.3, 0.7, 0.0, 0.6, 0.4});
  EXPECT_NEAR(kl_score(p, p, 0.02), 0.0, 1e-8);
  const SoftSegmentation half(1, 1, 2, {0.5, 0.5});
  EXPECT_NEAR(kl_score(half, half, 0.02), 0.01, 1e-12);
  const SoftSegmentation a(1, 1, 2, {0.75, 0.25});
  const SoftSegmentation b(1, 1, 2, {0.25, 0.75});
  EXPECT_NEAR(kl_score(a, b, 0.02), std::log(3.0) + 0.005, 1e-12);
  EXPECT_NEAR(kl_score(a, b, 0.02), 1.103612, 1e-6);
  EXPECT_THROW(kl_score(a, SoftSegmentation(1, 1, 3, {0.2, 0.3, 0.5})), Error);
}

TEST(KlScore, SymmetricWithoutPenalty) {
  std::mt19937_64 rng(1);
  const SoftSegmentation a = testing::random_soft(3, 3, 4, rng);
  const SoftSegmentation b = testing::random_soft(3, 3, 4, rng);
  EXPECT_NEAR(kl_score(a, b, 0.0), kl_score(b, a, 0.0), 1e-12);
  EXPECT_GE(kl_score(a, b, 0.0), 0.0);
}

TEST(SelectByScore, PicksIdenticalProposal) {
  std::mt19937_64 rng(2);
  const SoftSegmentation pred = testing::random_soft(4, 4, 3, rng);
  ProposalSet set;
  set.coarse = {testing::random_soft(4, 4, 3, rng), pred, testing::random_soft(4, 4, 3, rng)};
  EXPECT_EQ(select_by_score(pred, set, 0.0), 1u);
  ProposalSet one;
  one.coarse = {testing::random_soft(4, 4, 3, rng)};
  EXPECT_EQ(select_by_score(pred, one), 0u);
}

TEST(ProposalFeatures, MatchingOneHot) {
  const HardSegmentation h(1, 3, 3, {0, 2, 2});
  const FeatureVector f = proposal_features(one_hot(h).clamped(), one_hot(h));
  EXPECT_NEAR(f.kl_forward, 0.0, 1e-5);
  EXPECT_NEAR(f.kl_backward, 0.0, 1e-5);
  for (int k : {0, 2}) {
    EXPECT_NEAR(f.ratio_iu[static_cast<std::size_t>(k)], 1.0, 1e-5);
    EXPECT_NEAR(f.ratio_ui[static_cast<std::size_t>(k)], 1.0, 1e-5);
  }
}

TEST(ProposalFeatures, TwoPixelInstance) {
  const SoftSegmentation pred(1, 2, 2, {0.6, 0.4, 0.2, 0.8});
  const SoftSegmentation prop(1, 2, 2, {1.0, 0.0, 0.0, 1.0});
  const FeatureVector f = proposal_features(pred, prop);
  EXPECT_NEAR(f.intersection[0], 0.6, 1e-12);
  EXPECT_NEAR(f.intersection[1], 0.8, 1e-12);
  EXPECT_NEAR(f.union_[0], 1.2, 1e-12);
  EXPECT_NEAR(f.union_[1], 1.4, 1e-12);
  EXPECT_NEAR(f.ratio_iu[0], 0.5, 1e-12);
  EXPECT_NEAR(f.ratio_iu[1], 0.571429, 1e-6);
}

TEST(ProposalFeatures, LengthIsTwoPlusFourK) {
  std::mt19937_64 rng(3);
  for (int k : {2, 5, 21}) {
    const SoftSegmentation a = testing::random_soft(2, 2, k, rng);
    const FeatureVector f = proposal_features(a, a);
    EXPECT_EQ(f.length(), FeatureVector::overlap_length(k));
    EXPECT_EQ(f.flatten().size(), static_cast<std::size_t>(2 + 4 * k));
  }
  EXPECT_EQ(FeatureVector::overlap_length(21), 86u);
}

std::vector<RankingExample> separable_examples(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<RankingExample> out;
  for (int n = 0; n < 30; ++n) {
    RankingExample ex;
    for (int m = 0; m < 6; ++m) {
      std::vector<double> phi = {gauss(rng), gauss(rng), gauss(rng)};
      ex.quality.push_back(phi[1]);
      ex.features.push_back(std::move(phi));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::size_t best_by_model(const RankModel& m, const RankingExample& ex) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < ex.features.size(); ++j) {
    if (m.score(ex.features[j]) > m.score(ex.features[best])) best = j;
  }
  return best;
}

TEST(TrainRanker, SeparableToyRanksBestFirst) {
  const auto examples = separable_examples(4);
  RankerOptions o;
  o.lambda = 1e-4;
  o.epochs = 200;
  o.learning_rate = 0.5;
  const RankModel m = train_ranker(examples, o);
  for (const auto& ex : examples) {
    const auto best = static_cast<std::size_t>(
        std::max_element(ex.quality.begin(), ex.quality.end()) - ex.quality.begin());
    EXPECT_EQ(best_by_model(m, ex), best);
  }
}

TEST(TrainRanker, WeightsShrinkWithRegularization) {
  const auto examples = separable_examples(5);
  double previous = INFINITY;
  for (double lambda : {1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
    RankerOptions o;
    o.lambda = lambda;
    const RankModel m = train_ranker(examples, o);
    double norm = 0.0;
    for (double w : m.weights) norm += w * w;
    EXPECT_LT(norm, previous) << "lambda " << lambda;
    previous = norm;
  }
}

TEST(TrainRanker, Deterministic) {
  const auto examples = separable_examples(6);
  RankerOptions o;
  o.seed = 9;
  const RankModel a = train_ranker(examples, o);
  const RankModel b = train_ranker(examples, o);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.scale, b.scale);
}

TEST(TrainRanker, EqualQualitiesAreDegenerate) {
  RankingExample ex;
  ex.features = {{1.0, 2.0}, {3.0, 4.0}};
  ex.quality = {0.5, 0.5};
  try {
    train_ranker(std::span(&ex, 1), RankerOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTrainingDegenerate);
  }
}

TEST(RankSelect, SingleProposalAndRatioWeights) {
  std::mt19937_64 rng(7);
  const SoftSegmentation pred = testing::random_soft(4, 4, 3, rng);
  ProposalSet set;
  for (int m = 0; m < 5; ++m) set.coarse.push_back(one_hot(testing::random_labels(4, 4, 3, rng)));
  const int k = 3;
  std::vector<double> w(FeatureVector::overlap_length(k), 0.0);
  for (int c = 0; c < k; ++c) w[static_cast<std::size_t>(2 + 2 * k + c)] = 1.0;
  const RankModel model = RankModel::from_weights(w);
  std::size_t expected = 0;
  double best = -INFINITY;
  for (std::size_t m = 0; m < set.size(); ++m) {
    const FeatureVector f = proposal_features(pred, set.coarse[m]);
    double s = 0.0;
    for (double r : f.ratio_iu) s += r;
    if (s > best) {
      best = s;
      expected = m;
    }
  }
  EXPECT_EQ(rank_select(model, pred, set), expected);

  ProposalSet one;
  one.coarse = {set.coarse[2]};
  EXPECT_EQ(rank_select(model, pred, one), 0u);
  EXPECT_THROW(rank_select(RankModel::from_weights({1.0, 2.0}), pred, set), Error);
}

TEST(OracleSelect, PicksGroundTruth) {
  std::mt19937_64 rng(8);
  const HardSegmentation gt = testing::random_labels(8, 8, 4, rng);
  ProposalOptions po;
  po.include_gt = true;
  po.flip_rate = 0.5;
  po.seed = 3;
  po.coarse_height = 4;
  po.coarse_width = 4;
  const ProposalSet set = gen_proposals(gt, po);
  const OracleChoice c = oracle_select(set, gt);
  EXPECT_EQ(set.full[c.index], gt);
  EXPECT_EQ(c.quality, 1.0);

  // {gt, gt with 10% flipped}.
  std::vector<int> flipped(gt.labels().begin(), gt.labels().end());
  for (std::size_t i = 0; i < flipped.size(); i += 10) flipped[i] = (flipped[i] + 1) % 4;
  ProposalSet pair;
  pair.full = {gt, HardSegmentation(8, 8, 4, flipped)};
  pair.coarse = {downsample_to_soft(pair.full[0], 4, 4), downsample_to_soft(pair.full[1], 4, 4)};
  EXPECT_EQ(oracle_select(pair, gt).index, 0u);

  ProposalSet coarse_only;
  coarse_only.coarse = pair.coarse;
  EXPECT_THROW(oracle_select(coarse_only, gt), Error);
}

TEST(RankModelIo, RoundTrip) {
  RankModel m = RankModel::from_weights({0.5, -1.25, 3.0});
  m.mean = {0.1, 0.2, 0.3};
  m.scale = {1.0, 2.0, 0.5};
  m.lambda = 0.01;
  m.trained_epochs = 7;
  std::stringstream buf;
  write_rank_model(buf, m);
  const RankModel back = read_rank_model(buf);
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.mean, m.mean);
  EXPECT_EQ(back.scale, m.scale);
  EXPECT_EQ(back.lambda, m.lambda);
  EXPECT_EQ(back.trained_epochs, m.trained_epochs);
}

TEST(ProposalSetIo, RoundTrip) {
  testing::TempDir dir("props");
  std::mt19937_64 rng(9);
  const HardSegmentation gt = testing::random_labels(8, 8, 3, rng);
  ProposalOptions po;
  po.count = 4;
  po.coarse_height = 4;
  po.coarse_width = 4;
  ProposalSet set = gen_proposals(gt, po);
  set.image_id = "x";
  save_proposal_set(dir.path() / "x", set);
  const ProposalSet back = load_proposal_set(dir.path() / "x");
  ASSERT_EQ(back.size(), set.size());
  for (std::size_t m = 0; m < set.size(); ++m) {
    EXPECT_EQ(back.full[m], set.full[m]);
    EXPECT_TRUE(std::equal(back.coarse[m].values().begin(), back.coarse[m].values().end(),
                           set.coarse[m].values().begin()));
  }
}

}  // namespace
}  // namespace segloss
