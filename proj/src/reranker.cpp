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
#include "segloss/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "segloss/error.hpp"
#include "segloss/grid_io.hpp"
#include "segloss/hard_metrics.hpp"
#include "segloss/soft_losses.hpp"

namespace segloss {
namespace {

std::pair<double, double> symmetric_kl_parts(const SoftSegmentation& p, const SoftSegmentation& q) {
  double forward = 0.0;
  double backward = 0.0;
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const auto a = p.row(i);
    const auto b = q.row(i);
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double log_ratio = std::log(a[k]) - std::log(b[k]);
      forward += a[k] * log_ratio;
      backward -= b[k] * log_ratio;
    }
  }
  return {forward, backward};
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorKind::kParse, what); }

}  // namespace

void ProposalSet::validate() const {
  require(!coarse.empty(), "proposal set is empty");
  for (const auto& q : coarse) {
    require(q.shape() == coarse.front().shape(), "proposal coarse shapes differ");
  }
  if (has_full()) {
    require(full.size() == coarse.size(), "full-resolution list length differs from coarse list");
    for (const auto& f : full) {
      require(f.shape() == full.front().shape(), "proposal full-resolution shapes differ");
      require(f.classes() == coarse.front().classes(), "proposal class counts differ");
    }
  }
}

double kl_score(const SoftSegmentation& pred, const SoftSegmentation& proposal, double lambda_bg) {
  require(pred.shape() == proposal.shape(), "prediction and proposal shapes differ");
  const SoftSegmentation p = pred.clamped();
  const SoftSegmentation q = proposal.clamped();
  const auto [forward, backward] = symmetric_kl_parts(p, q);
  double background = 0.0;
  for (std::size_t i = 0; i < q.pixels(); ++i) background += q.at(i, 0);
  return forward + backward + lambda_bg * background;
}

std::size_t select_by_score(const SoftSegmentation& pred, const ProposalSet& set,
                            double lambda_bg) {
  set.validate();
  std::size_t best = 0;
  double best_score = kl_score(pred, set.coarse[0], lambda_bg);
  for (std::size_t m = 1; m < set.size(); ++m) {
    const double s = kl_score(pred, set.coarse[m], lambda_bg);
    if (s < best_score) {
      best_score = s;
      best = m;
    }
  }
  return best;
}

std::vector<double> FeatureVector::flatten() const {
  std::vector<double> out;
  out.reserve(length());
  out.push_back(kl_forward);
  out.push_back(kl_backward);
  for (const auto* block : {&intersection, &union_, &ratio_iu, &ratio_ui, &extra}) {
    out.insert(out.end(), block->begin(), block->end());
  }
  return out;
}

FeatureVector proposal_features(const SoftSegmentation& pred, const SoftSegmentation& proposal) {
  require(pred.shape() == proposal.shape(), "prediction and proposal shapes differ");
  const SoftSegmentation p = pred.clamped();
  const SoftSegmentation q = proposal.clamped();
  FeatureVector f;
  std::tie(f.kl_forward, f.kl_backward) = symmetric_kl_parts(p, q);
  // The proposal sits in the ground-truth slot, which is never clamped.
  const ExpectedOverlap o = expected_overlap(p, proposal);
  const double floor = kProbabilityFloor * o.pixels;
  f.intersection = o.intersection;
  f.union_ = o.union_;
  for (std::size_t k = 0; k < o.intersection.size(); ++k) {
    f.ratio_iu.push_back(o.intersection[k] / o.union_[k]);
    f.ratio_ui.push_back(o.union_[k] / std::max(o.intersection[k], floor));
  }
  return f;
}

double RankModel::score(std::span<const double> features) const {
  require(features.size() == weights.size(), "feature length does not match the rank model");
  double s = 0.0;
  for (std::size_t d = 0; d < weights.size(); ++d) {
    s += weights[d] * (features[d] - mean[d]) / scale[d];
  }
  return s;
}

RankModel RankModel::from_weights(std::vector<double> weights) {
  RankModel model;
  model.mean.assign(weights.size(), 0.0);
  model.scale.assign(weights.size(), 1.0);
  model.weights = std::move(weights);
  return model;
}

RankingExample make_ranking_example(const SoftSegmentation& pred, const ProposalSet& set,
                                    std::vector<double> quality) {
  set.validate();
  require(quality.size() == set.size(), "one quality value per proposal is required");
  RankingExample ex;
  for (const auto& q : set.coarse) ex.features.push_back(proposal_features(pred, q).flatten());
  ex.quality = std::move(quality);
  return ex;
}

RankModel train_ranker(std::span<const RankingExample> examples, const RankerOptions& options) {
  require(!examples.empty(), "no training examples");
  require(options.epochs >= 1, "epochs must be positive");
  require(options.learning_rate > 0.0, "learning rate must be positive");
  require(options.lambda >= 0.0, "regularization must be nonnegative");
  const std::size_t dim = examples.front().features.at(0).size();

  // Standardize on all training proposals.
  std::vector<double> mean(dim, 0.0);
  std::vector<double> scale(dim, 0.0);
  double count = 0.0;
  for (const auto& ex : examples) {
    require(ex.features.size() == ex.quality.size(), "feature/quality count mismatch");
    for (const auto& phi : ex.features) {
      require(phi.size() == dim, "inconsistent feature length across proposals");
      for (std::size_t d = 0; d < dim; ++d) mean[d] += phi[d];
      count += 1.0;
    }
  }
  for (double& m : mean) m /= count;
  for (const auto& ex : examples) {
    for (const auto& phi : ex.features) {
      for (std::size_t d = 0; d < dim; ++d) scale[d] += (phi[d] - mean[d]) * (phi[d] - mean[d]);
    }
  }
  for (double& s : scale) {
    s = std::sqrt(s / count);
    if (!(s > 1e-12)) s = 1.0;
  }

  // Pair differences phi(best) - phi(other), standardized.
  std::vector<std::vector<double>> diffs;
  for (const auto& ex : examples) {
    if (ex.quality.empty()) continue;
    const auto best = static_cast<std::size_t>(
        std::max_element(ex.quality.begin(), ex.quality.end()) - ex.quality.begin());
    for (std::size_t m = 0; m < ex.quality.size(); ++m) {
      if (!(ex.quality[m] < ex.quality[best])) continue;
      std::vector<double> d(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        d[j] = (ex.features[best][j] - ex.features[m][j]) / scale[j];
      }
      diffs.push_back(std::move(d));
    }
  }
  if (diffs.empty()) {
    throw Error(ErrorKind::kTrainingDegenerate,
                "no training pair with distinct qualities; cannot train a ranker");
  }

  std::vector<double> w(dim, 0.0);
  std::vector<std::size_t> order(diffs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(options.seed);
  std::size_t t = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      ++t;
      const std::vector<double>& d = diffs[idx];
      const double eta = options.learning_rate / std::sqrt(static_cast<double>(t));
      double margin = 0.0;
      for (std::size_t j = 0; j < dim; ++j) margin += w[j] * d[j];
      const bool violated = margin < 1.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double grad = options.lambda * w[j] - (violated ? d[j] : 0.0);
        w[j] -= eta * grad;
      }
    }
  }

  RankModel model;
  model.weights = std::move(w);
  model.mean = std::move(mean);
  model.scale = std::move(scale);
  model.lambda = options.lambda;
  model.trained_epochs = options.epochs;
  return model;
}

std::size_t rank_select(const RankModel& model, const SoftSegmentation& pred,
                        const ProposalSet& set) {
  set.validate();
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t m = 0; m < set.size(); ++m) {
    const double s = model.score(proposal_features(pred, set.coarse[m]).flatten());
    if (m == 0 || s > best_score) {
      best_score = s;
      best = m;
    }
  }
  return best;
}

std::size_t random_select(const ProposalSet& set, std::mt19937_64& rng) {
  set.validate();
  std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
  return pick(rng);
}

double image_mean_iou(const HardSegmentation& proposal, const HardSegmentation& gt) {
  const ConfusionCounts counts = confusion_counts(std::span(&proposal, 1), std::span(&gt, 1));
  return mean_iou(counts);
}

OracleChoice oracle_select(const ProposalSet& set, const HardSegmentation& gt) {
  set.validate();
  require(set.has_full(), "oracle selection needs full-resolution proposals");
  OracleChoice best{0, image_mean_iou(set.full[0], gt)};
  for (std::size_t m = 1; m < set.size(); ++m) {
    const double q = image_mean_iou(set.full[m], gt);
    if (q > best.quality) best = {m, q};
  }
  return best;
}

void write_rank_model(std::ostream& out, const RankModel& model) {
  out << "RANKMODEL " << model.dim() << ' ' << fmt17(model.lambda) << ' ' << model.trained_epochs
      << '\n';
  for (double w : model.weights) out << fmt17(w) << '\n';
  for (std::size_t d = 0; d < model.dim(); ++d) {
    out << fmt17(model.mean[d]) << ' ' << fmt17(model.scale[d]) << '\n';
  }
}

RankModel read_rank_model(std::istream& in) {
  std::string tag;
  std::size_t dim = 0;
  RankModel model;
  if (!(in >> tag) || tag != "RANKMODEL") parse_error("expected RANKMODEL header");
  if (!(in >> dim >> model.lambda >> model.trained_epochs) || dim == 0) {
    parse_error("invalid RANKMODEL header");
  }
  model.weights.resize(dim);
  model.mean.resize(dim);
  model.scale.resize(dim);
  for (double& w : model.weights) {
    if (!(in >> w)) parse_error("truncated rank model weights");
  }
  for (std::size_t d = 0; d < dim; ++d) {
    if (!(in >> model.mean[d] >> model.scale[d])) parse_error("truncated standardization block");
    if (!(model.scale[d] > 0.0)) parse_error("nonpositive standardization scale");
  }
  return model;
}

void save_rank_model(const std::filesystem::path& path, const RankModel& model) {
  std::ofstream out(path);
  if (!out) throw_invalid("cannot open " + path.string() + " for writing");
  write_rank_model(out, model);
}

RankModel load_rank_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) parse_error("cannot open " + path.string());
  return read_rank_model(in);
}

void save_proposal_set(const std::filesystem::path& dir, const ProposalSet& set) {
  set.validate();
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw_invalid("cannot write manifest in " + dir.string());
  for (std::size_t m = 0; m < set.size(); ++m) {
    char coarse_name[32];
    std::snprintf(coarse_name, sizeof(coarse_name), "q_%03zu.soft", m);
    save_soft(dir / coarse_name, set.coarse[m]);
    manifest << coarse_name;
    if (set.has_full()) {
      char full_name[32];
      std::snprintf(full_name, sizeof(full_name), "full_%03zu.hard", m);
      save_hard(dir / full_name, set.full[m]);
      manifest << ' ' << full_name;
    }
    manifest << '\n';
  }
}

ProposalSet load_proposal_set(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) parse_error("missing manifest.txt in " + dir.string());
  ProposalSet set;
  set.image_id = dir.filename().string();
  std::string line;
  std::size_t with_full = 0;
  while (std::getline(manifest, line)) {
    std::istringstream fields(line);
    std::string coarse_name;
    std::string full_name;
    if (!(fields >> coarse_name)) continue;
    set.coarse.push_back(load_soft(dir / coarse_name));
    if (fields >> full_name) {
      set.full.push_back(load_hard(dir / full_name));
      ++with_full;
    }
  }
  if (with_full != 0 && with_full != set.coarse.size()) {
    parse_error("manifest in " + dir.string() + " lists full-resolution files for some members only");
  }
  try {
    set.validate();
  } catch (const Error& e) {
    parse_error(dir.string() + ": " + e.what());
  }
  return set;
}

}  // namespace segloss
