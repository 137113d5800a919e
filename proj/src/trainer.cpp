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
#include "segloss/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

#include "segloss/error.hpp"
#include "segloss/grid_io.hpp"
#include "segloss/hard_metrics.hpp"
#include "segloss/kernels.hpp"

namespace segloss {
namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> corpus_features(const SyntheticDataset& data) {
  std::vector<double> out;
  out.reserve(data.pixels() * static_cast<std::size_t>(data.dims()));
  for (const auto& img : data.images) out.insert(out.end(), img.features.begin(), img.features.end());
  return out;
}

// Everything train() needs per iteration, built once.
struct Corpus {
  int height = 0;
  int width = 0;
  int classes = 0;
  int dims = 0;
  std::vector<double> features;
  SoftSegmentation truth;
  HardSegmentation labels;
};

Corpus make_corpus(const SyntheticDataset& data) {
  require(!data.images.empty(), "empty dataset");
  Corpus c;
  c.height = data.options.height * static_cast<int>(data.images.size());
  c.width = data.options.width;
  c.classes = data.classes();
  c.dims = data.dims();
  c.features = corpus_features(data);
  c.labels = corpus_labels(data);
  c.truth = one_hot(c.labels);
  return c;
}

ScoreMap scores_for(const Corpus& c, ModelKind model, const std::vector<double>& params) {
  const std::size_t k = static_cast<std::size_t>(c.classes);
  const std::size_t n = static_cast<std::size_t>(c.height) * static_cast<std::size_t>(c.width);
  if (model == ModelKind::kFreeScores) {
    require(params.size() == n * k, "parameter count does not match free-score model");
    return ScoreMap(c.height, c.width, c.classes, params);
  }
  const std::size_t d = static_cast<std::size_t>(c.dims);
  require(params.size() == k * d + k, "parameter count does not match linear model");
  std::vector<double> z(n * k);
  const std::span<const double> p(params);
  kernels::linear_forward(c.features, c.dims, p.subspan(0, k * d), p.subspan(k * d, k), z);
  return ScoreMap(c.height, c.width, c.classes, std::move(z));
}

CorpusQuality quality_of(const Corpus& c, const ScoreMap& scores) {
  std::vector<int> predicted(scores.pixels());
  for (std::size_t i = 0; i < predicted.size(); ++i) predicted[i] = argmax(scores.row(i));
  const HardSegmentation pred(c.height, c.width, c.classes, std::move(predicted));
  const ConfusionCounts counts = confusion_counts(std::span(&pred, 1), std::span(&c.labels, 1));
  const double predicted_bg = counts.true_positive[0] + counts.false_positive[0];
  return {mean_iou(counts), predicted_bg / counts.predicted_total()};
}

}  // namespace

std::size_t SyntheticDataset::pixels() const {
  return images.size() * static_cast<std::size_t>(options.height) *
         static_cast<std::size_t>(options.width);
}

double SyntheticDataset::background_fraction() const {
  double bg = 0.0;
  for (const auto& img : images) {
    for (int label : img.gt.labels()) bg += label == 0 ? 1.0 : 0.0;
  }
  return bg / static_cast<double>(pixels());
}

SyntheticDataset gen_synthetic(const SyntheticOptions& options) {
  require(options.classes >= 2, "need at least two classes");
  require(options.dims >= options.classes, "feature dimension must be at least the class count");
  require(options.image_count >= 1, "need at least one image");
  require(options.height > 0 && options.width > 0, "image dimensions must be positive");
  require(options.background_fraction >= 0.0 && options.background_fraction < 1.0,
          "background fraction must lie in [0, 1)");
  require(options.noise >= 0.0, "noise must be nonnegative");

  SyntheticDataset data;
  data.options = options;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int h = options.height;
  const int w = options.width;
  const auto n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  const auto target = static_cast<std::size_t>(
      std::llround((1.0 - options.background_fraction) * static_cast<double>(n)));
  const int max_side = std::max(2, std::min(h, w) / 4);
  std::uniform_int_distribution<int> side(2, max_side);
  int next_class = 0;

  for (int img = 0; img < options.image_count; ++img) {
    std::vector<int> labels(n, 0);
    std::size_t foreground = 0;
    for (int attempt = 0; foreground < target && attempt < 100000; ++attempt) {
      const auto deficit = static_cast<int>(target - foreground);
      int rw = std::min(side(rng), w);
      int rh = std::min(side(rng), h);
      if (rw * rh > deficit) {
        rw = std::min(rw, deficit);
        rh = std::max(1, deficit / rw);
      }
      const int top = std::uniform_int_distribution<int>(0, h - rh)(rng);
      const int left = std::uniform_int_distribution<int>(0, w - rw)(rng);
      const int cls = 1 + (next_class++ % (options.classes - 1));
      for (int r = top; r < top + rh; ++r) {
        for (int c = left; c < left + rw; ++c) {
          int& label = labels[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) +
                              static_cast<std::size_t>(c)];
          if (label == 0) ++foreground;
          label = cls;
        }
      }
    }
    const auto d = static_cast<std::size_t>(options.dims);
    std::vector<double> features(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < d; ++f) {
        const double code = static_cast<int>(f) == labels[i] ? 1.0 : 0.0;
        features[i * d + f] = code + options.noise * gauss(rng);
      }
    }
    data.images.push_back({std::move(features), HardSegmentation(h, w, options.classes, labels)});
  }
  return data;
}

ProposalSet gen_proposals(const HardSegmentation& gt, const ProposalOptions& options) {
  require(options.count >= 1, "need at least one proposal");
  require(options.flip_rate >= 0.0 && options.flip_rate <= 1.0, "flip rate must lie in [0, 1]");
  require(options.shift_max >= 0, "shift must be nonnegative");
  require(options.block >= 1, "relabel block size must be positive");
  std::mt19937_64 rng(options.seed);
  const int h = gt.height();
  const int w = gt.width();
  const int coarse_h = std::min(options.coarse_height, h);
  const int coarse_w = std::min(options.coarse_width, w);
  std::uniform_int_distribution<int> shift(-options.shift_max, options.shift_max);
  std::uniform_int_distribution<int> any_class(0, gt.classes() - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  ProposalSet set;
  for (int m = 0; m < options.count; ++m) {
    const int dy = shift(rng);
    const int dx = shift(rng);
    std::vector<int> labels(gt.pixels(), 0);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int sr = r - dy;
        const int sc = c - dx;
        if (sr >= 0 && sr < h && sc >= 0 && sc < w) {
          labels[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) +
                 static_cast<std::size_t>(c)] = gt.at(sr, sc);
        }
      }
    }
    for (int br = 0; br < h; br += options.block) {
      for (int bc = 0; bc < w; bc += options.block) {
        if (!(coin(rng) < options.flip_rate)) continue;
        const int cls = any_class(rng);
        for (int r = br; r < std::min(h, br + options.block); ++r) {
          for (int c = bc; c < std::min(w, bc + options.block); ++c) {
            labels[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) +
                   static_cast<std::size_t>(c)] = cls;
          }
        }
      }
    }
    set.full.emplace_back(h, w, gt.classes(), std::move(labels));
  }
  if (options.include_gt) {
    const auto slot = std::uniform_int_distribution<int>(0, options.count - 1)(rng);
    set.full[static_cast<std::size_t>(slot)] = gt;
  }
  for (const auto& f : set.full) set.coarse.push_back(downsample_to_soft(f, coarse_h, coarse_w));
  return set;
}

SoftSegmentation gen_noisy_prediction(const HardSegmentation& gt,
                                      const PredictionOptions& options) {
  require(options.noise >= 0.0, "noise must be nonnegative");
  const SoftSegmentation target =
      downsample_to_soft(gt, std::min(options.coarse_height, gt.height()),
                         std::min(options.coarse_width, gt.width()));
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> z(target.values().begin(), target.values().end());
  for (double& v : z) v = options.confidence * v + options.noise * gauss(rng);
  return softmax(ScoreMap(target.height(), target.width(), target.classes(), std::move(z)));
}

RerankCorpus gen_rerank_corpus(const RerankCorpusOptions& options) {
  SyntheticOptions so;
  so.seed = options.seed;
  so.image_count = options.image_count;
  so.height = options.height;
  so.width = options.width;
  so.classes = options.classes;
  so.dims = options.classes;
  so.background_fraction = options.background_fraction;
  so.noise = 0.0;
  const SyntheticDataset data = gen_synthetic(so);

  RerankCorpus corpus;
  std::mt19937_64 seeds(options.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t n = 0; n < data.images.size(); ++n) {
    char id[32];
    std::snprintf(id, sizeof(id), "img_%04zu", n);
    const HardSegmentation& gt = data.images[n].gt;

    ProposalOptions po;
    po.count = options.proposals;
    po.seed = seeds();
    po.flip_rate = options.flip_rate;
    po.shift_max = options.shift_max;
    po.include_gt = options.include_gt;
    po.coarse_height = options.coarse_height;
    po.coarse_width = options.coarse_width;
    ProposalSet set = gen_proposals(gt, po);
    set.image_id = id;

    PredictionOptions pred_opts;
    pred_opts.seed = seeds();
    pred_opts.confidence = options.confidence;
    pred_opts.noise = options.noise;
    pred_opts.coarse_height = options.coarse_height;
    pred_opts.coarse_width = options.coarse_width;
    SoftSegmentation pred = gen_noisy_prediction(gt, pred_opts);
    std::optional<std::size_t> embedded;
    if (options.embed_prediction) {
      const std::size_t slot = std::uniform_int_distribution<std::size_t>(0, set.size() - 1)(seeds);
      pred = set.coarse[slot];
      embedded = slot;
    }
    corpus.ids.emplace_back(id);
    corpus.gts.push_back(gt);
    corpus.preds.push_back(std::move(pred));
    corpus.sets.push_back(std::move(set));
    corpus.embedded.push_back(embedded);
  }
  return corpus;
}

void save_rerank_corpus(const std::filesystem::path& root, const RerankCorpus& corpus) {
  std::filesystem::create_directories(root / "pred");
  std::filesystem::create_directories(root / "gt");
  for (std::size_t n = 0; n < corpus.ids.size(); ++n) {
    save_soft(root / "pred" / (corpus.ids[n] + ".soft"), corpus.preds[n]);
    save_hard(root / "gt" / (corpus.ids[n] + ".hard"), corpus.gts[n]);
    save_proposal_set(root / "proposals" / corpus.ids[n], corpus.sets[n]);
  }
}

RerankCorpus load_rerank_corpus(const std::filesystem::path& pred_dir,
                                const std::filesystem::path& proposal_dir,
                                const std::filesystem::path& gt_dir) {
  if (!std::filesystem::is_directory(proposal_dir)) {
    throw Error(ErrorKind::kParse, "proposal directory not found: " + proposal_dir.string());
  }
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(proposal_dir)) {
    if (entry.is_directory()) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw Error(ErrorKind::kParse, "no proposal sets in " + proposal_dir.string());
  RerankCorpus corpus;
  for (const auto& id : ids) {
    corpus.ids.push_back(id);
    corpus.sets.push_back(load_proposal_set(proposal_dir / id));
    corpus.preds.push_back(load_soft(pred_dir / (id + ".soft")));
    corpus.gts.push_back(load_hard(gt_dir / (id + ".hard")));
    corpus.embedded.emplace_back(std::nullopt);
  }
  return corpus;
}

std::string_view model_name(ModelKind kind) {
  return kind == ModelKind::kFreeScores ? "free" : "linear";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "free") return ModelKind::kFreeScores;
  if (name == "linear") return ModelKind::kLinear;
  throw_invalid("unknown model '" + std::string(name) + "' (expected free or linear)");
}

void TrainConfig::validate() const {
  require(iterations >= 1, "iterations must be at least 1");
  require(alpha >= 0.0 && alpha <= 1.0, "combined-loss weight must lie in [0, 1]");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning rate must be positive");
  require(log_every >= 1, "log interval must be positive");
}

std::size_t parameter_count(const SyntheticDataset& data, ModelKind model) {
  const auto k = static_cast<std::size_t>(data.classes());
  if (model == ModelKind::kFreeScores) return data.pixels() * k;
  return k * static_cast<std::size_t>(data.dims()) + k;
}

std::vector<double> initial_parameters(const SyntheticDataset& data, ModelKind model,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> params(parameter_count(data, model));
  for (double& p : params) p = kInitScale * gauss(rng);
  return params;
}

SoftSegmentation corpus_truth(const SyntheticDataset& data) { return one_hot(corpus_labels(data)); }

HardSegmentation corpus_labels(const SyntheticDataset& data) {
  require(!data.images.empty(), "empty dataset");
  std::vector<int> labels;
  labels.reserve(data.pixels());
  for (const auto& img : data.images) {
    labels.insert(labels.end(), img.gt.labels().begin(), img.gt.labels().end());
  }
  return HardSegmentation(data.options.height * static_cast<int>(data.images.size()),
                          data.options.width, data.classes(), std::move(labels));
}

ScoreMap corpus_scores(const SyntheticDataset& data, ModelKind model,
                       const std::vector<double>& params) {
  return scores_for(make_corpus(data), model, params);
}

CorpusQuality evaluate_corpus(const SyntheticDataset& data, ModelKind model,
                              const std::vector<double>& params) {
  const Corpus c = make_corpus(data);
  return quality_of(c, scores_for(c, model, params));
}

TrainResult train(const SyntheticDataset& data, const TrainConfig& config) {
  config.validate();
  const Corpus corpus = make_corpus(data);
  TrainResult result;
  result.params = config.warm_start ? *config.warm_start
                                    : initial_parameters(data, config.model, config.seed);
  require(result.params.size() == parameter_count(data, config.model),
          "warm-start checkpoint has the wrong parameter count");

  const auto k = static_cast<std::size_t>(corpus.classes);
  const auto d = static_cast<std::size_t>(corpus.dims);
  // Gains are maximized: step along +gradient.
  const double direction = config.loss == LossKind::kIouGain ? 1.0 : -1.0;
  std::vector<double> grad_weights(k * d);
  std::vector<double> grad_bias(k);

  for (int it = 0; it <= config.iterations; ++it) {
    ScoreMap scores;
    LossAndGradient lg;
    try {
      // Overflowing parameters surface here as non-finite scores.
      scores = scores_for(corpus, config.model, result.params);
      lg = evaluate_loss(config.loss, scores, corpus.truth, config.alpha);
    } catch (const Error& e) {
      result.diverged = true;
      result.diagnostic = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    const bool last = it == config.iterations;
    if (it % config.log_every == 0 || last || !std::isfinite(lg.report.value)) {
      const CorpusQuality q = quality_of(corpus, scores);
      result.history.push_back({it, lg.report.value, q.mean_iou, q.background_fraction});
    }
    if (!std::isfinite(lg.report.value) || !all_finite(lg.gradient.values)) {
      result.diverged = true;
      result.diagnostic = "non-finite loss or gradient at iteration " + std::to_string(it);
      break;
    }
    if (last) break;

    const double step = direction * config.learning_rate;
    if (config.model == ModelKind::kFreeScores) {
      for (std::size_t j = 0; j < result.params.size(); ++j) {
        result.params[j] += step * lg.gradient.values[j];
      }
    } else {
      kernels::linear_backward(corpus.features, corpus.dims, lg.gradient.values, corpus.classes,
                               grad_weights, grad_bias);
      for (std::size_t j = 0; j < k * d; ++j) result.params[j] += step * grad_weights[j];
      for (std::size_t j = 0; j < k; ++j) result.params[k * d + j] += step * grad_bias[j];
    }
    if (!all_finite(result.params)) {
      result.diverged = true;
      result.diagnostic = "non-finite parameters after iteration " + std::to_string(it);
      break;
    }
  }
  return result;
}

std::vector<double> pretrain_checkpoint(const SyntheticDataset& data,
                                        const WarmStartOptions& options) {
  TrainConfig cfg;
  cfg.loss = LossKind::kCrossEntropy;
  cfg.model = options.model;
  cfg.learning_rate = options.learning_rate;
  cfg.iterations = options.pretrain_iterations;
  cfg.seed = options.seed;
  TrainResult r = train(data, cfg);
  require(!r.diverged, "cross-entropy pretraining diverged: " + r.diagnostic);
  return std::move(r.params);
}

WarmStartReport warm_start_protocol(const SyntheticDataset& data,
                                    const std::vector<double>& checkpoint,
                                    const WarmStartOptions& options) {
  require(!checkpoint.empty(), "missing warm-start checkpoint");
  require(checkpoint.size() == parameter_count(data, options.model),
          "checkpoint does not match the model");
  WarmStartReport report;
  report.checkpoint_mean_iou = evaluate_corpus(data, options.model, checkpoint).mean_iou;
  const std::pair<const char*, LossKind> branches[] = {
      {"ce", LossKind::kCrossEntropy}, {"uoi", LossKind::kUoi}, {"combined", LossKind::kCombined}};
  for (const auto& [name, loss] : branches) {
    WarmStartBranch branch;
    branch.name = name;
    branch.config.loss = loss;
    branch.config.alpha = options.alpha;
    branch.config.model = options.model;
    branch.config.learning_rate = options.learning_rate;
    branch.config.iterations = options.branch_iterations;
    branch.config.seed = options.seed;
    branch.config.warm_start = checkpoint;
    branch.start_params = checkpoint;
    branch.result = train(data, branch.config);
    branch.final_mean_iou =
        branch.result.history.empty() ? 0.0 : branch.result.history.back().mean_iou;
    report.branches.push_back(std::move(branch));
  }
  return report;
}

void write_params(std::ostream& out, const std::vector<double>& params) {
  out << "PARAMS " << params.size() << '\n';
  for (double p : params) out << fmt17(p) << '\n';
}

std::vector<double> read_params(std::istream& in) {
  std::string tag;
  std::size_t n = 0;
  if (!(in >> tag) || tag != "PARAMS" || !(in >> n)) {
    throw Error(ErrorKind::kParse, "expected PARAMS header");
  }
  std::vector<double> params(n);
  for (double& p : params) {
    if (!(in >> p) || !std::isfinite(p)) throw Error(ErrorKind::kParse, "truncated or non-finite PARAMS body");
  }
  return params;
}

void save_params(const std::filesystem::path& path, const std::vector<double>& params) {
  std::ofstream out(path);
  if (!out) throw_invalid("cannot open " + path.string() + " for writing");
  write_params(out, params);
}

std::vector<double> load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  // A missing checkpoint is a bad argument rather than a malformed file.
  if (!in) throw_invalid("cannot open checkpoint " + path.string());
  return read_params(in);
}

void write_history_csv(std::ostream& out, const std::vector<HistoryEntry>& history) {
  out << "iteration,loss,meanIOU,bgFraction\n";
  for (const auto& h : history) {
    out << h.iteration << ',' << fmt9(h.loss) << ',' << fmt9(h.mean_iou) << ','
        << fmt9(h.background_fraction) << '\n';
  }
}

}  // namespace segloss
