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
#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "segloss/error.hpp"
#include "segloss/grid_io.hpp"
#include "segloss/hard_metrics.hpp"
#include "segloss/reranker.hpp"
#include "segloss/soft_losses.hpp"
#include "segloss/trainer.hpp"

namespace segloss::cli {
namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + std::to_string(v[i]);
  return out.empty() ? "none" : out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::string optional_number(const std::optional<double>& v) {
  return v ? format_number(*v) : "excluded";
}

CommandResult usage_error(const std::string& command, const std::string& message) {
  CommandResult result{RunReport(command), kExitUsage};
  result.report.diagnostic("usage: " + message);
  return result;
}

// "key = value" lines, '#' comments.
std::map<std::string, std::string> read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kParse, "cannot open config " + path.string());
  std::map<std::string, std::string> cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kParse,
                  path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

class ConfigReader {
 public:
  explicit ConfigReader(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  double number(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      throw_invalid("config key '" + key + "' is not a number: " + it->second);
    }
  }
  int integer(const std::string& key, int fallback) {
    const double v = number(key, fallback);
    require(std::floor(v) == v, "config key '" + key + "' must be an integer");
    return static_cast<int>(v);
  }
  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  void reject_unknown() const {
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) throw_invalid("unknown config key '" + k + "'");
    }
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

SyntheticOptions dataset_options(ConfigReader& cfg) {
  SyntheticOptions o;
  o.seed = static_cast<std::uint64_t>(cfg.integer("data_seed", 0));
  o.image_count = cfg.integer("images", o.image_count);
  o.height = cfg.integer("height", o.height);
  o.width = cfg.integer("width", o.width);
  o.classes = cfg.integer("classes", o.classes);
  o.dims = cfg.integer("dims", o.dims);
  o.background_fraction = cfg.number("bg_fraction", o.background_fraction);
  o.noise = cfg.number("noise", o.noise);
  return o;
}

void echo_dataset(RunReport& r, const SyntheticOptions& o) {
  r.config("data_seed", std::to_string(o.seed));
  r.config("images", std::to_string(o.image_count));
  r.config("height", std::to_string(o.height));
  r.config("width", std::to_string(o.width));
  r.config("classes", std::to_string(o.classes));
  r.config("dims", std::to_string(o.dims));
  r.config("bg_fraction", o.background_fraction);
  r.config("noise", o.noise);
}

double corpus_mean_iou(const RerankCorpus& corpus, const std::vector<std::size_t>& picks) {
  std::vector<HardSegmentation> chosen;
  chosen.reserve(picks.size());
  for (std::size_t n = 0; n < picks.size(); ++n) chosen.push_back(corpus.sets[n].full[picks[n]]);
  return mean_iou(confusion_counts(chosen, corpus.gts));
}

double mean_image_quality(const RerankCorpus& corpus, const std::vector<std::size_t>& picks) {
  double total = 0.0;
  for (std::size_t n = 0; n < picks.size(); ++n) {
    total += image_mean_iou(corpus.sets[n].full[picks[n]], corpus.gts[n]);
  }
  return total / static_cast<double>(picks.size());
}

}  // namespace

CommandResult cmd_eval(const EvalOptions& options) {
  if (options.preds.empty() || options.gts.empty()) {
    return usage_error("eval", "at least one prediction and one ground-truth file are required");
  }
  if (options.preds.size() != options.gts.size()) {
    return usage_error("eval", "prediction and ground-truth lists differ in length");
  }
  CommandResult result{RunReport("eval"), kExitOk};
  RunReport& r = result.report;
  r.config("images", std::to_string(options.preds.size()));
  std::vector<HardSegmentation> preds;
  std::vector<HardSegmentation> gts;
  bool failed = false;
  auto load_all = [&](const std::vector<std::filesystem::path>& paths,
                      std::vector<HardSegmentation>& into) {
    for (const auto& p : paths) {
      try {
        into.push_back(load_hard(p));
      } catch (const Error& e) {
        r.diagnostic(p.string() + ": " + e.what());
        failed = true;
      }
    }
  };
  load_all(options.preds, preds);
  load_all(options.gts, gts);
  if (failed) {
    result.exit_code = kExitUsage;
    return result;
  }
  for (std::size_t n = 0; n < preds.size(); ++n) {
    if (preds[n].shape() != gts[n].shape()) {
      r.diagnostic(options.preds[n].string() + ": shape does not match " + options.gts[n].string());
      failed = true;
    }
  }
  if (failed) {
    result.exit_code = kExitUsage;
    return result;
  }
  const ConfusionCounts counts = confusion_counts(preds, gts);
  const ClassScores iou = class_iou(counts);
  const ClassScores uoi = class_uoi(counts);
  r.metric("mean_iou", iou.mean());
  r.metric("mean_uoi", uoi.mean());
  r.metric("classes_included", static_cast<double>(iou.included_count()));
  r.metric("excluded_classes", join_ints(iou.excluded));
  r.metric("degenerate_uoi_classes", join_ints(uoi.excluded));
  ReportTable table{"per_class", {"class", "tp", "fp", "fn", "gt", "iou", "uoi"}, {}};
  for (int k = 0; k < counts.classes; ++k) {
    const auto u = static_cast<std::size_t>(k);
    table.rows.push_back({std::to_string(k), format_number(counts.true_positive[u]),
                          format_number(counts.false_positive[u]),
                          format_number(counts.false_negative[u]),
                          format_number(counts.ground_truth[u]), optional_number(iou.values[u]),
                          optional_number(uoi.values[u])});
  }
  r.add_table(std::move(table));
  return result;
}

CommandResult cmd_gradcheck(const GradcheckOptions& o) {
  if (o.trials < 1) return usage_error("gradcheck", "--trials must be at least 1");
  if (o.height < 1 || o.width < 1 || o.classes < 2) {
    return usage_error("gradcheck", "grid must be at least 1x1 with 2 classes");
  }
  if (!(o.step > 0.0) || !(o.tolerance > 0.0) || o.alpha < 0.0 || o.alpha > 1.0) {
    return usage_error("gradcheck", "step and tolerance must be positive, alpha in [0, 1]");
  }
  CommandResult result{RunReport("gradcheck"), kExitOk};
  RunReport& r = result.report;
  r.set_seed(o.seed);
  r.config("trials", std::to_string(o.trials));
  r.config("height", std::to_string(o.height));
  r.config("width", std::to_string(o.width));
  r.config("classes", std::to_string(o.classes));
  r.config("step", o.step);
  r.config("tolerance", o.tolerance);
  r.config("alpha", o.alpha);

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, o.classes - 1);
  const LossKind kinds[] = {LossKind::kCrossEntropy, LossKind::kIouGain, LossKind::kUoi,
                            LossKind::kCombined};
  double worst[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t pixels = static_cast<std::size_t>(o.height) * static_cast<std::size_t>(o.width);
  for (int t = 0; t < o.trials; ++t) {
    std::vector<double> z(pixels * static_cast<std::size_t>(o.classes));
    for (double& v : z) v = gauss(rng);
    std::vector<int> labels(pixels);
    for (int& l : labels) l = label(rng);
    const ScoreMap scores(o.height, o.width, o.classes, std::move(z));
    const SoftSegmentation gt = one_hot(HardSegmentation(o.height, o.width, o.classes, labels));
    for (int j = 0; j < 4; ++j) {
      worst[j] = std::max(worst[j], finite_diff_check(kinds[j], scores, gt, o.step, o.alpha));
    }
  }
  bool pass = true;
  ReportTable table{"max_relative_error", {"loss", "max_rel_error", "pass"}, {}};
  for (int j = 0; j < 4; ++j) {
    const std::string name(loss_name(kinds[j]));
    const bool ok = worst[j] < o.tolerance;
    pass = pass && ok;
    r.metric("max_rel_error." + name, worst[j]);
    table.rows.push_back({name, format_number(worst[j]), bool_text(ok)});
  }
  r.metric("pass", bool_text(pass));
  r.add_table(std::move(table));
  result.exit_code = pass ? kExitOk : kExitCheckFailed;
  return result;
}

CommandResult cmd_sweep(const SweepOptions& o) {
  if (o.steps < 2) return usage_error("sweep", "--steps must be at least 2");
  CommandResult result{RunReport("sweep"), kExitOk};
  RunReport& r = result.report;
  r.config("gt", o.gt);
  r.config("fp_min", o.fp_min);
  r.config("fp_max", o.fp_max);
  r.config("fn_min", o.fn_min);
  r.config("fn_max", o.fn_max);
  r.config("steps", std::to_string(o.steps));
  r.config("out", o.out.string());
  const SweepTable table = gradient_sweep(o.gt, {o.fp_min, o.fp_max}, {o.fn_min, o.fn_max}, o.steps);
  for (const auto& w : table.warnings) r.diagnostic("warning: " + w);
  if (!o.out.empty()) {
    std::ofstream out(o.out);
    if (!out) throw_invalid("cannot open " + o.out.string() + " for writing");
    write_sweep_csv(out, table);
  }
  const SweepCheck check = check_sweep(table);
  r.metric("rows", static_cast<double>(table.rows.size()));
  r.metric("fn_lines", static_cast<double>(table.fn_values.size()));
  r.metric("fp_lines", static_cast<double>(table.fp_values.size()));
  r.metric("check.iou_dfp_decreasing_in_fp", bool_text(check.iou_fp_decreasing));
  r.metric("check.uoi_dfp_constant_in_fp", bool_text(check.uoi_fp_constant));
  r.metric("check.uoi_dfn_increasing_in_fn", bool_text(check.uoi_fn_increasing));
  if (!table.rows.empty()) {
    const SweepRow& origin = table.at(0, 0);
    r.metric("origin.dIOU_dFP", origin.iou_grad.d_fp);
    r.metric("origin.dIOU_dFN", origin.iou_grad.d_fn);
    r.metric("origin.dUOI_dFP", origin.uoi_grad.d_fp);
    r.metric("origin.dUOI_dFN", origin.uoi_grad.d_fn);
  }
  result.exit_code = check.all() ? kExitOk : kExitCheckFailed;
  return result;
}

CommandResult cmd_train(const TrainOptions& options) {
  ConfigReader cfg(read_config(options.config));
  const SyntheticOptions data_opts = dataset_options(cfg);
  TrainConfig tc;
  tc.loss = parse_loss_kind(cfg.text("loss", std::string(loss_name(tc.loss))));
  tc.alpha = cfg.number("alpha", tc.alpha);
  tc.model = parse_model_kind(cfg.text("model", std::string(model_name(tc.model))));
  const double default_lr = tc.model == ModelKind::kFreeScores ? 1.0 : 0.1;
  tc.learning_rate = cfg.number("learning_rate", default_lr);
  tc.iterations = cfg.integer("iterations", tc.iterations);
  tc.seed = static_cast<std::uint64_t>(cfg.integer("seed", 0));
  tc.log_every = cfg.integer("log_every", tc.log_every);
  const std::string warm = cfg.text("warm_start", "");
  cfg.reject_unknown();
  if (!warm.empty()) tc.warm_start = load_params(warm);
  tc.validate();

  CommandResult result{RunReport("train"), kExitOk};
  RunReport& r = result.report;
  r.set_seed(tc.seed);
  echo_dataset(r, data_opts);
  r.config("loss", std::string(loss_name(tc.loss)));
  r.config("alpha", tc.alpha);
  r.config("model", std::string(model_name(tc.model)));
  r.config("learning_rate", tc.learning_rate);
  r.config("iterations", std::to_string(tc.iterations));
  r.config("log_every", std::to_string(tc.log_every));
  r.config("warm_start", warm.empty() ? "none" : warm);
  r.config("out_dir", options.out_dir.string());

  const SyntheticDataset data = gen_synthetic(data_opts);
  const TrainResult tr = train(data, tc);
  std::filesystem::create_directories(options.out_dir);
  {
    std::ofstream hist(options.out_dir / "history.csv");
    write_history_csv(hist, tr.history);
  }
  save_params(options.out_dir / "checkpoint.params", tr.params);
  r.metric("dataset_bg_fraction", data.background_fraction());
  if (!tr.history.empty()) {
    const HistoryEntry& last = tr.history.back();
    r.metric("final_iteration", last.iteration);
    r.metric("final_loss", last.loss);
    r.metric("final_mean_iou", last.mean_iou);
    r.metric("final_bg_fraction", last.background_fraction);
  }
  r.metric("diverged", bool_text(tr.diverged));
  if (tr.diverged) {
    r.diagnostic(tr.diagnostic);
    result.exit_code = kExitCheckFailed;
  }
  return result;
}

CommandResult cmd_warmstart(const TrainOptions& options) {
  ConfigReader cfg(read_config(options.config));
  const SyntheticOptions data_opts = dataset_options(cfg);
  WarmStartOptions wo;
  wo.model = parse_model_kind(cfg.text("model", std::string(model_name(wo.model))));
  wo.learning_rate = cfg.number("learning_rate", wo.model == ModelKind::kFreeScores ? 1.0 : 0.1);
  wo.pretrain_iterations = cfg.integer("pretrain_iterations", wo.pretrain_iterations);
  wo.branch_iterations = cfg.integer("branch_iterations", wo.branch_iterations);
  wo.alpha = cfg.number("alpha", wo.alpha);
  wo.seed = static_cast<std::uint64_t>(cfg.integer("seed", 0));
  const std::string checkpoint_path = cfg.text("checkpoint", "");
  cfg.reject_unknown();

  CommandResult result{RunReport("warmstart"), kExitOk};
  RunReport& r = result.report;
  r.set_seed(wo.seed);
  echo_dataset(r, data_opts);
  r.config("model", std::string(model_name(wo.model)));
  r.config("learning_rate", wo.learning_rate);
  r.config("pretrain_iterations", std::to_string(wo.pretrain_iterations));
  r.config("branch_iterations", std::to_string(wo.branch_iterations));
  r.config("alpha", wo.alpha);
  r.config("checkpoint", checkpoint_path.empty() ? "pretrain" : checkpoint_path);
  r.config("out_dir", options.out_dir.string());

  const SyntheticDataset data = gen_synthetic(data_opts);
  std::filesystem::create_directories(options.out_dir);
  std::vector<double> checkpoint;
  if (checkpoint_path.empty()) {
    checkpoint = pretrain_checkpoint(data, wo);
    save_params(options.out_dir / "checkpoint.params", checkpoint);
  } else {
    checkpoint = load_params(checkpoint_path);
  }
  const WarmStartReport ws = warm_start_protocol(data, checkpoint, wo);
  r.metric("checkpoint_mean_iou", ws.checkpoint_mean_iou);
  ReportTable table{"branches", {"branch", "final_loss", "final_mean_iou", "final_bg_fraction", "diverged"}, {}};
  std::map<std::string, double> final_iou;
  bool same_start = true;
  for (const auto& b : ws.branches) {
    final_iou[b.name] = b.final_mean_iou;
    same_start = same_start && b.start_params == ws.branches.front().start_params;
    r.metric("final_mean_iou." + b.name, b.final_mean_iou);
    const HistoryEntry last = b.result.history.empty() ? HistoryEntry{} : b.result.history.back();
    table.rows.push_back({b.name, format_number(last.loss), format_number(b.final_mean_iou),
                          format_number(last.background_fraction), bool_text(b.result.diverged)});
    std::ofstream hist(options.out_dir / ("history_" + b.name + ".csv"));
    write_history_csv(hist, b.result.history);
    if (b.result.diverged) r.diagnostic(b.name + ": " + b.result.diagnostic);
  }
  r.add_table(std::move(table));
  r.metric("check.identical_start", bool_text(same_start));
  r.metric("check.uoi_ge_ce", bool_text(final_iou["uoi"] >= final_iou["ce"]));
  r.metric("check.combined_ge_min",
           bool_text(final_iou["combined"] >= std::min(final_iou["uoi"], final_iou["ce"])));
  return result;
}

CommandResult cmd_rerank(const RerankOptions& o) {
  static const std::set<std::string> strategies = {"kl", "ranker", "oracle", "random"};
  if (!strategies.count(o.strategy)) {
    return usage_error("rerank", "--strategy must be one of kl, ranker, oracle, random");
  }
  if (o.strategy == "ranker" && o.model.empty()) {
    return usage_error("rerank", "--model is required for the ranker strategy");
  }
  if (o.random_draws < 1) return usage_error("rerank", "--random-draws must be at least 1");
  CommandResult result{RunReport("rerank"), kExitOk};
  RunReport& r = result.report;
  r.set_seed(o.seed);
  r.config("pred_dir", o.pred_dir.string());
  r.config("proposal_dir", o.proposal_dir.string());
  r.config("gt_dir", o.gt_dir.string());
  r.config("strategy", o.strategy);
  r.config("model", o.model.empty() ? "none" : o.model.string());
  r.config("lambda_bg", o.lambda_bg);
  r.config("random_draws", std::to_string(o.random_draws));

  const RerankCorpus corpus = load_rerank_corpus(o.pred_dir, o.proposal_dir, o.gt_dir);
  for (const auto& set : corpus.sets) {
    require(set.has_full(), "proposal set " + set.image_id + " lacks full-resolution members");
  }
  RankModel model;
  if (o.strategy == "ranker") model = load_rank_model(o.model);

  const std::size_t n_images = corpus.sets.size();
  std::vector<std::size_t> oracle(n_images);
  std::vector<std::size_t> one_best(n_images, 0);
  std::vector<std::size_t> chosen(n_images);
  std::vector<double> oracle_quality(n_images);
  std::mt19937_64 rng(o.seed);
  std::vector<std::vector<std::size_t>> random_draws(static_cast<std::size_t>(o.random_draws));
  for (auto& draw : random_draws) {
    for (const auto& set : corpus.sets) draw.push_back(random_select(set, rng));
  }
  for (std::size_t n = 0; n < n_images; ++n) {
    const OracleChoice oc = oracle_select(corpus.sets[n], corpus.gts[n]);
    oracle[n] = oc.index;
    oracle_quality[n] = oc.quality;
    if (o.strategy == "kl") {
      chosen[n] = select_by_score(corpus.preds[n], corpus.sets[n], o.lambda_bg);
    } else if (o.strategy == "ranker") {
      chosen[n] = rank_select(model, corpus.preds[n], corpus.sets[n]);
    } else if (o.strategy == "oracle") {
      chosen[n] = oc.index;
    } else {
      chosen[n] = random_draws.front()[n];
    }
  }

  double random_mean = 0.0;
  for (const auto& draw : random_draws) random_mean += corpus_mean_iou(corpus, draw);
  random_mean /= static_cast<double>(random_draws.size());

  const double selected_iou = corpus_mean_iou(corpus, chosen);
  const double oracle_iou = corpus_mean_iou(corpus, oracle);
  const double one_best_iou = corpus_mean_iou(corpus, one_best);
  r.metric("images", static_cast<double>(n_images));
  r.metric("mean_iou." + o.strategy, selected_iou);
  r.metric("mean_iou.oracle", oracle_iou);
  r.metric("mean_iou.one_best", one_best_iou);
  r.metric("mean_iou.random_mean", random_mean);
  r.metric("image_quality." + o.strategy, mean_image_quality(corpus, chosen));
  r.metric("image_quality.oracle", mean_image_quality(corpus, oracle));
  r.metric("image_quality.one_best", mean_image_quality(corpus, one_best));

  bool dominated = true;
  ReportTable selections{"selections", {"image", "selected", "selected_quality", "oracle", "oracle_quality"}, {}};
  for (std::size_t n = 0; n < n_images; ++n) {
    const double q = image_mean_iou(corpus.sets[n].full[chosen[n]], corpus.gts[n]);
    dominated = dominated && oracle_quality[n] >= q;
    selections.rows.push_back({corpus.ids[n], std::to_string(chosen[n]), format_number(q),
                               std::to_string(oracle[n]), format_number(oracle_quality[n])});
  }
  r.metric("check.oracle_dominates_per_image", bool_text(dominated));
  ReportTable summary{"strategies", {"strategy", "corpus_mean_iou"}, {}};
  summary.rows.push_back({o.strategy, format_number(selected_iou)});
  if (o.strategy != "oracle") summary.rows.push_back({"oracle", format_number(oracle_iou)});
  summary.rows.push_back({"one_best", format_number(one_best_iou)});
  summary.rows.push_back({"random_mean", format_number(random_mean)});
  r.add_table(std::move(summary));
  r.add_table(std::move(selections));
  return result;
}

CommandResult cmd_trainranker(const TrainRankerOptions& o) {
  if (o.train_dirs.empty()) return usage_error("trainranker", "at least one --train-dir is required");
  if (o.out_model.empty()) return usage_error("trainranker", "--out model path is required");
  CommandResult result{RunReport("trainranker"), kExitOk};
  RunReport& r = result.report;
  r.set_seed(o.seed);
  std::string dirs;
  for (const auto& d : o.train_dirs) dirs += (dirs.empty() ? "" : " ") + d.string();
  r.config("train_dirs", dirs);
  r.config("out", o.out_model.string());
  r.config("lambda", o.lambda);
  r.config("epochs", std::to_string(o.epochs));
  r.config("learning_rate", o.learning_rate);

  std::vector<RankingExample> examples;
  std::vector<RerankCorpus> corpora;
  for (const auto& root : o.train_dirs) {
    corpora.push_back(load_rerank_corpus(root / "pred", root / "proposals", root / "gt"));
  }
  for (const auto& c : corpora) {
    for (std::size_t n = 0; n < c.sets.size(); ++n) {
      require(c.sets[n].has_full(), "proposal set " + c.ids[n] + " lacks full-resolution members");
      std::vector<double> quality;
      for (const auto& f : c.sets[n].full) quality.push_back(image_mean_iou(f, c.gts[n]));
      examples.push_back(make_ranking_example(c.preds[n], c.sets[n], std::move(quality)));
    }
  }
  RankerOptions ro;
  ro.lambda = o.lambda;
  ro.epochs = o.epochs;
  ro.learning_rate = o.learning_rate;
  ro.seed = o.seed;
  const RankModel model = train_ranker(examples, ro);
  save_rank_model(o.out_model, model);

  double norm = 0.0;
  for (double w : model.weights) norm += w * w;
  double top1 = 0.0;
  std::size_t images = 0;
  for (const auto& c : corpora) {
    for (std::size_t n = 0; n < c.sets.size(); ++n, ++images) {
      const std::size_t pick = rank_select(model, c.preds[n], c.sets[n]);
      top1 += image_mean_iou(c.sets[n].full[pick], c.gts[n]);
    }
  }
  r.metric("images", static_cast<double>(images));
  r.metric("feature_dim", static_cast<double>(model.dim()));
  r.metric("weight_norm", std::sqrt(norm));
  r.metric("train_selected_quality", top1 / static_cast<double>(images));
  return result;
}

CommandResult cmd_synth(const SynthOptions& o) {
  if (o.out_dir.empty()) return usage_error("synth", "--out directory is required");
  CommandResult result{RunReport("synth"), kExitOk};
  RunReport& r = result.report;
  r.set_seed(o.seed);
  RerankCorpusOptions co;
  co.seed = o.seed;
  co.image_count = o.images;
  co.height = o.height;
  co.width = o.width;
  co.classes = o.classes;
  co.proposals = o.proposals;
  co.flip_rate = o.flip_rate;
  co.shift_max = o.shift_max;
  co.include_gt = o.include_gt;
  co.embed_prediction = o.embed_prediction;
  r.config("out", o.out_dir.string());
  r.config("images", std::to_string(o.images));
  r.config("height", std::to_string(o.height));
  r.config("width", std::to_string(o.width));
  r.config("classes", std::to_string(o.classes));
  r.config("proposals", std::to_string(o.proposals));
  r.config("flip_rate", o.flip_rate);
  r.config("shift_max", std::to_string(o.shift_max));
  r.config("include_gt", bool_text(o.include_gt));
  r.config("embed_prediction", bool_text(o.embed_prediction));
  const RerankCorpus corpus = gen_rerank_corpus(co);
  save_rerank_corpus(o.out_dir, corpus);
  r.metric("images", static_cast<double>(corpus.ids.size()));
  return result;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Corpus-level segmentation losses, metrics and proposal re-ranking"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  std::string format = "text";
  std::filesystem::path report_path;
  app.add_option("--format", format, "Report format")->check(CLI::IsMember({"text", "csv"}));
  app.add_option("--report", report_path, "Write the report here instead of stdout");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Corpus mean IOU/UOI of hard predictions");
  eval_cmd->add_option("--pred", eval.preds, "Prediction HARD files");
  eval_cmd->add_option("--gt", eval.gts, "Ground-truth HARD files (paired with --pred)");

  GradcheckOptions grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of all loss gradients");
  grad_cmd->add_option("--seed", grad.seed);
  grad_cmd->add_option("--trials", grad.trials)->check(CLI::PositiveNumber);
  grad_cmd->add_option("--height", grad.height);
  grad_cmd->add_option("--width", grad.width);
  grad_cmd->add_option("--classes", grad.classes);
  grad_cmd->add_option("--step", grad.step);
  grad_cmd->add_option("--tolerance", grad.tolerance);
  grad_cmd->add_option("--alpha", grad.alpha);

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "IOU/UOI gradient behaviour over an FP x FN grid");
  sweep_cmd->add_option("--gt", sweep.gt);
  sweep_cmd->add_option("--fp-min", sweep.fp_min);
  sweep_cmd->add_option("--fp-max", sweep.fp_max);
  sweep_cmd->add_option("--fn-min", sweep.fn_min);
  sweep_cmd->add_option("--fn-max", sweep.fn_max);
  sweep_cmd->add_option("--steps", sweep.steps);
  sweep_cmd->add_option("--out", sweep.out, "CSV output path");

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Gradient descent on a synthetic corpus");
  train_cmd->add_option("--config", train_opts.config)->required();
  train_cmd->add_option("--out", train_opts.out_dir, "Output directory");

  TrainOptions warm_opts;
  auto* warm_cmd = app.add_subcommand("warmstart", "CE checkpoint continued under CE, UOI, combined");
  warm_cmd->add_option("--config", warm_opts.config)->required();
  warm_cmd->add_option("--out", warm_opts.out_dir, "Output directory");

  RerankOptions rerank;
  auto* rerank_cmd = app.add_subcommand("rerank", "Select one proposal per image");
  rerank_cmd->add_option("--pred-dir", rerank.pred_dir)->required();
  rerank_cmd->add_option("--proposal-dir", rerank.proposal_dir)->required();
  rerank_cmd->add_option("--gt-dir", rerank.gt_dir)->required();
  rerank_cmd->add_option("--strategy", rerank.strategy);
  rerank_cmd->add_option("--model", rerank.model);
  rerank_cmd->add_option("--lambda-bg", rerank.lambda_bg);
  rerank_cmd->add_option("--random-draws", rerank.random_draws);
  rerank_cmd->add_option("--seed", rerank.seed);

  TrainRankerOptions ranker;
  auto* ranker_cmd = app.add_subcommand("trainranker", "Train the pairwise linear ranker");
  ranker_cmd->add_option("--train-dir", ranker.train_dirs, "Corpus roots (pred/, gt/, proposals/)");
  ranker_cmd->add_option("--out", ranker.out_model, "Model output path");
  ranker_cmd->add_option("--lambda", ranker.lambda);
  ranker_cmd->add_option("--epochs", ranker.epochs)->check(CLI::PositiveNumber);
  ranker_cmd->add_option("--learning-rate", ranker.learning_rate);
  ranker_cmd->add_option("--seed", ranker.seed);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic re-ranking corpus");
  synth_cmd->add_option("--out", synth.out_dir)->required();
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--images", synth.images);
  synth_cmd->add_option("--height", synth.height);
  synth_cmd->add_option("--width", synth.width);
  synth_cmd->add_option("--classes", synth.classes);
  synth_cmd->add_option("--proposals", synth.proposals);
  synth_cmd->add_option("--flip-rate", synth.flip_rate);
  synth_cmd->add_option("--shift-max", synth.shift_max);
  synth_cmd->add_flag("--include-gt", synth.include_gt);
  synth_cmd->add_flag("--embed-prediction", synth.embed_prediction);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  const auto start = std::chrono::steady_clock::now();
  CommandResult result{RunReport("unknown"), kExitOk};
  try {
    if (eval_cmd->parsed()) {
      result = cmd_eval(eval);
    } else if (grad_cmd->parsed()) {
      result = cmd_gradcheck(grad);
    } else if (sweep_cmd->parsed()) {
      result = cmd_sweep(sweep);
    } else if (train_cmd->parsed()) {
      result = cmd_train(train_opts);
    } else if (warm_cmd->parsed()) {
      result = cmd_warmstart(warm_opts);
    } else if (rerank_cmd->parsed()) {
      result = cmd_rerank(rerank);
    } else if (ranker_cmd->parsed()) {
      result = cmd_trainranker(ranker);
    } else if (synth_cmd->parsed()) {
      result = cmd_synth(synth);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    const bool input_problem = e.kind() == ErrorKind::kInvalidInput || e.kind() == ErrorKind::kParse;
    return input_problem ? kExitUsage : kExitCheckFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  result.report.set_wall_seconds(
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  const ReportFormat fmt = format == "csv" ? ReportFormat::kCsv : ReportFormat::kText;
  if (report_path.empty()) {
    result.report.write(out, fmt);
  } else {
    std::ofstream file(report_path);
    if (!file) {
      err << "error: cannot open " << report_path << '\n';
      return kExitUsage;
    }
    result.report.write(file, fmt);
  }
  for (const auto& d : result.report.diagnostics()) err << d << '\n';
  return result.exit_code;
}

}  // namespace segloss::cli
