// Copyright 2026 The ABCBoost Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "abcboost/data.hpp"
#include "abcboost/logit.hpp"
#include "abcboost/model.hpp"
#include "abcboost/threading.hpp"
#include "abcboost/tree.hpp"

namespace abcboost {

/**
 * Training configuration.
 *
 * For the base-class methods, `search_width` (s) is how many worst classes
 * are tried as base in a search iteration, `gap` (g) is how many iterations
 * reuse the previous base between searches, and `warmup` (w) is how many
 * plain iterations run before base-class selection starts.
 */
struct BoostConfig {
  Method method = Method::RobustLogit;
  int leaves = 20;        // J, terminal nodes per tree
  double shrinkage = 0.1; // nu
  int iterations = 100;   // M
  int search_width = 2;   // s
  int gap = 10;           // g
  int warmup = 0;         // w
  int max_bins = 256;
  uint64_t seed = 1;
  int threads = 1;

  bool is_abc() const { return abcboost::is_abc(method); }

  /** @throws std::invalid_argument on any out-of-range field */
  void validate(int n_classes) const {
    if (n_classes < 2)
      throw std::invalid_argument(
          "training needs at least 2 classes, got " +
          std::to_string(n_classes));
    if (leaves < 2) throw std::invalid_argument("J must be >= 2");
    if (!(shrinkage > 0.0 && shrinkage <= 1.0))
      throw std::invalid_argument("nu must be in (0, 1]");
    if (iterations < 0) throw std::invalid_argument("M must be >= 0");
    if (max_bins < 2 || max_bins > kMaxBinsLimit)
      throw std::invalid_argument("max_bins must be in [2, 65535]");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (is_abc()) {
      if (n_classes < 3)
        throw std::invalid_argument(
            "base-class methods need at least 3 classes; "
            "use mart or robustlogit for binary problems");
      if (search_width < 1 || search_width > n_classes)
        throw std::invalid_argument("s must be between 1 and K");
      if (gap < 0) throw std::invalid_argument("g must be >= 0");
      if (warmup < 0) throw std::invalid_argument("w must be >= 0");
      if (iterations > 0 && warmup >= iterations)
        throw std::invalid_argument("w must be smaller than M");
    }
  }
};

/** What happened in one committed boosting iteration. */
struct IterationRecord {
  int iteration = 0;                       // 1-based
  std::optional<int> base_class;           // empty for plain iterations
  bool searched = false;                   // base chosen by search vs reuse
  std::vector<int> candidates;             // ascending class ids
  std::vector<double> candidate_losses;    // aligned with candidates
  double train_loss = 0.0;
  std::vector<double> class_losses;        // per-class, after the commit
  int trees_trained = 0;
  std::optional<int64_t> test_errors;      // present when a test set is given
};

/** Base-class selection state carried between iterations. */
struct SelectorState {
  std::vector<double> prev_class_loss;  // L from the previous iteration
  int last_base = -1;
};

/**
 * Pick the base-class candidates for iteration m (1-based).
 *
 * Warm-up iterations (m <= w) return no candidates. Search iterations,
 * those with (m - w - 1) divisible by g+1, return the s classes with the
 * largest previous loss (ties to the smaller id), ascending. Every other
 * iteration reuses the previously committed base.
 */
inline std::vector<int> select_candidates(const SelectorState& state,
                                          const BoostConfig& config, int m) {
  if (m <= config.warmup) return {};
  if ((m - config.warmup - 1) % (config.gap + 1) == 0) {
    int k = static_cast<int>(state.prev_class_loss.size());
    std::vector<int> order(k);
    for (int c = 0; c < k; ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (state.prev_class_loss[a] != state.prev_class_loss[b])
        return state.prev_class_loss[a] > state.prev_class_loss[b];
      return a < b;
    });
    order.resize(std::min(config.search_width, k));
    std::sort(order.begin(), order.end());
    return order;
  }
  return {state.last_base};
}

/** A trained model plus its per-iteration trace. */
struct TrainResult {
  EnsembleModel model;
  std::vector<IterationRecord> trace;
  std::vector<double> final_probs;  // trainer's last in-memory p, N x K
  long long trees_trained = 0;
  bool diverged = false;
  std::string divergence_note;
};

inline const std::vector<IterationRecord>& loss_trace(const TrainResult& r) {
  return r.trace;
}

namespace detail {

inline SplitCriterion plain_criterion(Method m) {
  return (m == Method::Mart || m == Method::AbcMart)
             ? SplitCriterion::MartFirstOrder
             : SplitCriterion::RobustSecondOrder;
}

// ABC iterations keep MART's first-order scan under abcmart; only the
// response changes. abcrobustlogit scans with the second-order form.
inline SplitCriterion abc_criterion(Method m) {
  return m == Method::AbcMart ? SplitCriterion::MartFirstOrder
                              : SplitCriterion::AbcSecondOrder;
}

struct BoosterEngine {
  const BoostConfig& cfg;
  const BinnedDataset& train;
  const BinnedDataset* test;

  int k;
  int64_t n;
  ScoreMatrix scores;
  std::vector<double> test_scores;
  SelectorState selector;
  std::vector<ResponseSet> worker_resp;  // one scratch response per worker
  std::vector<double> cand_scores, best_scores;

  TrainResult result;

  BoosterEngine(const BoostConfig& c, const BinnedDataset& tr,
                const BinnedDataset* te)
      : cfg(c), train(tr), test(te) {
    k = train.n_classes;
    n = train.n_samples;
    scores.init(n, k);
    if (test) test_scores.assign(test->n_samples * k, 0.0);
    selector.prev_class_loss.assign(k, 0.0);
    worker_resp.resize(cfg.threads);
  }

  void fill_plain_response(int class_id, ResponseSet& resp) const {
    resp.numerator.resize(n);
    resp.weight.resize(n);
    const double* p = scores.probs.data();
    for (int64_t i = 0; i < n; ++i) {
      double pk = p[i * k + class_id];
      double r = train.labels[i] == class_id ? 1.0 : 0.0;
      resp.numerator[i] = r - pk;
      resp.weight[i] = pk * (1.0 - pk);
    }
  }

  void fill_abc_response(int base, int class_id, ResponseSet& resp) const {
    resp.numerator.resize(n);
    resp.weight.resize(n);
    const double* p = scores.probs.data();
    for (int64_t i = 0; i < n; ++i) {
      double pb = p[i * k + base];
      double pk = p[i * k + class_id];
      double rb = train.labels[i] == base ? 1.0 : 0.0;
      double rk = train.labels[i] == class_id ? 1.0 : 0.0;
      resp.numerator[i] = (rk - pk) - (rb - pb);
      resp.weight[i] = pb * (1.0 - pb) + pk * (1.0 - pk) + 2.0 * pb * pk;
    }
  }

  int64_t count_test_errors() const {
    int64_t errors = 0;
    for (int64_t i = 0; i < test->n_samples; ++i) {
      const double* f = test_scores.data() + i * k;
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (f[c] > f[best]) best = c;
      if (best != test->labels[i]) ++errors;
    }
    return errors;
  }

  void add_tree_to_test(const RegressionTree& tree, int class_id) {
    for (int64_t i = 0; i < test->n_samples; ++i) {
      int at = 0;
      while (!tree.nodes[at].is_leaf()) {
        const auto& node = tree.nodes[at];
        at = test->columns[node.feature][i] <= node.threshold ? node.left
                                                              : node.right;
      }
      test_scores[i * k + class_id] +=
          cfg.shrinkage * tree.nodes[at].leaf_value;
    }
  }

  /** Subtract each sample's mean score; class order is untouched. */
  void recenter_scores() {
    auto recenter = [&](std::vector<double>& f, int64_t rows) {
      for (int64_t i = 0; i < rows; ++i) {
        double mean = 0.0;
        for (int c = 0; c < k; ++c) mean += f[i * k + c];
        mean /= k;
        for (int c = 0; c < k; ++c) f[i * k + c] -= mean;
      }
    };
    recenter(scores.scores, n);
    if (test) recenter(test_scores, test->n_samples);
    scores.refresh_probabilities();
  }

  void plain_iteration(int m) {
    SplitCriterion criterion = plain_criterion(cfg.method);
    double scale = static_cast<double>(k - 1) / k;
    std::vector<GrownTree> grown(k);
    parallel_tasks(static_cast<std::size_t>(k), cfg.threads,
                   [&](std::size_t class_id, int worker) {
                     ResponseSet& resp = worker_resp[worker];
                     fill_plain_response(static_cast<int>(class_id), resp);
                     grown[class_id] = grow_tree(train, resp, cfg.leaves,
                                                 criterion, scale);
                   });
    EnsembleModel::IterationGroup group;
    for (int c = 0; c < k; ++c) {
      const std::vector<double>& pred = grown[c].sample_prediction;
      for (int64_t i = 0; i < n; ++i)
        scores.scores[i * k + c] += cfg.shrinkage * pred[i];
      if (test) add_tree_to_test(grown[c].tree, c);
      group.trees.push_back(std::move(grown[c].tree));
    }
    scores.refresh_probabilities();
    ClassLossVector losses = total_and_class_losses(
        scores.probs, n, k, train.labels);
    selector.prev_class_loss = losses.per_class;

    IterationRecord rec;
    rec.iteration = m;
    rec.train_loss = losses.total;
    rec.class_losses = std::move(losses.per_class);
    rec.trees_trained = k;
    if (test) rec.test_errors = count_test_errors();
    result.trace.push_back(std::move(rec));
    result.model.groups.push_back(std::move(group));
    result.trees_trained += k;
  }

  /** @return false when every candidate diverged and training must halt */
  bool abc_iteration(int m, const std::vector<int>& candidates,
                     bool searched) {
    SplitCriterion criterion = abc_criterion(cfg.method);
    int n_cands = static_cast<int>(candidates.size());
    int trees_per_cand = k - 1;
    std::vector<GrownTree> grown(
        static_cast<std::size_t>(n_cands) * trees_per_cand);
    parallel_tasks(
        grown.size(), cfg.threads, [&](std::size_t task, int worker) {
          int ci = static_cast<int>(task) / trees_per_cand;
          int j = static_cast<int>(task) % trees_per_cand;
          int base = candidates[ci];
          int class_id = j < base ? j : j + 1;  // ascending, skipping base
          ResponseSet& resp = worker_resp[worker];
          fill_abc_response(base, class_id, resp);
          grown[task] = grow_tree(train, resp, cfg.leaves, criterion, 1.0);
        });

    cand_scores.resize(scores.scores.size());
    best_scores.resize(scores.scores.size());
    int best_ci = -1;
    double best_loss = 0.0;
    std::vector<double> cand_losses(n_cands);
    bool all_dominated = true;
    for (int ci = 0; ci < n_cands; ++ci) {
      int base = candidates[ci];
      std::copy(scores.scores.begin(), scores.scores.end(),
                cand_scores.begin());
      for (int j = 0; j < trees_per_cand; ++j) {
        int class_id = j < base ? j : j + 1;
        const std::vector<double>& pred =
            grown[static_cast<std::size_t>(ci) * trees_per_cand + j]
                .sample_prediction;
        for (int64_t i = 0; i < n; ++i)
          cand_scores[i * k + class_id] += cfg.shrinkage * pred[i];
      }
      for (int64_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int c = 0; c < k; ++c)
          if (c != base) sum += cand_scores[i * k + c];
        cand_scores[i * k + base] = -sum;
      }
      int64_t clamped = 0;
      double loss = total_loss_of_scores(cand_scores, n, k, train.labels,
                                         &clamped);
      cand_losses[ci] = loss;
      // A candidate counts as diverged only when floor terms make up at
      // least half its loss; a handful of clamped samples is survivable
      // because selection discards any candidate with a worse total.
      double floor_loss =
          static_cast<double>(clamped) * -std::log(kProbabilityFloor);
      if (clamped == 0 || floor_loss * 2.0 < loss) all_dominated = false;
      if (best_ci < 0 || loss < best_loss ||
          (loss == best_loss && base < candidates[best_ci])) {
        best_ci = ci;
        best_loss = loss;
        best_scores.swap(cand_scores);
      }
    }
    result.trees_trained +=
        static_cast<long long>(n_cands) * trees_per_cand;
    if (all_dominated) {
      result.diverged = true;
      result.divergence_note =
          "iteration " + std::to_string(m) +
          ": every candidate's loss is dominated by probability-floor "
          "terms; training halted with the model trained so far";
      return false;
    }

    int base = candidates[best_ci];
    scores.scores.swap(best_scores);
    scores.refresh_probabilities();
    ClassLossVector losses =
        total_and_class_losses(scores.probs, n, k, train.labels);
    selector.prev_class_loss = losses.per_class;
    selector.last_base = base;

    EnsembleModel::IterationGroup group;
    group.base_class = base;
    for (int j = 0; j < trees_per_cand; ++j) {
      int class_id = j < base ? j : j + 1;
      RegressionTree& tree =
          grown[static_cast<std::size_t>(best_ci) * trees_per_cand + j].tree;
      if (test) add_tree_to_test(tree, class_id);
      group.trees.push_back(std::move(tree));
    }
    if (test) {
      for (int64_t i = 0; i < test->n_samples; ++i) {
        double sum = 0.0;
        for (int c = 0; c < k; ++c)
          if (c != base) sum += test_scores[i * k + c];
        test_scores[i * k + base] = -sum;
      }
    }

    IterationRecord rec;
    rec.iteration = m;
    rec.base_class = base;
    rec.searched = searched;
    rec.candidates = candidates;
    rec.candidate_losses = std::move(cand_losses);
    rec.train_loss = losses.total;
    rec.class_losses = std::move(losses.per_class);
    rec.trees_trained = n_cands * trees_per_cand;
    if (test) rec.test_errors = count_test_errors();
    result.trace.push_back(std::move(rec));
    result.model.groups.push_back(std::move(group));
    return true;
  }

  TrainResult run() {
    result.model.method = cfg.method;
    result.model.n_classes = k;
    result.model.shrinkage = cfg.shrinkage;
    result.model.leaves = cfg.leaves;
    result.model.warmup = cfg.is_abc() ? cfg.warmup : 0;
    for (int m = 1; m <= cfg.iterations; ++m) {
      if (!cfg.is_abc()) {
        plain_iteration(m);
        continue;
      }
      if (m <= cfg.warmup) {
        plain_iteration(m);
        continue;
      }
      if (m == cfg.warmup + 1) {
        if (cfg.warmup > 0) recenter_scores();
        // First selection works off class counts when no warm-up ran,
        // otherwise off the warmed-up per-class losses.
        if (cfg.warmup == 0) {
          for (int c = 0; c < k; ++c)
            selector.prev_class_loss[c] =
                static_cast<double>(train.class_counts[c]);
        } else {
          selector.prev_class_loss =
              total_and_class_losses(scores.probs, n, k, train.labels)
                  .per_class;
        }
      }
      std::vector<int> candidates = select_candidates(selector, cfg, m);
      bool searched = (m - cfg.warmup - 1) % (cfg.gap + 1) == 0;
      if (!abc_iteration(m, candidates, searched)) break;
    }
    result.final_probs = scores.probs;
    return std::move(result);
  }
};

}  // namespace detail

/**
 * Train a plain multi-class ensemble (mart or robustlogit): every iteration
 * fits one tree per class against the frozen probabilities, then refreshes.
 *
 * The returned model lacks the bin map and label coding; train() fills
 * them. Test labels, when given, must already use the training coding.
 */
inline TrainResult train_plain(const BoostConfig& config,
                               const BinnedDataset& data,
                               const BinnedDataset* test_data = nullptr) {
  if (config.is_abc())
    throw std::invalid_argument("train_plain expects mart or robustlogit");
  config.validate(data.n_classes);
  detail::BoosterEngine engine(config, data, test_data);
  return engine.run();
}

/**
 * Train a base-class ensemble (abcmart or abcrobustlogit) with the
 * (s, g, w) selection schedule: w plain warm-up iterations, then
 * mean-recentering of the scores, then per-iteration base-class search over
 * the s worst classes every g+1 iterations with reuse in between. Each
 * candidate fits K-1 trees; the candidate with the lowest total loss is
 * committed and its base score is minus the sum of the others.
 */
inline TrainResult train_abc(const BoostConfig& config,
                             const BinnedDataset& data,
                             const BinnedDataset* test_data = nullptr) {
  if (!config.is_abc())
    throw std::invalid_argument("train_abc expects abcmart or abcrobustlogit");
  config.validate(data.n_classes);
  detail::BoosterEngine engine(config, data, test_data);
  return engine.run();
}

/**
 * End-to-end training: fit bins on the training data, bin both datasets,
 * align test labels with the training coding, train by the configured
 * method, and return a complete, serializable model.
 *
 * @throws std::invalid_argument on config violations, a feature-count
 *         mismatch, or a test label the training data never saw
 */
inline TrainResult train(const BoostConfig& config, const RawDataset& data,
                         const RawDataset* test_data = nullptr) {
  config.validate(data.n_classes());
  BinMap bins = fit_bins(data, config.max_bins, config.threads);
  BinnedDataset binned = apply_bins(data, bins);
  BinnedDataset binned_test;
  if (test_data) {
    if (test_data->n_features != data.n_features)
      throw std::invalid_argument(
          "feature-count mismatch: test data has " +
          std::to_string(test_data->n_features) + " features, train has " +
          std::to_string(data.n_features));
    binned_test = apply_bins(*test_data, bins);
    relabel_dataset(binned_test,
                    align_labels(*test_data, data.label_values),
                    data.n_classes());
  }
  TrainResult result = config.is_abc()
                           ? train_abc(config, binned,
                                       test_data ? &binned_test : nullptr)
                           : train_plain(config, binned,
                                         test_data ? &binned_test : nullptr);
  result.model.bin_map = std::move(bins);
  result.model.label_values = data.label_values;
  return result;
}

}  // namespace abcboost
