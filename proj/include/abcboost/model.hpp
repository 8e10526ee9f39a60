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

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "abcboost/data.hpp"
#include "abcboost/logit.hpp"
#include "abcboost/tree.hpp"

namespace abcboost {

enum class Method { Mart, RobustLogit, AbcMart, AbcRobustLogit };

inline bool is_abc(Method m) {
  return m == Method::AbcMart || m == Method::AbcRobustLogit;
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Mart: return "mart";
    case Method::RobustLogit: return "robustlogit";
    case Method::AbcMart: return "abcmart";
    case Method::AbcRobustLogit: return "abcrobustlogit";
  }
  return "";
}

inline Method parse_method(const std::string& name) {
  if (name == "mart") return Method::Mart;
  if (name == "robustlogit") return Method::RobustLogit;
  if (name == "abcmart") return Method::AbcMart;
  if (name == "abcrobustlogit") return Method::AbcRobustLogit;
  throw std::invalid_argument(
      "unknown method '" + name +
      "' (expected mart, robustlogit, abcmart, or abcrobustlogit)");
}

/**
 * A trained ensemble: the bin map, label coding, and per-iteration tree
 * groups. Plain groups hold K trees (class order); base-class groups hold
 * K-1 trees for the classes k != base in ascending order, the base score
 * being reconstructed as minus their sum.
 */
struct EnsembleModel {
  static constexpr int kFormatVersion = 1;

  Method method = Method::RobustLogit;
  int n_classes = 0;
  double shrinkage = 0.1;
  int leaves = 20;
  int warmup = 0;
  BinMap bin_map;
  std::vector<double> label_values;  // ascending originals; id -> value

  struct IterationGroup {
    std::optional<int> base_class;
    std::vector<RegressionTree> trees;
  };
  std::vector<IterationGroup> groups;

  int iterations() const { return static_cast<int>(groups.size()); }
  int n_features() const { return bin_map.n_features(); }

  bool recenters_after_warmup() const {
    return is_abc(method) && warmup > 0 &&
           static_cast<int>(groups.size()) > warmup;
  }

  /**
   * Accumulate scores for one binned row, replaying the iteration groups in
   * training order (ascending class within each group; base class last as
   * minus the sum; mean-recentering after the warm-up block when the model
   * trained past it).
   *
   * @param[in]  row    per-feature bin ids
   * @param[out] scores per-class scores, length n_classes
   */
  void score_binned_row(std::span<const uint16_t> row,
                        std::span<double> scores) const {
    for (int k = 0; k < n_classes; ++k) scores[k] = 0.0;
    bool recenter = recenters_after_warmup();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const IterationGroup& group = groups[g];
      if (!group.base_class) {
        for (int k = 0; k < n_classes; ++k)
          scores[k] += shrinkage * group.trees[k].predict_bins(row);
      } else {
        int b = *group.base_class;
        int j = 0;
        for (int k = 0; k < n_classes; ++k) {
          if (k == b) continue;
          scores[k] += shrinkage * group.trees[j++].predict_bins(row);
        }
        double sum = 0.0;
        for (int k = 0; k < n_classes; ++k)
          if (k != b) sum += scores[k];
        scores[b] = -sum;
      }
      if (recenter && static_cast<int>(g) + 1 == warmup) {
        double mean = 0.0;
        for (int k = 0; k < n_classes; ++k) mean += scores[k];
        mean /= n_classes;
        for (int k = 0; k < n_classes; ++k) scores[k] -= mean;
      }
    }
  }

  struct Prediction {
    std::vector<double> scores;
    std::vector<double> probs;
    int label = 0;  // class id; ties resolve to the smaller id
  };

  Prediction predict_row(std::span<const double> raw_row) const {
    if (static_cast<int>(raw_row.size()) != n_features())
      throw std::invalid_argument(
          "feature-count mismatch: row has " +
          std::to_string(raw_row.size()) + " features, model expects " +
          std::to_string(n_features()));
    std::vector<uint16_t> bins(n_features());
    for (int f = 0; f < n_features(); ++f)
      bins[f] = static_cast<uint16_t>(bin_map.bin_of(f, raw_row[f]));
    Prediction out;
    out.scores.resize(n_classes);
    score_binned_row(bins, out.scores);
    out.probs = softmax_probs(out.scores);
    out.label = 0;
    for (int k = 1; k < n_classes; ++k)
      if (out.scores[k] > out.scores[out.label]) out.label = k;
    return out;
  }

  std::vector<Prediction> predict(const RawDataset& data) const {
    if (data.n_features != n_features())
      throw std::invalid_argument(
          "feature-count mismatch: data has " +
          std::to_string(data.n_features) + " features, model expects " +
          std::to_string(n_features()));
    std::vector<Prediction> out;
    out.reserve(data.n_samples);
    for (int64_t i = 0; i < data.n_samples; ++i)
      out.push_back(predict_row(data.row(i)));
    return out;
  }
};

/** Aggregate test metrics. */
struct EvalReport {
  int64_t n_samples = 0;
  int64_t misclassified = 0;
  double error_rate = 0.0;
  double log_loss = 0.0;             // total negative log-likelihood
  std::vector<int64_t> confusion;    // K x K, row = true, col = predicted
};

/**
 * Score a labeled dataset. Labels are re-expressed in the model's coding
 * first; a label value the model has never seen is an error.
 */
inline EvalReport evaluate(const EnsembleModel& model, const RawDataset& data) {
  std::vector<int> labels = align_labels(data, model.label_values);
  EvalReport report;
  int k = model.n_classes;
  report.n_samples = data.n_samples;
  report.confusion.assign(static_cast<std::size_t>(k) * k, 0);
  for (int64_t i = 0; i < data.n_samples; ++i) {
    EnsembleModel::Prediction pred = model.predict_row(data.row(i));
    int truth = labels[i];
    if (pred.label != truth) ++report.misclassified;
    ++report.confusion[static_cast<std::size_t>(truth) * k + pred.label];
    double p = pred.probs[truth];
    if (p < kProbabilityFloor) p = kProbabilityFloor;
    report.log_loss -= std::log(p);
  }
  report.error_rate =
      static_cast<double>(report.misclassified) / report.n_samples;
  return report;
}

namespace detail {

inline nlohmann::ordered_json tree_to_json(const RegressionTree& tree) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const RegressionTree::Node& n : tree.nodes) {
    nlohmann::ordered_json j;
    if (n.is_leaf()) {
      j["leaf_value"] = n.leaf_value;
      j["count"] = n.count;
    } else {
      j["feature"] = n.feature;
      j["threshold_bin"] = n.threshold;
      j["left"] = n.left;
      j["right"] = n.right;
    }
    nodes.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["nodes"] = std::move(nodes);
  return out;
}

inline RegressionTree tree_from_json(const nlohmann::json& j) {
  RegressionTree tree;
  const auto& nodes = j.at("nodes");
  if (!nodes.is_array() || nodes.empty())
    throw std::runtime_error("model file: tree without nodes");
  for (const auto& n : nodes) {
    RegressionTree::Node node;
    if (n.contains("leaf_value")) {
      node.leaf_value = n.at("leaf_value").get<double>();
      node.count = n.at("count").get<int64_t>();
    } else {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold_bin").get<int>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    tree.nodes.push_back(node);
  }
  int count = static_cast<int>(tree.nodes.size());
  for (const RegressionTree::Node& n : tree.nodes) {
    if (n.is_leaf()) continue;
    if (n.left < 0 || n.left >= count || n.right < 0 || n.right >= count ||
        n.feature < 0 || n.threshold < 0)
      throw std::runtime_error("model file: malformed tree node");
  }
  return tree;
}

}  // namespace detail

/**
 * Serialize a model to JSON. Field order is fixed and doubles round-trip
 * exactly, so identical models produce identical bytes.
 */
inline void save_model(const EnsembleModel& model, const std::string& path) {
  nlohmann::ordered_json j;
  j["version"] = EnsembleModel::kFormatVersion;
  j["method"] = method_name(model.method);
  j["K"] = model.n_classes;
  j["nu"] = model.shrinkage;
  j["J"] = model.leaves;
  j["M"] = model.iterations();
  j["w"] = model.warmup;
  j["label_map"] = model.label_values;
  j["bin_map"] = {{"max_bins", model.bin_map.max_bins},
                  {"boundaries", model.bin_map.upper_bounds}};
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const EnsembleModel::IterationGroup& g : model.groups) {
    nlohmann::ordered_json jg;
    if (g.base_class)
      jg["base_class"] = *g.base_class;
    else
      jg["base_class"] = nullptr;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const RegressionTree& t : g.trees)
      trees.push_back(detail::tree_to_json(t));
    jg["trees"] = std::move(trees);
    groups.push_back(std::move(jg));
  }
  j["iterations"] = std::move(groups);
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump(1) << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

/**
 * Load a model saved by save_model.
 *
 * @throws std::runtime_error on unreadable files, malformed JSON, an
 *         unsupported version, or structural violations (wrong tree counts,
 *         base class out of range, non-increasing bin boundaries)
 */
inline EnsembleModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": malformed model file: " + e.what());
  }
  try {
    int version = j.at("version").get<int>();
    if (version != EnsembleModel::kFormatVersion)
      throw std::runtime_error(
          path + ": unsupported model file version " + std::to_string(version) +
          " (this build reads version " +
          std::to_string(EnsembleModel::kFormatVersion) + ")");
    EnsembleModel model;
    model.method = parse_method(j.at("method").get<std::string>());
    model.n_classes = j.at("K").get<int>();
    model.shrinkage = j.at("nu").get<double>();
    model.leaves = j.at("J").get<int>();
    model.warmup = j.at("w").get<int>();
    model.label_values = j.at("label_map").get<std::vector<double>>();
    if (model.n_classes < 1 ||
        static_cast<int>(model.label_values.size()) != model.n_classes)
      throw std::runtime_error(path + ": label map does not match K");
    const auto& jb = j.at("bin_map");
    model.bin_map.max_bins = jb.at("max_bins").get<int>();
    model.bin_map.upper_bounds =
        jb.at("boundaries").get<std::vector<std::vector<double>>>();
    for (const auto& ub : model.bin_map.upper_bounds) {
      if (ub.empty() ||
          static_cast<int>(ub.size()) > model.bin_map.max_bins)
        throw std::runtime_error(path + ": invalid bin boundaries");
      for (std::size_t i = 1; i < ub.size(); ++i)
        if (ub[i] <= ub[i - 1])
          throw std::runtime_error(path +
                                   ": bin boundaries not strictly increasing");
    }
    int expected_iterations = j.at("M").get<int>();
    for (const auto& jg : j.at("iterations")) {
      EnsembleModel::IterationGroup group;
      if (!jg.at("base_class").is_null()) {
        int b = jg.at("base_class").get<int>();
        if (b < 0 || b >= model.n_classes)
          throw std::runtime_error(path + ": base class out of range");
        group.base_class = b;
      }
      std::size_t expected_trees = group.base_class
                                       ? model.n_classes - 1
                                       : model.n_classes;
      const auto& jt = jg.at("trees");
      if (jt.size() != expected_trees)
        throw std::runtime_error(path + ": wrong tree count in iteration");
      for (const auto& t : jt)
        group.trees.push_back(detail::tree_from_json(t));
      model.groups.push_back(std::move(group));
    }
    if (expected_iterations != model.iterations())
      throw std::runtime_error(path + ": iteration count does not match M");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": malformed model file: " + e.what());
  }
}

}  // namespace abcboost
