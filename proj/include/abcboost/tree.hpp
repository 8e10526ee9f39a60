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
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "abcboost/data.hpp"

namespace abcboost {

// Additive damping in every leaf-value denominator.
constexpr double kLeafDamping = 1e-10;

/**
 * Split quality measure used by the gain scan.
 *
 * MartFirstOrder:    [sum n]^2 / count on each side (least-squares fit to
 *                    the numerator alone).
 * RobustSecondOrder: [sum n]^2 / [sum w] with per-sample second-order
 *                    weights.
 * AbcSecondOrder:    same algebraic form with the base-class-adjusted
 *                    numerator and weight.
 */
enum class SplitCriterion { MartFirstOrder, RobustSecondOrder, AbcSecondOrder };

/** Per-sample regression targets: numerator and second-order weight. */
struct ResponseSet {
  std::vector<double> numerator;
  std::vector<double> weight;
};

struct SplitDecision {
  int feature = -1;
  int threshold = -1;  // bin id; samples with bin <= threshold go left
  double gain = 0.0;

  bool valid() const { return threshold >= 0 && gain > 0.0; }
};

namespace detail {

// One squared-sum term of the gain; zero-mass groups contribute nothing.
inline double gain_term(double sum, double mass) {
  return mass > 0.0 ? sum * sum / mass : 0.0;
}

}  // namespace detail

/**
 * Scan one feature's histogram for the best split.
 *
 * @param[in] bin_num sum of numerators per bin
 * @param[in] bin_wt  sum of weights per bin
 * @param[in] bin_cnt sample count per bin
 * @param[in] criterion gain formula; first-order divides by counts,
 *            second-order by weight sums
 * @return best threshold and gain; threshold -1 with gain 0 when no split
 *         separates the samples (e.g. all samples in one bin). Ties prefer
 *         the smaller threshold.
 */
inline SplitDecision scan_gain(std::span<const double> bin_num,
                               std::span<const double> bin_wt,
                               std::span<const int64_t> bin_cnt,
                               SplitCriterion criterion) {
  int bins = static_cast<int>(bin_num.size());
  double total_num = 0.0, total_wt = 0.0;
  int64_t total_cnt = 0;
  for (int b = 0; b < bins; ++b) {
    total_num += bin_num[b];
    total_wt += bin_wt[b];
    total_cnt += bin_cnt[b];
  }
  bool first_order = criterion == SplitCriterion::MartFirstOrder;
  double parent = first_order
                      ? detail::gain_term(total_num, static_cast<double>(total_cnt))
                      : detail::gain_term(total_num, total_wt);
  SplitDecision best;
  double left_num = 0.0, left_wt = 0.0;
  int64_t left_cnt = 0;
  for (int t = 0; t + 1 < bins; ++t) {
    left_num += bin_num[t];
    left_wt += bin_wt[t];
    left_cnt += bin_cnt[t];
    // An empty bin t duplicates the previous threshold; skip it so ties
    // resolve to the smallest equivalent bin id.
    if (bin_cnt[t] == 0) continue;
    if (left_cnt == 0 || left_cnt == total_cnt) continue;
    double gain;
    if (first_order) {
      gain = detail::gain_term(left_num, static_cast<double>(left_cnt)) +
             detail::gain_term(total_num - left_num,
                               static_cast<double>(total_cnt - left_cnt)) -
             parent;
    } else {
      gain = detail::gain_term(left_num, left_wt) +
             detail::gain_term(total_num - left_num, total_wt - left_wt) -
             parent;
    }
    if (gain > best.gain) {
      best.gain = gain;
      best.threshold = t;
    }
  }
  if (best.threshold < 0) best.gain = 0.0;
  return best;
}

/**
 * Regression tree over binned features. Internal nodes route a sample left
 * when its bin id is <= threshold; leaves carry the fitted value.
 */
struct RegressionTree {
  struct Node {
    int feature = -1;
    int threshold = -1;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;
    int64_t count = 0;

    bool is_leaf() const { return left < 0; }
  };

  std::vector<Node> nodes;

  int n_leaves() const {
    int leaves = 0;
    for (const Node& n : nodes)
      if (n.is_leaf()) ++leaves;
    return leaves;
  }

  /** @param[in] row per-feature bin ids of one sample */
  double predict_bins(std::span<const uint16_t> row) const {
    int at = 0;
    while (!nodes[at].is_leaf())
      at = row[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left
                                                         : nodes[at].right;
    return nodes[at].leaf_value;
  }
};

inline double predict_tree(const RegressionTree& tree,
                           std::span<const uint16_t> row) {
  return tree.predict_bins(row);
}

/** A fitted tree plus its value on every training sample. */
struct GrownTree {
  RegressionTree tree;
  std::vector<double> sample_prediction;
};

namespace detail {

/** Best-first histogram tree grower; one instance per grow_tree call. */
struct TreeGrower {
  const BinnedDataset& data;
  const ResponseSet& resp;
  SplitCriterion criterion;
  double leaf_scale;

  std::vector<int> offsets;  // per-feature start into the bin arrays
  int total_bins = 0;

  struct NodeState {
    int tree_node = -1;
    int64_t start = 0, end = 0;  // range in idx
    double sum_num = 0.0, sum_wt = 0.0;
    SplitDecision split;
    bool open = false;  // still a candidate for splitting
  };

  std::vector<uint32_t> idx, scratch;
  std::vector<std::vector<double>> hist_num, hist_wt;
  std::vector<std::vector<int64_t>> hist_cnt;
  std::vector<NodeState> states;
  RegressionTree tree;

  TreeGrower(const BinnedDataset& d, const ResponseSet& r, SplitCriterion c,
             double scale)
      : data(d), resp(r), criterion(c), leaf_scale(scale) {
    offsets.resize(data.n_features);
    for (int f = 0; f < data.n_features; ++f) {
      offsets[f] = total_bins;
      total_bins += data.bins_per_feature[f];
    }
  }

  void build_hist(int slot, int64_t start, int64_t end) {
    auto& num = hist_num[slot];
    auto& wt = hist_wt[slot];
    auto& cnt = hist_cnt[slot];
    num.assign(total_bins, 0.0);
    wt.assign(total_bins, 0.0);
    cnt.assign(total_bins, 0);
    for (int f = 0; f < data.n_features; ++f) {
      const uint16_t* col = data.columns[f].data();
      int base = offsets[f];
      for (int64_t i = start; i < end; ++i) {
        uint32_t id = idx[i];
        int b = base + col[id];
        num[b] += resp.numerator[id];
        wt[b] += resp.weight[id];
        ++cnt[b];
      }
    }
  }

  void subtract_hist(int dst, int parent, int sibling) {
    auto& num = hist_num[dst];
    auto& wt = hist_wt[dst];
    auto& cnt = hist_cnt[dst];
    num.resize(total_bins);
    wt.resize(total_bins);
    cnt.resize(total_bins);
    for (int b = 0; b < total_bins; ++b) {
      num[b] = hist_num[parent][b] - hist_num[sibling][b];
      wt[b] = hist_wt[parent][b] - hist_wt[sibling][b];
      cnt[b] = hist_cnt[parent][b] - hist_cnt[sibling][b];
    }
  }

  void find_split(NodeState& st, int slot) {
    st.split = SplitDecision{};
    if (st.end - st.start < 2) return;
    for (int f = 0; f < data.n_features; ++f) {
      int base = offsets[f];
      int bins = data.bins_per_feature[f];
      SplitDecision d = scan_gain(
          {hist_num[slot].data() + base, static_cast<std::size_t>(bins)},
          {hist_wt[slot].data() + base, static_cast<std::size_t>(bins)},
          {hist_cnt[slot].data() + base, static_cast<std::size_t>(bins)},
          criterion);
      if (d.valid() && d.gain > st.split.gain) {
        st.split = d;
        st.split.feature = f;
      }
    }
  }

  void node_totals(int slot, NodeState& st) {
    // Any single feature's bins partition the node; feature 0 suffices.
    st.sum_num = 0.0;
    st.sum_wt = 0.0;
    int bins = data.bins_per_feature[0];
    for (int b = 0; b < bins; ++b) {
      st.sum_num += hist_num[slot][b];
      st.sum_wt += hist_wt[slot][b];
    }
  }

  /** Stable partition of the node's index range by the chosen split. */
  int64_t partition(const NodeState& st) {
    const uint16_t* col = data.columns[st.split.feature].data();
    int threshold = st.split.threshold;
    int64_t n = st.end - st.start;
    int64_t l = 0, r = 0;
    for (int64_t i = st.start; i < st.end; ++i)
      if (col[idx[i]] <= threshold) scratch[l++] = idx[i];
    int64_t mid = l;
    for (int64_t i = st.start; i < st.end; ++i)
      if (col[idx[i]] > threshold) scratch[mid + r++] = idx[i];
    for (int64_t i = 0; i < n; ++i) idx[st.start + i] = scratch[i];
    return st.start + mid;
  }

  GrownTree grow(int max_leaves) {
    int64_t n = data.n_samples;
    int max_nodes = 2 * max_leaves - 1;
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
    scratch.resize(n);
    hist_num.resize(max_nodes);
    hist_wt.resize(max_nodes);
    hist_cnt.resize(max_nodes);
    states.reserve(max_nodes);

    tree.nodes.emplace_back();
    tree.nodes[0].count = n;
    states.push_back({0, 0, n, 0.0, 0.0, SplitDecision{}, true});
    build_hist(0, 0, n);
    node_totals(0, states[0]);
    find_split(states[0], 0);

    int leaves = 1;
    while (leaves < max_leaves) {
      // Highest positive gain wins; earlier node on ties (deterministic).
      int chosen = -1;
      for (std::size_t s = 0; s < states.size(); ++s)
        if (states[s].open && states[s].split.valid() &&
            (chosen < 0 || states[s].split.gain > states[chosen].split.gain))
          chosen = static_cast<int>(s);
      if (chosen < 0) break;

      states[chosen].open = false;
      int64_t mid = partition(states[chosen]);
      int parent_slot = chosen;
      int parent_node = states[chosen].tree_node;
      int64_t p_start = states[chosen].start, p_end = states[chosen].end;
      SplitDecision split = states[chosen].split;

      int left_id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      tree.nodes[parent_node].feature = split.feature;
      tree.nodes[parent_node].threshold = split.threshold;
      tree.nodes[parent_node].left = left_id;
      tree.nodes[parent_node].right = left_id + 1;
      tree.nodes[left_id].count = mid - p_start;
      tree.nodes[left_id + 1].count = p_end - mid;

      int left_slot = static_cast<int>(states.size());
      int right_slot = left_slot + 1;
      states.push_back({left_id, p_start, mid, 0, 0, SplitDecision{}, true});
      states.push_back({left_id + 1, mid, p_end, 0, 0, SplitDecision{}, true});
      NodeState& ls = states[left_slot];
      NodeState& rs = states[right_slot];

      // Histogram of the smaller child comes from its samples; the larger
      // child is the parent histogram minus the sibling.
      if (ls.end - ls.start <= rs.end - rs.start) {
        build_hist(left_slot, ls.start, ls.end);
        subtract_hist(right_slot, parent_slot, left_slot);
      } else {
        build_hist(right_slot, rs.start, rs.end);
        subtract_hist(left_slot, parent_slot, right_slot);
      }
      node_totals(left_slot, ls);
      node_totals(right_slot, rs);
      find_split(ls, left_slot);
      find_split(rs, right_slot);
      ++leaves;
    }

    GrownTree out;
    out.sample_prediction.resize(n);
    for (NodeState& st : states) {
      RegressionTree::Node& node = tree.nodes[st.tree_node];
      if (!node.is_leaf()) continue;
      node.leaf_value =
          leaf_scale * st.sum_num / (kLeafDamping + st.sum_wt);
      for (int64_t i = st.start; i < st.end; ++i)
        out.sample_prediction[idx[i]] = node.leaf_value;
    }
    out.tree = std::move(tree);
    return out;
  }
};

}  // namespace detail

/**
 * Fit one regression tree by best-first histogram growth.
 *
 * Nodes split on the (feature, bin threshold) pair with the highest gain
 * under the given criterion; growth stops at `leaves` terminal nodes or
 * when no split has positive gain. Every leaf value is
 * leaf_scale * sum(numerator) / (1e-10 + sum(weight)) over its samples.
 *
 * Sibling histograms are derived by subtraction from the parent, and all
 * accumulation runs in a fixed sample order, so results do not depend on
 * thread count.
 *
 * @param[in] data       binned training data
 * @param[in] resp       per-sample numerator and weight
 * @param[in] leaves     terminal-node budget, >= 2
 * @param[in] criterion  split gain formula
 * @param[in] leaf_scale multiplier on every leaf value ((K-1)/K for plain
 *                       multi-class iterations, 1 for base-class-adjusted
 *                       iterations)
 * @return the tree plus its prediction on every training sample
 * @throws std::invalid_argument for leaves < 2 or size mismatches
 */
inline GrownTree grow_tree(const BinnedDataset& data, const ResponseSet& resp,
                           int leaves, SplitCriterion criterion,
                           double leaf_scale) {
  if (leaves < 2)
    throw std::invalid_argument("grow_tree: leaves must be >= 2");
  if (data.n_samples < 1)
    throw std::invalid_argument("grow_tree: empty dataset");
  if (resp.numerator.size() != static_cast<std::size_t>(data.n_samples) ||
      resp.weight.size() != static_cast<std::size_t>(data.n_samples))
    throw std::invalid_argument("grow_tree: response size mismatch");
  detail::TreeGrower grower(data, resp, criterion, leaf_scale);
  return grower.grow(leaves);
}

}  // namespace abcboost
