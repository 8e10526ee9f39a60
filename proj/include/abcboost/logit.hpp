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
#include <span>
#include <stdexcept>
#include <vector>

namespace abcboost {

// Probabilities below this are clamped before taking logs.
constexpr double kProbabilityFloor = 1e-300;

/**
 * Row softmax with max-subtraction, safe for arbitrarily large scores.
 *
 * @param[in]  scores per-class scores F of one sample
 * @param[out] out    probabilities, same length; sums to 1 up to rounding
 */
inline void softmax_probs(std::span<const double> scores,
                          std::span<double> out) {
  double m = scores[0];
  for (double s : scores) m = std::max(m, s);
  double z = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    out[k] = std::exp(scores[k] - m);
    z += out[k];
  }
  for (std::size_t k = 0; k < scores.size(); ++k) out[k] /= z;
}

inline std::vector<double> softmax_probs(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  softmax_probs(scores, out);
  return out;
}

/** Per-class score/probability matrices for one dataset. */
struct ScoreMatrix {
  int64_t rows = 0;
  int classes = 0;
  std::vector<double> scores;  // row-major rows x classes
  std::vector<double> probs;

  void init(int64_t n, int k) {
    rows = n;
    classes = k;
    scores.assign(n * k, 0.0);
    probs.assign(n * k, 1.0 / k);
  }
  std::span<double> score_row(int64_t i) {
    return {scores.data() + i * classes, static_cast<std::size_t>(classes)};
  }
  std::span<const double> score_row(int64_t i) const {
    return {scores.data() + i * classes, static_cast<std::size_t>(classes)};
  }
  std::span<double> prob_row(int64_t i) {
    return {probs.data() + i * classes, static_cast<std::size_t>(classes)};
  }
  std::span<const double> prob_row(int64_t i) const {
    return {probs.data() + i * classes, static_cast<std::size_t>(classes)};
  }
  void refresh_probabilities() {
    for (int64_t i = 0; i < rows; ++i) softmax_probs(score_row(i), prob_row(i));
  }
};

/**
 * Negative log-likelihood, total and split by true class.
 *
 * per_class[k] accumulates -log p(i,k) over samples with label k; total is
 * the sum of per_class, so the decomposition identity holds exactly.
 * clamped counts samples whose probability hit the floor.
 */
struct ClassLossVector {
  std::vector<double> per_class;
  double total = 0.0;
  int64_t clamped = 0;
};

inline ClassLossVector total_and_class_losses(std::span<const double> probs,
                                              int64_t n, int k,
                                              std::span<const int> labels) {
  ClassLossVector out;
  out.per_class.assign(k, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double p = probs[i * k + labels[i]];
    if (p < kProbabilityFloor) {
      p = kProbabilityFloor;
      ++out.clamped;
    }
    out.per_class[labels[i]] -= std::log(p);
  }
  for (int c = 0; c < k; ++c) out.total += out.per_class[c];
  return out;
}

/**
 * Total negative log-likelihood of a score matrix, without materializing
 * probabilities. Used to cost candidate base classes.
 *
 * @param[out] clamped_out if non-null, number of samples at the floor
 */
inline double total_loss_of_scores(std::span<const double> scores, int64_t n,
                                   int k, std::span<const int> labels,
                                   int64_t* clamped_out = nullptr) {
  double total = 0.0;
  int64_t clamped = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double* f = scores.data() + i * k;
    double m = f[0];
    for (int c = 1; c < k; ++c) m = std::max(m, f[c]);
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += std::exp(f[c] - m);
    double p = std::exp(f[labels[i]] - m) / z;
    if (p < kProbabilityFloor) {
      p = kProbabilityFloor;
      ++clamped;
    }
    total -= std::log(p);
  }
  if (clamped_out) *clamped_out = clamped;
  return total;
}

struct Derivatives {
  double gradient = 0.0;
  double hessian = 0.0;
};

/**
 * First and second derivative of the sample loss with respect to F_k,
 * treating all class scores as free coordinates.
 *
 * @param[in] p_row per-class probabilities of the sample
 * @param[in] label true class id
 * @param[in] k     class being differentiated
 */
inline Derivatives classical_derivs(std::span<const double> p_row, int label,
                                    int k) {
  double r = (label == k) ? 1.0 : 0.0;
  double p = p_row[k];
  return {p - r, p * (1.0 - p)};
}

/**
 * Derivatives of the sample loss with respect to F_k after eliminating the
 * base class via the sum-to-zero constraint F_b = -sum_{k != b} F_k.
 *
 * gradient = (r_b - p_b) - (r_k - p_k)
 * hessian  = p_b(1-p_b) + p_k(1-p_k) + 2 p_b p_k
 *
 * @throws std::invalid_argument if k equals the base class
 */
inline Derivatives abc_derivs(std::span<const double> p_row, int label, int k,
                              int base) {
  if (k == base)
    throw std::invalid_argument("abc_derivs: k must differ from the base class");
  double rb = (label == base) ? 1.0 : 0.0;
  double rk = (label == k) ? 1.0 : 0.0;
  double pb = p_row[base];
  double pk = p_row[k];
  return {(rb - pb) - (rk - pk),
          pb * (1.0 - pb) + pk * (1.0 - pk) + 2.0 * pb * pk};
}

namespace detail {

/** Determinant by Gaussian elimination with partial pivoting; a is n x n. */
inline double dense_det(std::vector<double>& a, int n) {
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int pivot = c;
    for (int r = c + 1; r < n; ++r)
      if (std::fabs(a[r * n + c]) > std::fabs(a[pivot * n + c])) pivot = r;
    if (a[pivot * n + c] == 0.0) return 0.0;
    if (pivot != c) {
      for (int j = 0; j < n; ++j) std::swap(a[pivot * n + j], a[c * n + j]);
      det = -det;
    }
    det *= a[c * n + c];
    for (int r = c + 1; r < n; ++r) {
      double factor = a[r * n + c] / a[c * n + c];
      for (int j = c; j < n; ++j) a[r * n + j] -= factor * a[c * n + j];
    }
  }
  return det;
}

}  // namespace detail

/**
 * Determinant of the (K-1)x(K-1) Hessian of the sample loss in the free
 * coordinates left after eliminating class `base`.
 *
 * Diagonal entries follow the constrained second derivative; off-diagonal
 * entries are p_b(1-p_b) + p_b p_s + p_b p_k - p_k p_s. The value is
 * independent of which class is eliminated.
 */
inline double hessian_det(std::span<const double> p_row, int base) {
  int k = static_cast<int>(p_row.size());
  if (k < 2) throw std::invalid_argument("hessian_det: need at least 2 classes");
  if (base < 0 || base >= k)
    throw std::invalid_argument("hessian_det: base class out of range");
  std::vector<int> free_classes;
  for (int c = 0; c < k; ++c)
    if (c != base) free_classes.push_back(c);
  int n = k - 1;
  double pb = p_row[base];
  std::vector<double> h(n * n);
  for (int i = 0; i < n; ++i) {
    double pi = p_row[free_classes[i]];
    for (int j = 0; j < n; ++j) {
      double pj = p_row[free_classes[j]];
      h[i * n + j] = (i == j)
                         ? pb * (1.0 - pb) + pi * (1.0 - pi) + 2.0 * pb * pi
                         : pb * (1.0 - pb) + pb * pj + pb * pi - pi * pj;
    }
  }
  return detail::dense_det(h, n);
}

/**
 * Determinant of the full K x K Hessian with every score treated as free
 * (diagonal p_k(1-p_k), off-diagonal -p_k p_s). Singular by construction:
 * the probabilities are invariant to a common shift of the scores.
 */
inline double classical_hessian_det(std::span<const double> p_row) {
  int k = static_cast<int>(p_row.size());
  std::vector<double> h(k * k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      h[i * k + j] = (i == j) ? p_row[i] * (1.0 - p_row[i])
                              : -p_row[i] * p_row[j];
  return detail::dense_det(h, k);
}

}  // namespace abcboost
