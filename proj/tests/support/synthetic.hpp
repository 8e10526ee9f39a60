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

// Synthetic dataset generators shared by the unit and acceptance tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "abcboost/data.hpp"

namespace testsupport {

using abcboost::RawDataset;

/** Labels are their own original values 0..K-1. */
inline void set_identity_labels(RawDataset& data, std::vector<int> ids,
                                int k) {
  data.labels = std::move(ids);
  data.label_values.resize(k);
  for (int c = 0; c < k; ++c) data.label_values[c] = c;
}

/** Gaussian blobs, one cluster per class, near-balanced class counts. */
inline RawDataset make_blobs(int k, int n_features, int64_t n, uint64_t seed,
                             double center_spread = 4.0, double noise = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-center_spread, center_spread);
  std::normal_distribution<double> gauss(0.0, noise);
  std::vector<std::vector<double>> centers(k,
                                           std::vector<double>(n_features));
  for (auto& c : centers)
    for (double& v : c) v = unif(rng);
  std::vector<int> ids(n);
  for (int64_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i % k);
  std::shuffle(ids.begin(), ids.end(), rng);
  RawDataset data;
  data.n_samples = n;
  data.n_features = n_features;
  data.features.resize(n * n_features);
  for (int64_t i = 0; i < n; ++i)
    for (int f = 0; f < n_features; ++f)
      data.features[i * n_features + f] = centers[ids[i]][f] + gauss(rng);
  set_identity_labels(data, std::move(ids), k);
  return data;
}

struct LetterPair {
  RawDataset train, test;
};

/**
 * Synthetic stand-in with the Letter recognition task's shape: 26 classes,
 * 16 integer features in 0..15, 10000 train and 10000 test rows with
 * near-balanced classes. Classes come in groups sharing a base center
 * (confusable), each class spreads over four subclusters, and features are
 * quantized, so boundaries stay nonlinear and long runs keep learning.
 */
inline LetterPair make_letter_like(uint64_t seed = 2026) {
  constexpr int kClasses = 26, kFeatures = 16;
  constexpr int64_t kTrainRows = 10000, kTestRows = 10000;
  constexpr int kClusters = 4;
  constexpr double kNoiseLo = 0.7, kNoiseHi = 1.3;
  constexpr double kClassOffset = 1.6;
  constexpr double kClusterOffset = 2.2;
  constexpr int kGroupSize = 3;

  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> dim(0, kFeatures - 1);

  int n_groups = (kClasses + kGroupSize - 1) / kGroupSize;
  std::vector<std::vector<double>> base(n_groups,
                                        std::vector<double>(kFeatures));
  for (auto& b : base)
    for (double& v : b) v = uni(4.0, 11.0);

  std::vector<std::array<std::vector<double>, kClusters>> center(kClasses);
  std::vector<std::vector<double>> sigma(kClasses,
                                         std::vector<double>(kFeatures));
  for (int c = 0; c < kClasses; ++c) {
    center[c][0] = base[c / kGroupSize];
    for (int t = 0; t < 4; ++t)
      center[c][0][dim(rng)] += (rng() & 1) ? kClassOffset : -kClassOffset;
    for (int j = 1; j < kClusters; ++j) {
      center[c][j] = center[c][0];
      for (int t = 0; t < 3; ++t)
        center[c][j][dim(rng)] +=
            (rng() & 1) ? kClusterOffset : -kClusterOffset;
    }
    for (double& s : sigma[c]) s = uni(kNoiseLo, kNoiseHi);
  }

  auto generate = [&](int64_t n) {
    RawDataset d;
    d.n_samples = n;
    d.n_features = kFeatures;
    d.features.resize(n * kFeatures);
    std::vector<int> ids(n);
    for (int64_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i % kClasses);
    std::shuffle(ids.begin(), ids.end(), rng);
    for (int64_t i = 0; i < n; ++i) {
      int c = ids[i];
      int cluster = static_cast<int>(rng() % kClusters);
      for (int f = 0; f < kFeatures; ++f) {
        double x = center[c][cluster][f] + sigma[c][f] * gauss(rng);
        d.features[i * kFeatures + f] = std::clamp(std::round(x), 0.0, 15.0);
      }
    }
    set_identity_labels(d, std::move(ids), kClasses);
    return d;
  };

  LetterPair pair;
  pair.train = generate(kTrainRows);
  pair.test = generate(kTestRows);
  return pair;
}

inline void write_csv(const RawDataset& data, const std::string& path) {
  std::ofstream out(path);
  char buf[64];
  for (int64_t i = 0; i < data.n_samples; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g",
                  data.label_values[data.labels[i]]);
    out << buf;
    for (int f = 0; f < data.n_features; ++f) {
      std::snprintf(buf, sizeof(buf), ",%.17g", data.feature(i, f));
      out << buf;
    }
    out << '\n';
  }
}

/** Per-test scratch directory under the system temp root. */
inline std::string test_dir(const std::string& name) {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / "abcboost_tests" / name;
  fs::create_directories(p);
  return p.string();
}

}  // namespace testsupport
