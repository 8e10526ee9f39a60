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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "abcboost/threading.hpp"

namespace abcboost {

// Bin ids are stored as uint16_t, so a BinMap may not exceed this many bins.
constexpr int kMaxBinsLimit = 65535;

/**
 * Dense labeled dataset as loaded from disk, before binning.
 *
 * Labels are remapped to contiguous ids 0..K-1; label_values keeps the
 * original numeric values in ascending order so id i corresponds to
 * label_values[i].
 */
struct RawDataset {
  int64_t n_samples = 0;
  int n_features = 0;
  std::vector<double> features;      // row-major, n_samples * n_features
  std::vector<int> labels;           // contiguous ids 0..K-1
  std::vector<double> label_values;  // ascending originals, size K

  int n_classes() const { return static_cast<int>(label_values.size()); }
  double feature(int64_t i, int f) const {
    return features[i * n_features + f];
  }
  std::span<const double> row(int64_t i) const {
    return {features.data() + i * n_features,
            static_cast<std::size_t>(n_features)};
  }
};

enum class DataFormat { Csv, Libsvm };

namespace detail {

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline bool blank(std::string_view s) {
  return s.find_first_not_of(" \t") == std::string_view::npos;
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void parse_fail(const std::string& path, int64_t line,
                                    const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) +
                           ": parse error: " + what);
}

inline double parse_number(std::string_view token, const std::string& path,
                           int64_t line) {
  token = trim(token);
  double v = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end || token.empty())
    parse_fail(path, line, "expected a number, got '" + std::string(token) + "'");
  if (!std::isfinite(v))
    parse_fail(path, line, "non-finite value '" + std::string(token) + "'");
  return v;
}

inline long parse_index(std::string_view token, const std::string& path,
                        int64_t line) {
  token = trim(token);
  long v = 0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size() ||
      token.empty())
    parse_fail(path, line, "expected a feature index, got '" +
                               std::string(token) + "'");
  return v;
}

/** Remap raw numeric labels to contiguous ids, ascending by value. */
inline void index_labels(const std::vector<double>& originals,
                         RawDataset& out) {
  out.label_values = originals;
  std::sort(out.label_values.begin(), out.label_values.end());
  out.label_values.erase(
      std::unique(out.label_values.begin(), out.label_values.end()),
      out.label_values.end());
  out.labels.resize(originals.size());
  for (std::size_t i = 0; i < originals.size(); ++i) {
    auto it = std::lower_bound(out.label_values.begin(),
                               out.label_values.end(), originals[i]);
    out.labels[i] = static_cast<int>(it - out.label_values.begin());
  }
}

inline RawDataset load_csv(const std::string& path, std::istream& in,
                           bool skip_header) {
  RawDataset out;
  std::vector<double> originals;
  std::string line;
  int64_t line_no = 0;
  int n_cols = -1;
  if (skip_header) {
    std::getline(in, line);
    ++line_no;
  }
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    std::vector<double> fields;
    std::size_t pos = 0;
    for (;;) {
      std::size_t comma = line.find(',', pos);
      std::string_view tok(line);
      tok = tok.substr(pos, comma == std::string::npos ? std::string::npos
                                                       : comma - pos);
      fields.push_back(parse_number(tok, path, line_no));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields.size() < 2)
      parse_fail(path, line_no, "need a label and at least one feature");
    if (n_cols < 0) {
      n_cols = static_cast<int>(fields.size());
    } else if (static_cast<int>(fields.size()) != n_cols) {
      parse_fail(path, line_no,
                 "expected " + std::to_string(n_cols) + " columns, got " +
                     std::to_string(fields.size()));
    }
    originals.push_back(fields[0]);
    out.features.insert(out.features.end(), fields.begin() + 1, fields.end());
    ++out.n_samples;
  }
  if (out.n_samples == 0)
    throw std::runtime_error(path + ": no data rows");
  out.n_features = n_cols - 1;
  index_labels(originals, out);
  return out;
}

inline RawDataset load_libsvm(const std::string& path, std::istream& in,
                              int min_features) {
  struct Entry {
    int64_t row;
    int col;
    double value;
  };
  std::vector<Entry> entries;
  std::vector<double> originals;
  std::string line;
  int64_t line_no = 0;
  int64_t n_rows = 0;
  int max_col = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    std::size_t pos = line.find_first_not_of(" \t");
    std::size_t end = line.find_first_of(" \t", pos);
    std::string_view label_tok =
        std::string_view(line).substr(pos, end == std::string::npos
                                               ? std::string::npos
                                               : end - pos);
    originals.push_back(parse_number(label_tok, path, line_no));
    pos = end;
    while (pos != std::string::npos) {
      pos = line.find_first_not_of(" \t", pos);
      if (pos == std::string::npos) break;
      end = line.find_first_of(" \t", pos);
      std::string_view tok = std::string_view(line).substr(
          pos, end == std::string::npos ? std::string::npos : end - pos);
      std::size_t colon = tok.find(':');
      if (colon == std::string_view::npos)
        parse_fail(path, line_no,
                   "expected index:value, got '" + std::string(tok) + "'");
      long idx = parse_index(tok.substr(0, colon), path, line_no);
      if (idx < 1 || idx > kMaxBinsLimit * 16)
        parse_fail(path, line_no,
                   "feature index " + std::to_string(idx) + " out of range");
      double v = parse_number(tok.substr(colon + 1), path, line_no);
      entries.push_back({n_rows, static_cast<int>(idx - 1), v});
      max_col = std::max(max_col, static_cast<int>(idx));
      pos = end;
    }
    ++n_rows;
  }
  if (n_rows == 0) throw std::runtime_error(path + ": no data rows");
  RawDataset out;
  out.n_samples = n_rows;
  out.n_features = std::max(max_col, min_features);
  if (out.n_features == 0)
    throw std::runtime_error(path + ": no features present");
  out.features.assign(out.n_samples * out.n_features, 0.0);
  for (const Entry& e : entries)
    out.features[e.row * out.n_features + e.col] = e.value;
  index_labels(originals, out);
  return out;
}

}  // namespace detail

/**
 * Load a labeled dataset from disk.
 *
 * CSV rows are "label,f1,...,fd"; LIBSVM rows are "label idx:val ..." with
 * 1-based indices, absent entries read as 0. Labels must be numeric; they
 * are remapped to contiguous ids preserving ascending value order.
 *
 * @param[in] path         file to read
 * @param[in] format       input format
 * @param[in] skip_header  CSV only: drop the first line
 * @param[in] min_features LIBSVM only: pad rows to at least this many
 *                         features (used to align a sparse test file with a
 *                         trained model's feature count)
 * @return dataset with n_samples >= 1
 * @throws std::runtime_error on a missing file, an empty file, or a
 *         malformed line (message carries the 1-based line number)
 */
inline RawDataset load_dataset(const std::string& path, DataFormat format,
                               bool skip_header = false,
                               int min_features = 0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  return format == DataFormat::Csv ? detail::load_csv(path, in, skip_header)
                                   : detail::load_libsvm(path, in, min_features);
}

/**
 * Re-express a dataset's labels in another dataset's label coding.
 *
 * @param[in] data          dataset whose labels to translate
 * @param[in] label_values  ascending original label values of the reference
 *                          coding (typically the training set's)
 * @return ids into label_values, one per sample
 * @throws std::runtime_error if a label value is absent from label_values
 */
inline std::vector<int> align_labels(const RawDataset& data,
                                     const std::vector<double>& label_values) {
  std::vector<int> out(data.labels.size());
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    double v = data.label_values[data.labels[i]];
    auto it = std::lower_bound(label_values.begin(), label_values.end(), v);
    if (it == label_values.end() || *it != v)
      throw std::runtime_error("unknown label value " + std::to_string(v));
    out[i] = static_cast<int>(it - label_values.begin());
  }
  return out;
}

/**
 * Per-feature equal-frequency bin boundaries.
 *
 * upper_bounds[f] holds strictly increasing inclusive upper edges; a value v
 * maps to the first bin whose edge is >= v, and values above the last edge
 * clamp into the last bin.
 */
struct BinMap {
  int max_bins = 0;
  std::vector<std::vector<double>> upper_bounds;

  int n_features() const { return static_cast<int>(upper_bounds.size()); }
  int bins(int f) const { return static_cast<int>(upper_bounds[f].size()); }

  int bin_of(int f, double v) const {
    const auto& ub = upper_bounds[f];
    auto it = std::lower_bound(ub.begin(), ub.end(), v);
    if (it == ub.end()) return static_cast<int>(ub.size()) - 1;
    return static_cast<int>(it - ub.begin());
  }
};

/**
 * Fit equal-frequency bins on every feature.
 *
 * Features with at most max_bins distinct values get one bin per distinct
 * value. Denser features get rank-based cuts at multiples of N/max_bins,
 * with tied values always kept in the same bin.
 *
 * @param[in] data     training data
 * @param[in] max_bins upper limit per feature, >= 2
 * @return BinMap with 1..max_bins bins per feature
 */
inline BinMap fit_bins(const RawDataset& data, int max_bins, int threads = 1) {
  if (max_bins < 2)
    throw std::invalid_argument("max_bins must be >= 2");
  if (max_bins > kMaxBinsLimit)
    throw std::invalid_argument("max_bins must be <= 65535");
  if (data.n_samples < 1) throw std::invalid_argument("empty dataset");
  BinMap map;
  map.max_bins = max_bins;
  map.upper_bounds.resize(data.n_features);
  parallel_tasks(
      static_cast<std::size_t>(data.n_features), threads,
      [&](std::size_t f, int) {
        std::vector<double> col(data.n_samples);
        for (int64_t i = 0; i < data.n_samples; ++i)
          col[i] = data.feature(i, static_cast<int>(f));
        std::sort(col.begin(), col.end());
        std::vector<double>& ub = map.upper_bounds[f];
        int64_t n = data.n_samples;
        int64_t distinct = 1;
        for (int64_t i = 1; i < n; ++i)
          if (col[i] != col[i - 1]) ++distinct;
        if (distinct <= max_bins) {
          ub.push_back(col[0]);
          for (int64_t i = 1; i < n; ++i)
            if (col[i] != col[i - 1]) ub.push_back(col[i]);
          return;
        }
        // Rank cuts at round(b*n/max_bins), extended to the end of any tie
        // run so one value never straddles two bins.
        for (int b = 1; b <= max_bins; ++b) {
          int64_t rank = (2 * static_cast<int64_t>(b) * n + max_bins) /
                         (2 * max_bins);  // round(b*n/max_bins)
          if (rank < 1) rank = 1;
          if (rank > n) rank = n;
          int64_t pos = rank - 1;
          while (pos + 1 < n && col[pos + 1] == col[pos]) ++pos;
          double edge = col[pos];
          if (ub.empty() || edge > ub.back()) ub.push_back(edge);
        }
      });
  return map;
}

/**
 * Dataset after binning: per-feature columns of bin ids plus label info.
 * One-hot targets are implicit (r(i,k) = labels[i] == k).
 */
struct BinnedDataset {
  int64_t n_samples = 0;
  int n_features = 0;
  int n_classes = 0;
  std::vector<int> labels;
  std::vector<std::vector<uint16_t>> columns;  // [feature][sample]
  std::vector<int> bins_per_feature;
  std::vector<int64_t> class_counts;
};

/**
 * Apply a fitted BinMap to a dataset.
 *
 * @throws std::invalid_argument if the feature counts disagree
 */
inline BinnedDataset apply_bins(const RawDataset& data, const BinMap& map) {
  if (data.n_features != map.n_features())
    throw std::invalid_argument(
        "feature-count mismatch: data has " +
        std::to_string(data.n_features) + " features, bin map has " +
        std::to_string(map.n_features()));
  BinnedDataset out;
  out.n_samples = data.n_samples;
  out.n_features = data.n_features;
  out.n_classes = data.n_classes();
  out.labels = data.labels;
  out.bins_per_feature.resize(data.n_features);
  out.columns.resize(data.n_features);
  for (int f = 0; f < data.n_features; ++f) {
    out.bins_per_feature[f] = map.bins(f);
    out.columns[f].resize(data.n_samples);
    for (int64_t i = 0; i < data.n_samples; ++i)
      out.columns[f][i] = static_cast<uint16_t>(map.bin_of(f, data.feature(i, f)));
  }
  out.class_counts.assign(out.n_classes, 0);
  for (int label : out.labels) ++out.class_counts[label];
  return out;
}

/**
 * Replace a binned dataset's labels with ids in another coding (typically a
 * test set re-expressed in the training set's classes).
 */
inline void relabel_dataset(BinnedDataset& data, std::vector<int> labels,
                            int n_classes) {
  data.labels = std::move(labels);
  data.n_classes = n_classes;
  data.class_counts.assign(n_classes, 0);
  for (int label : data.labels) {
    if (label < 0 || label >= n_classes)
      throw std::invalid_argument("label id out of range");
    ++data.class_counts[label];
  }
}

}  // namespace abcboost
