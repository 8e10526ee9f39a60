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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "abcboost/booster.hpp"
#include "support/synthetic.hpp"

using namespace abcboost;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string out_path(const std::string& name) {
  return testsupport::test_dir("model") + "/" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

TrainResult small_abc_model(const RawDataset& data) {
  BoostConfig cfg;
  cfg.method = Method::AbcRobustLogit;
  cfg.leaves = 4;
  cfg.iterations = 6;
  cfg.search_width = 2;
  cfg.gap = 2;
  cfg.warmup = 2;
  cfg.max_bins = 16;
  return train(cfg, data);
}

}  // namespace

TEST_CASE("save and load round-trip exactly") {
  RawDataset data = testsupport::make_blobs(3, 3, 80, 11);
  TrainResult result = small_abc_model(data);
  std::string p1 = out_path("rt1.json");
  std::string p2 = out_path("rt2.json");
  save_model(result.model, p1);
  EnsembleModel loaded = load_model(p1);
  save_model(loaded, p2);
  REQUIRE(slurp(p1) == slurp(p2));

  std::vector<EnsembleModel::Prediction> a = result.model.predict(data);
  std::vector<EnsembleModel::Prediction> b = loaded.predict(data);
  for (int64_t i = 0; i < data.n_samples; ++i) {
    REQUIRE(a[i].label == b[i].label);
    for (int k = 0; k < 3; ++k) {
      REQUIRE(a[i].scores[k] == b[i].scores[k]);
      REQUIRE(a[i].probs[k] == b[i].probs[k]);
    }
  }
}

TEST_CASE("model file errors are specific") {
  RawDataset data = testsupport::make_blobs(3, 2, 45, 13);
  TrainResult result = small_abc_model(data);
  std::string path = out_path("tamper.json");

  SECTION("missing file") {
    REQUIRE_THROWS_WITH(load_model(out_path("nope.json")),
                        ContainsSubstring("cannot open file"));
  }
  SECTION("unsupported version") {
    save_model(result.model, path);
    nlohmann::json j = nlohmann::json::parse(slurp(path));
    j["version"] = 2;
    spit(path, j.dump(1));
    REQUIRE_THROWS_WITH(load_model(path),
                        ContainsSubstring("unsupported model file version"));
  }
  SECTION("truncated file") {
    save_model(result.model, path);
    std::string text = slurp(path);
    spit(path, text.substr(0, text.size() / 2));
    REQUIRE_THROWS_WITH(load_model(path),
                        ContainsSubstring("malformed model file"));
  }
  SECTION("wrong tree count") {
    save_model(result.model, path);
    nlohmann::json j = nlohmann::json::parse(slurp(path));
    j["iterations"][0]["trees"].erase(0);
    spit(path, j.dump(1));
    REQUIRE_THROWS_WITH(load_model(path),
                        ContainsSubstring("wrong tree count"));
  }
  SECTION("base class out of range") {
    save_model(result.model, path);
    nlohmann::json j = nlohmann::json::parse(slurp(path));
    j["iterations"][3]["base_class"] = 99;
    spit(path, j.dump(1));
    REQUIRE_THROWS_WITH(load_model(path),
                        ContainsSubstring("base class out of range"));
  }
  SECTION("non-increasing bin boundaries") {
    save_model(result.model, path);
    nlohmann::json j = nlohmann::json::parse(slurp(path));
    j["bin_map"]["boundaries"][0] = std::vector<double>{2.0, 1.0};
    spit(path, j.dump(1));
    REQUIRE_THROWS_WITH(load_model(path),
                        ContainsSubstring("not strictly increasing"));
  }
  SECTION("iteration count disagrees with M") {
    save_model(result.model, path);
    nlohmann::json j = nlohmann::json::parse(slurp(path));
    j["M"] = result.model.iterations() + 1;
    spit(path, j.dump(1));
    REQUIRE_THROWS_WITH(load_model(path),
                        ContainsSubstring("does not match M"));
  }
}

TEST_CASE("empty ensembles predict the uniform distribution") {
  RawDataset data = testsupport::make_blobs(4, 2, 40, 17);
  BoostConfig cfg;
  cfg.method = Method::Mart;
  cfg.iterations = 0;
  TrainResult result = train(cfg, data);
  std::string path = out_path("empty.json");
  save_model(result.model, path);
  EnsembleModel loaded = load_model(path);
  for (int64_t i = 0; i < 5; ++i) {
    EnsembleModel::Prediction pred = loaded.predict_row(data.row(i));
    REQUIRE(pred.label == 0);
    for (int k = 0; k < 4; ++k) {
      REQUIRE(pred.scores[k] == 0.0);
      REQUIRE(pred.probs[k] == Catch::Approx(0.25).margin(1e-15));
    }
  }
}

TEST_CASE("replayed predictions equal the trainer's final state") {
  RawDataset data = testsupport::make_blobs(3, 3, 90, 19);
  for (Method method : {Method::RobustLogit, Method::AbcRobustLogit,
                        Method::AbcMart}) {
    BoostConfig cfg;
    cfg.method = method;
    cfg.leaves = 4;
    cfg.iterations = 6;
    cfg.search_width = 2;
    cfg.gap = 1;
    cfg.warmup = is_abc(method) ? 2 : 0;
    cfg.max_bins = 16;
    TrainResult result = train(cfg, data);
    std::vector<EnsembleModel::Prediction> preds =
        result.model.predict(data);
    for (int64_t i = 0; i < data.n_samples; ++i)
      for (int k = 0; k < 3; ++k)
        REQUIRE(std::fabs(preds[i].probs[k] -
                          result.final_probs[i * 3 + k]) <= 1e-12);
  }
}

TEST_CASE("checkpointed replay matches shorter trainings") {
  RawDataset data = testsupport::make_blobs(3, 3, 70, 23);
  BoostConfig cfg;
  cfg.method = Method::AbcRobustLogit;
  cfg.leaves = 4;
  cfg.iterations = 6;
  cfg.search_width = 2;
  cfg.gap = 1;
  cfg.warmup = 2;
  cfg.max_bins = 16;
  TrainResult full = train(cfg, data);
  for (int m : {3, 4, 6}) {
    BoostConfig shorter = cfg;
    shorter.iterations = m;
    TrainResult upto = train(shorter, data);
    EnsembleModel truncated = full.model;
    truncated.groups.resize(m);
    std::vector<EnsembleModel::Prediction> a = truncated.predict(data);
    for (int64_t i = 0; i < data.n_samples; ++i)
      for (int k = 0; k < 3; ++k)
        REQUIRE(std::fabs(a[i].probs[k] - upto.final_probs[i * 3 + k]) <=
                1e-10);
  }
}

TEST_CASE("file size grows with the tree count") {
  RawDataset data = testsupport::make_blobs(3, 3, 60, 29);
  BoostConfig cfg;
  cfg.method = Method::RobustLogit;
  cfg.leaves = 4;
  cfg.max_bins = 16;
  cfg.iterations = 10;
  TrainResult ten = train(cfg, data);
  cfg.iterations = 100;
  TrainResult hundred = train(cfg, data);
  std::string p10 = out_path("m10.json");
  std::string p100 = out_path("m100.json");
  save_model(ten.model, p10);
  save_model(hundred.model, p100);
  auto s10 = std::filesystem::file_size(p10);
  auto s100 = std::filesystem::file_size(p100);
  REQUIRE(s100 > 5 * s10);
}

TEST_CASE("evaluation counts errors like a hand loop") {
  RawDataset data = testsupport::make_blobs(3, 3, 75, 31, 5.0, 0.9);
  TrainResult result = small_abc_model(data);
  EvalReport report = evaluate(result.model, data);

  int64_t errors = 0;
  std::vector<int64_t> confusion(9, 0);
  double log_loss = 0.0;
  for (int64_t i = 0; i < data.n_samples; ++i) {
    EnsembleModel::Prediction pred = result.model.predict_row(data.row(i));
    if (pred.label != data.labels[i]) ++errors;
    ++confusion[data.labels[i] * 3 + pred.label];
    log_loss -= std::log(pred.probs[data.labels[i]]);
  }
  REQUIRE(report.misclassified == errors);
  REQUIRE(report.confusion == confusion);
  REQUIRE(report.log_loss == Catch::Approx(log_loss).epsilon(1e-12));
  REQUIRE(report.error_rate ==
          Catch::Approx(static_cast<double>(errors) / 75).margin(1e-15));
  int64_t diag = confusion[0] + confusion[4] + confusion[8];
  REQUIRE(diag == 75 - errors);
}

TEST_CASE("an untrained model scores at chance on balanced data") {
  RawDataset data;
  data.n_samples = 80;
  data.n_features = 1;
  data.features.resize(80);
  std::vector<int> ids(80);
  for (int i = 0; i < 80; ++i) {
    data.features[i] = i * 0.1;
    ids[i] = i % 4;
  }
  data.labels = ids;
  data.label_values = {3.0, 7.0, 9.0, 11.0};

  BoostConfig cfg;
  cfg.method = Method::Mart;
  cfg.iterations = 0;
  TrainResult result = train(cfg, data);
  EvalReport report = evaluate(result.model, data);
  REQUIRE(report.misclassified == 60);  // everything predicts class 0
  REQUIRE(report.error_rate == 0.75);
  REQUIRE(report.log_loss ==
          Catch::Approx(80.0 * std::log(4.0)).epsilon(1e-12));
  for (int r = 0; r < 4; ++r) {
    REQUIRE(report.confusion[r * 4 + 0] == 20);
    for (int c = 1; c < 4; ++c) REQUIRE(report.confusion[r * 4 + c] == 0);
  }
}

TEST_CASE("a separable problem evaluates to zero errors") {
  RawDataset data = testsupport::make_blobs(3, 3, 60, 37, 8.0, 0.3);
  BoostConfig cfg;
  cfg.method = Method::RobustLogit;
  cfg.leaves = 4;
  cfg.iterations = 30;
  cfg.max_bins = 32;
  TrainResult result = train(cfg, data);
  EvalReport report = evaluate(result.model, data);
  REQUIRE(report.misclassified == 0);
  REQUIRE(report.error_rate == 0.0);
}

TEST_CASE("original label values flow through prediction and eval") {
  RawDataset data = testsupport::make_blobs(3, 2, 60, 41, 6.0, 0.5);
  data.label_values = {3.0, 7.0, 9.0};  // relabel the classes
  TrainResult result = small_abc_model(data);
  REQUIRE(result.model.label_values == std::vector<double>{3.0, 7.0, 9.0});

  SECTION("test labels are aligned through the model's coding") {
    RawDataset test = data;
    test.n_samples = 10;
    test.features.assign(data.features.begin(),
                         data.features.begin() + 10 * 2);
    test.labels.assign(data.labels.begin(), data.labels.begin() + 10);
    EvalReport report = evaluate(result.model, test);
    REQUIRE(report.n_samples == 10);
  }
  SECTION("an unknown label value is rejected") {
    RawDataset test = data;
    test.label_values = {3.0, 7.0, 5.0};
    REQUIRE_THROWS_WITH(evaluate(result.model, test),
                        ContainsSubstring("unknown label value"));
  }
}

TEST_CASE("prediction validates the feature count") {
  RawDataset data = testsupport::make_blobs(3, 3, 45, 43);
  TrainResult result = small_abc_model(data);
  std::vector<double> short_row = {1.0, 2.0};
  REQUIRE_THROWS_WITH(result.model.predict_row(short_row),
                      ContainsSubstring("feature-count mismatch"));
}
