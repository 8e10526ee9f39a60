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

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "abcboost/abcboost.hpp"

namespace {

using namespace abcboost;

struct IoOptions {
  std::string format = "auto";  // auto | csv | libsvm
  bool csv_header = false;
};

/** Sniff csv vs libsvm from the first non-blank line. */
DataFormat detect_format(const std::string& path, const IoOptions& io) {
  if (io.format == "csv") return DataFormat::Csv;
  if (io.format == "libsvm") return DataFormat::Libsvm;
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  std::string line;
  while (std::getline(in, line)) {
    detail::strip_cr(line);
    if (detail::blank(line)) continue;
    return line.find(':') != std::string::npos ? DataFormat::Libsvm
                                               : DataFormat::Csv;
  }
  return DataFormat::Csv;
}

RawDataset load_input(const std::string& path, const IoOptions& io,
                      int min_features = 0) {
  DataFormat format = detect_format(path, io);
  return load_dataset(path, format,
                      format == DataFormat::Csv && io.csv_header,
                      min_features);
}

bool file_has_content(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  std::string line;
  while (std::getline(in, line)) {
    detail::strip_cr(line);
    if (!detail::blank(line)) return true;
  }
  return false;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct TrainOptions {
  std::string method;
  std::string train_path;
  std::string test_path;
  std::string model_path;
  std::string log_path;
  BoostConfig config;
  IoOptions io;
};

void write_training_log(const std::string& path,
                        const std::vector<IterationRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "iter,train_loss,test_errors,base_class,candidates,trees_trained\n";
  for (const IterationRecord& rec : trace) {
    out << rec.iteration << ',' << format_double(rec.train_loss) << ',';
    if (rec.test_errors) out << *rec.test_errors;
    out << ',';
    if (rec.base_class) out << *rec.base_class;
    out << ',';
    for (std::size_t i = 0; i < rec.candidates.size(); ++i) {
      if (i) out << '|';
      out << rec.candidates[i];
    }
    out << ',' << rec.trees_trained << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

int run_train(TrainOptions& opt) {
  auto started = std::chrono::steady_clock::now();
  opt.config.method = parse_method(opt.method);
  opt.config.threads = resolve_threads(opt.config.threads);
  if (opt.model_path.empty()) opt.model_path = opt.train_path + ".model.json";
  if (opt.log_path.empty()) opt.log_path = opt.train_path + ".train.csv";

  RawDataset data = load_input(opt.train_path, opt.io);
  std::optional<RawDataset> test;
  if (!opt.test_path.empty()) test = load_input(opt.test_path, opt.io);

  std::printf("train: %s  (%lld samples, %d features, %d classes)\n",
              opt.train_path.c_str(),
              static_cast<long long>(data.n_samples), data.n_features,
              data.n_classes());
  if (test)
    std::printf("test:  %s  (%lld samples)\n", opt.test_path.c_str(),
                static_cast<long long>(test->n_samples));
  std::printf(
      "method=%s J=%d nu=%g M=%d s=%d g=%d w=%d max_bins=%d threads=%d\n",
      method_name(opt.config.method).c_str(), opt.config.leaves,
      opt.config.shrinkage, opt.config.iterations, opt.config.search_width,
      opt.config.gap, opt.config.warmup, opt.config.max_bins,
      opt.config.threads);

  TrainResult result = train(opt.config, data, test ? &*test : nullptr);

  int stride = std::max(1, opt.config.iterations / 20);
  for (const IterationRecord& rec : result.trace) {
    if (rec.iteration % stride != 0 &&
        rec.iteration != static_cast<int>(result.trace.size()))
      continue;
    std::printf("iter %5d  loss %.6f", rec.iteration, rec.train_loss);
    if (rec.test_errors)
      std::printf("  test_errors %lld",
                  static_cast<long long>(*rec.test_errors));
    if (rec.base_class) std::printf("  base %d", *rec.base_class);
    std::printf("\n");
  }
  if (result.diverged)
    std::printf("warning: %s\n", result.divergence_note.c_str());

  save_model(result.model, opt.model_path);
  write_training_log(opt.log_path, result.trace);
  double seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  std::printf("trained %lld trees over %d iterations in %.1fs\n",
              result.trees_trained, result.model.iterations(), seconds);
  std::printf("model: %s\nlog:   %s\n", opt.model_path.c_str(),
              opt.log_path.c_str());
  return 0;
}

struct PredictOptions {
  std::string model_path;
  std::string input_path;
  std::string output_path;
  IoOptions io;
};

int run_predict(PredictOptions& opt) {
  if (opt.output_path.empty()) opt.output_path = opt.input_path + ".pred.csv";
  EnsembleModel model = load_model(opt.model_path);
  if (!file_has_content(opt.input_path)) {
    std::ofstream out(opt.output_path);
    if (!out)
      throw std::runtime_error(opt.output_path + ": cannot open for writing");
    std::printf("0 predictions written to %s\n", opt.output_path.c_str());
    return 0;
  }
  RawDataset data = load_input(opt.input_path, opt.io, model.n_features());
  std::ofstream out(opt.output_path);
  if (!out)
    throw std::runtime_error(opt.output_path + ": cannot open for writing");
  for (int64_t i = 0; i < data.n_samples; ++i) {
    EnsembleModel::Prediction pred = model.predict_row(data.row(i));
    out << format_double(model.label_values[pred.label]);
    for (double p : pred.probs) out << ',' << format_double(p);
    out << '\n';
  }
  if (!out) throw std::runtime_error(opt.output_path + ": write failed");
  std::printf("%lld predictions written to %s\n",
              static_cast<long long>(data.n_samples),
              opt.output_path.c_str());
  return 0;
}

struct EvalOptions {
  std::string model_path;
  std::string data_path;
  IoOptions io;
};

int run_eval(EvalOptions& opt) {
  EnsembleModel model = load_model(opt.model_path);
  RawDataset data = load_input(opt.data_path, opt.io, model.n_features());
  EvalReport report = evaluate(model, data);
  std::printf("samples:       %lld\n",
              static_cast<long long>(report.n_samples));
  std::printf("misclassified: %lld\n",
              static_cast<long long>(report.misclassified));
  std::printf("error rate:    %.6f\n", report.error_rate);
  std::printf("test log-loss: %.6f\n", report.log_loss);
  std::printf("errors=%lld rate=%s logloss=%s\n",
              static_cast<long long>(report.misclassified),
              format_double(report.error_rate).c_str(),
              format_double(report.log_loss).c_str());
  return 0;
}

void add_io_options(CLI::App* cmd, IoOptions& io) {
  cmd->add_option("--format", io.format, "Input format")
      ->check(CLI::IsMember({"auto", "csv", "libsvm"}))
      ->capture_default_str();
  cmd->add_flag("--csv-header", io.csv_header,
                "Skip the first line of CSV inputs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Histogram-based gradient boosting for multi-class classification\n"
      "(MART, Robust LogitBoost, and adaptive-base-class variants)"};
  app.require_subcommand(1);

  TrainOptions train_opt;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("-m,--method", train_opt.method,
                        "mart | robustlogit | abcmart | abcrobustlogit")
      ->required();
  train_cmd->add_option("--train", train_opt.train_path, "Training data file")
      ->required();
  train_cmd->add_option("--test", train_opt.test_path,
                        "Test data file; enables per-iteration test error");
  train_cmd->add_option("--model", train_opt.model_path,
                        "Model output path (default <train>.model.json)");
  train_cmd->add_option("--log", train_opt.log_path,
                        "Training log path (default <train>.train.csv)");
  train_cmd->add_option("-J,--leaves", train_opt.config.leaves,
                        "Terminal nodes per tree")
      ->capture_default_str();
  train_cmd->add_option("-v,--nu", train_opt.config.shrinkage, "Shrinkage")
      ->capture_default_str();
  train_cmd->add_option("-M,--iterations", train_opt.config.iterations,
                        "Boosting iterations")
      ->capture_default_str();
  train_cmd->add_option("-s,--search", train_opt.config.search_width,
                        "Base-class candidates per search iteration")
      ->capture_default_str();
  train_cmd->add_option("-g,--gap", train_opt.config.gap,
                        "Iterations reusing the base between searches")
      ->capture_default_str();
  train_cmd->add_option("-w,--warmup", train_opt.config.warmup,
                        "Plain warm-up iterations before base selection")
      ->capture_default_str();
  train_cmd->add_option("--max-bins", train_opt.config.max_bins,
                        "Histogram bins per feature")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_opt.config.seed, "Random seed")
      ->capture_default_str();
  train_cmd->add_option("--threads", train_opt.config.threads,
                        "Worker threads (0 = ABCBOOST_THREADS or hardware)")
      ->default_val(0);
  add_io_options(train_cmd, train_opt.io);

  PredictOptions predict_opt;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "Predict labels and probabilities");
  predict_cmd->add_option("--model", predict_opt.model_path, "Model file")
      ->required();
  predict_cmd->add_option("--input", predict_opt.input_path, "Input data file")
      ->required();
  predict_cmd->add_option("--output", predict_opt.output_path,
                          "Output path (default <input>.pred.csv)");
  add_io_options(predict_cmd, predict_opt.io);

  EvalOptions eval_opt;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate a model on labeled data");
  eval_cmd->add_option("--model", eval_opt.model_path, "Model file")
      ->required();
  eval_cmd->add_option("--data", eval_opt.data_path, "Labeled data file")
      ->required();
  add_io_options(eval_cmd, eval_opt.io);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return run_train(train_opt);
    if (predict_cmd->parsed()) return run_predict(predict_opt);
    if (eval_cmd->parsed()) return run_eval(eval_opt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "[ERROR] %s\n", e.what());
    return 1;
  }
  return 0;
}
