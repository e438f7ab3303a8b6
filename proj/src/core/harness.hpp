/*
 * Copyright 2026 The semrl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "core/config.hpp"

namespace semrl {

// Receives one JSON object per line describing progress.
using LogSink = std::function<void(const std::string& json_line)>;

struct DataBundle {
  PreparedData data;
  IdfTable train_idf;  // document frequencies of the training references
  IdfTable test_idf;   // document frequencies of the held-out references
};

// Reads corpus.path, or generates the synthetic grammar corpus when unset.
DataBundle load_data(const ExperimentConfig& cfg);

struct ModelRef {
  std::string label;  // e.g. "ce", "rl"
  std::filesystem::path checkpoint;
};

// "label=path" or a bare path (label taken from the file stem).
ModelRef parse_model_ref(const std::string& spec);

struct LoadedModel {
  std::string label;
  Seq2Seq model;
  std::map<std::string, std::string> header;
};

// Throws ErrorCode::Load on a config-hash or vocabulary mismatch.
LoadedModel load_model(const ModelRef& ref, const ExperimentConfig& cfg, const Vocabulary& vocab);

struct PreprocessSummary {
  size_t raw_lines = 0;
  size_t retained = 0;
  size_t train = 0;
  size_t test = 0;
  size_t vocab_size = 0;
};

// Writes vocab.tsv, train.txt, test.txt and preprocess.json into out_dir.
PreprocessSummary run_preprocess(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                 const LogSink& log = {});

struct TrainSummary {
  std::filesystem::path run_dir;
  std::filesystem::path pretrain_checkpoint;
  std::vector<ModelRef> finals;  // one per configured variant
};

// run_dir = <output_dir>/seed-<seed>. Stage 1 once, then every variant
// continues from the same pretrained weights. Writes config.ini, vocab.tsv,
// log.jsonl, epochs.csv and checkpoints.
TrainSummary run_train(const ExperimentConfig& cfg, uint64_t seed, const LogSink& log = {});

struct EvalSettings {
  ChannelKind channel = ChannelKind::Awgn;
  double snr_db = 10.0;
  size_t passes = 3;
  uint64_t seed = 0;
};

struct ModelEval {
  std::string label;
  EvalResult result;
};

// Writes report.json (and transcripts.txt when cfg.transcripts > 0) into
// out_dir. Returns the per-model results.
std::vector<ModelEval> run_evaluate(const ExperimentConfig& cfg, const std::vector<ModelRef>& models,
                                    const EvalSettings& settings,
                                    const std::filesystem::path& out_dir, const LogSink& log = {});

struct SweepCell {
  std::string label;
  ChannelKind channel;
  double snr_db;
  MetricReport report;
};

// Cells ordered by model, channel, then ascending SNR. Writes sweep.json and
// sweep.csv into out_dir.
std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg, const std::vector<ModelRef>& models,
                                 const SnrGrid& grid, const std::vector<ChannelKind>& channels,
                                 const std::filesystem::path& out_dir, const LogSink& log = {});

struct DegradationRow {
  std::string label;
  std::array<double, 6> awgn{};     // bleu1..4, cider_d, wer
  std::array<double, 6> fading{};
  std::array<double, 6> percent{};  // 100 * (awgn - fading) / awgn
};

// Throws ErrorCode::Contract when the reports differ in sample count.
DegradationRow degradation_row(const std::string& label, const MetricReport& awgn,
                               const MetricReport& fading);
double percent_degradation(double awgn, double fading);
// One decimal and a percent sign, e.g. "15.1%".
std::string format_percent(double percent);
std::string format_degradation_table(const std::vector<DegradationRow>& rows, double snr_db);

// Evaluates every model on AWGN and fading at snr_db; writes
// degradation.json, degradation.csv and degradation.txt.
std::vector<DegradationRow> run_degradation(const ExperimentConfig& cfg,
                                            const std::vector<ModelRef>& models, double snr_db,
                                            const std::filesystem::path& out_dir,
                                            const LogSink& log = {});

// From two report.json files written by run_evaluate.
std::vector<DegradationRow> degradation_from_reports(const std::filesystem::path& awgn_report,
                                                     const std::filesystem::path& fading_report);
// degradation_from_reports, written as degradation.{json,csv,txt}.
void write_degradation_reports(const std::filesystem::path& awgn_report,
                               const std::filesystem::path& fading_report,
                               const std::filesystem::path& out_dir);

struct ImageDemoSummary {
  double untrained_final_mse = 0.0;
  double trained_final_mse = 0.0;
  std::vector<double> trained_step_mse;
};

// Trains the pixel policy on the configured channel, evaluates the untrained
// and trained policies on image.test_channel, and writes episodes.jsonl,
// image_log.jsonl, image_report.json and PGM canvases for demo images.
ImageDemoSummary run_image_demo(const ExperimentConfig& cfg, uint64_t seed,
                                const std::filesystem::path& out_dir, const LogSink& log = {});

struct SelfTestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Metric oracle, gradient check, estimator unbiasedness, channel statistics
// and pixel telescoping at reduced sizes. `goldens` is optional.
std::vector<SelfTestCheck> run_selftest(const std::filesystem::path& goldens = {},
                                        const LogSink& log = {});

// Golden metric file: one JSON object per line with candidate, reference
// (space-separated words) and expected scores. IDF statistics come from the
// file's references.
struct GoldenCase {
  std::string candidate;
  std::string reference;
  std::array<double, 4> bleu{};
  double cider_d = 0.0;
  double wer = 0.0;
};
std::vector<GoldenCase> load_goldens(const std::filesystem::path& path);
// Returns the largest absolute error against the implementation.
double check_goldens(const std::vector<GoldenCase>& cases);

}  // namespace semrl
