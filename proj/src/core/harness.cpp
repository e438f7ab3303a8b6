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

#include "core/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/oracle.hpp"
#include "core/synth.hpp"

namespace semrl {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const LogSink& log, const ojson& j) {
  if (log) log(j.dump());
}

ojson meta(const ExperimentConfig& cfg, const std::vector<uint64_t>& seeds) {
  ojson j;
  j["code_version"] = kCodeVersion;
  j["config_hash"] = hash_hex(cfg.hash());
  j["seeds"] = seeds;
  return j;
}

ojson metrics_json(const MetricReport& r) {
  ojson j;
  for (int k = 0; k < kMaxNGramOrder; ++k) j["bleu" + std::to_string(k + 1)] = r.bleu[k];
  j["cider_d"] = r.cider_d;
  j["wer"] = r.wer;
  j["count"] = r.count;
  j["degenerate"] = r.degenerate;
  return j;
}

MetricReport metrics_from_json(const ojson& j) {
  MetricReport r;
  try {
    for (int k = 0; k < kMaxNGramOrder; ++k) r.bleu[k] = j.at("bleu" + std::to_string(k + 1)).get<double>();
    r.cider_d = j.at("cider_d").get<double>();
    r.wer = j.at("wer").get<double>();
    r.count = j.at("count").get<size_t>();
    r.degenerate = j.value("degenerate", size_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, std::string("malformed metrics object: ") + e.what());
  }
  return r;
}

std::string words(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string s;
  for (TokenId id : surface_ids(ids)) {
    if (!s.empty()) s += ' ';
    s += vocab.token(id);
  }
  return s;
}

std::string csv_metrics(const MetricReport& r) {
  std::string s;
  for (double b : r.bleu) s += format_double(b) + ",";
  return s + format_double(r.cider_d) + "," + format_double(r.wer);
}

uint64_t model_init_seed(uint64_t seed) { return Rng(seed).fork(0x1A17).next_u64(); }

std::string vocab_hash(const Vocabulary& v) { return hash_hex(fnv1a64(v.serialize())); }

Checkpoint make_checkpoint(const ExperimentConfig& cfg, const Seq2Seq& model, const Vocabulary& vocab,
                           const std::string& variant, size_t epoch, uint64_t seed,
                           const Optimizer* opt) {
  Checkpoint c;
  c.config_hash = cfg.hash();
  c.header = model.header();
  c.header["vocab_hash"] = vocab_hash(vocab);
  c.header["variant"] = variant;
  c.header["epoch"] = std::to_string(epoch);
  c.header["seed"] = std::to_string(seed);
  c.params = model.params();
  if (opt) c.optimizer = *opt;
  return c;
}

EvalOptions eval_options(const ExperimentConfig& cfg, const EvalSettings& s) {
  EvalOptions o;
  o.channel = s.channel;
  o.snr_db = s.snr_db;
  o.passes = s.passes;
  o.max_len = cfg.schedule.max_len;
  o.seed = s.seed;
  return o;
}

std::vector<LoadedModel> load_models(const std::vector<ModelRef>& refs, const ExperimentConfig& cfg,
                                     const Vocabulary& vocab) {
  if (refs.empty()) fail(ErrorCode::Config, "no model checkpoints given");
  std::vector<LoadedModel> out;
  for (const auto& r : refs) {
    for (const auto& m : out)
      if (m.label == r.label) fail(ErrorCode::Config, "duplicate model label '" + r.label + "'");
    out.push_back(load_model(r, cfg, vocab));
  }
  return out;
}

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

}  // namespace

DataBundle load_data(const ExperimentConfig& cfg) {
  std::vector<std::string> lines;
  if (cfg.corpus_path.empty()) {
    GrammarConfig g;
    g.sentences = cfg.synthetic_sentences;
    g.min_len = cfg.synthetic_min_len;
    g.max_len = cfg.synthetic_max_len;
    g.seed = cfg.synthetic_seed;
    lines = generate_grammar_corpus(g);
  } else {
    lines = read_lines(cfg.corpus_path);
  }
  PreparedData data = prepare_corpus(lines, cfg.preprocess);
  IdfTable train_idf = IdfTable::build(std::span<const TokenSequence>(data.train.sentences));
  IdfTable test_idf = IdfTable::build(std::span<const TokenSequence>(data.test.sentences));
  return {std::move(data), std::move(train_idf), std::move(test_idf)};
}

ModelRef parse_model_ref(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) return {fs::path(spec).stem().string(), spec};
  if (eq == 0 || eq + 1 == spec.size())
    fail(ErrorCode::Config, "model reference '" + spec + "' is not label=path");
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

LoadedModel load_model(const ModelRef& ref, const ExperimentConfig& cfg, const Vocabulary& vocab) {
  Checkpoint c = load_checkpoint(ref.checkpoint);
  if (c.config_hash != cfg.hash())
    fail(ErrorCode::Load, ref.checkpoint.string() + ": config hash " + hash_hex(c.config_hash) +
                              " does not match the config (" + hash_hex(cfg.hash()) + ")");
  auto vh = c.header.find("vocab_hash");
  if (vh == c.header.end() || vh->second != vocab_hash(vocab))
    fail(ErrorCode::Load, ref.checkpoint.string() + ": vocabulary does not match the corpus");
  const ModelDims dims = Seq2Seq::dims_from_header(c.header);
  return {ref.label, Seq2Seq::from_params(dims, std::move(c.params)), c.header};
}

PreprocessSummary run_preprocess(const ExperimentConfig& cfg, const fs::path& out_dir,
                                 const LogSink& log) {
  const DataBundle b = load_data(cfg);
  ensure_dir(out_dir);
  b.data.vocab.save(out_dir / "vocab.tsv");
  auto dump = [&](const Corpus& c, const char* name) {
    std::string text;
    for (const auto& s : c.sentences) text += words(s.ids, b.data.vocab) + "\n";
    write_text(out_dir / name, text);
  };
  dump(b.data.train, "train.txt");
  dump(b.data.test, "test.txt");
  PreprocessSummary s{b.data.raw_lines, b.data.retained, b.data.train.size(), b.data.test.size(),
                      b.data.vocab.size()};
  ojson j = meta(cfg, {cfg.preprocess.seed});
  j["raw_lines"] = s.raw_lines;
  j["retained"] = s.retained;
  j["train"] = s.train;
  j["test"] = s.test;
  j["vocab_size"] = s.vocab_size;
  write_text(out_dir / "preprocess.json", j.dump(2) + "\n");
  ojson e{{"event", "preprocess"}, {"train", s.train}, {"test", s.test}, {"vocab_size", s.vocab_size}};
  emit(log, e);
  return s;
}

TrainSummary run_train(const ExperimentConfig& cfg, uint64_t seed, const LogSink& log) {
  const DataBundle b = load_data(cfg);
  const Vocabulary& vocab = b.data.vocab;
  TrainSummary out;
  out.run_dir = fs::path(cfg.output_dir) / ("seed-" + std::to_string(seed));
  ensure_dir(out.run_dir);
  write_text(out.run_dir / "config.ini", cfg.to_string());
  vocab.save(out.run_dir / "vocab.tsv");

  ModelDims dims = cfg.dims;
  dims.vocab_size = vocab.size();
  Seq2Seq model = Seq2Seq::create(dims, model_init_seed(seed));
  TrainData data;
  data.train = &b.data.train;
  data.eval = &b.data.test;
  data.idf = &b.train_idf;
  data.eval_idf = &b.test_idf;
  data.channel = cfg.channel;
  data.snr_db = cfg.snr_db;

  std::string jsonl;
  std::string csv = "variant,epoch,stage,lr,mean_ce_loss,mean_reward,bleu1,bleu2,bleu3,bleu4,cider_d,wer\n";
  auto record = [&](const std::string& variant) {
    return [&, variant](const EpochRecord& r) {
      ojson j;
      j["variant"] = variant;
      j["epoch"] = r.epoch;
      j["stage"] = r.stage;
      j["lr"] = r.lr;
      if (r.stage == "rl") j["mean_reward"] = r.mean_reward;
      else j["mean_ce_loss"] = r.mean_ce_loss;
      if (r.eval) j["eval"] = metrics_json(*r.eval);
      if (cfg.log_wall_time) j["wall_time"] = r.wall_time;
      jsonl += j.dump() + "\n";
      csv += variant + "," + std::to_string(r.epoch) + "," + r.stage + "," + format_double(r.lr) + "," +
             (r.stage == "rl" ? std::string() : format_double(r.mean_ce_loss)) + "," +
             (r.stage == "rl" ? format_double(r.mean_reward) : std::string()) + "," +
             (r.eval ? csv_metrics(*r.eval) : std::string(",,,,,")) + "\n";
      emit(log, j);
    };
  };
  auto checkpointer = [&](const std::string& variant) {
    return [&, variant](size_t epoch, const Seq2Seq& m, const Optimizer& opt) {
      const fs::path p = out.run_dir / (variant + "-e" + std::to_string(epoch) + ".ckpt");
      save_checkpoint(p, make_checkpoint(cfg, m, vocab, variant, epoch, seed, &opt));
      return p.string();
    };
  };

  TrainSchedule stage1 = cfg.schedule;
  stage1.total_epochs = cfg.schedule.pretrain_epochs;
  TrainCallbacks cb1;
  cb1.on_epoch = record("pretrain");
  if (cfg.schedule.checkpoint_every > 0) cb1.checkpoint = checkpointer("pretrain");
  TrainResult r1 = train_two_stage(stage1, model, data, seed, cb1);
  out.pretrain_checkpoint = out.run_dir / "pretrain.ckpt";
  save_checkpoint(out.pretrain_checkpoint,
                  make_checkpoint(cfg, model, vocab, "pretrain", stage1.total_epochs, seed, &r1.optimizer));

  for (SecondStage v : cfg.variants) {
    const std::string name = v == SecondStage::Rl ? "rl" : "ce";
    Seq2Seq m = model;
    TrainSchedule s = cfg.schedule;
    s.second_stage = v;
    TrainCallbacks cb;
    cb.on_epoch = record(name);
    if (cfg.schedule.checkpoint_every > 0) cb.checkpoint = checkpointer(name);
    TrainResult r = train_two_stage(s, m, data, seed, cb, cfg.schedule.pretrain_epochs);
    const fs::path p = out.run_dir / (name + ".ckpt");
    save_checkpoint(p, make_checkpoint(cfg, m, vocab, name, s.total_epochs, seed, &r.optimizer));
    out.finals.push_back({name, p});
  }
  write_text(out.run_dir / "log.jsonl", jsonl);
  write_text(out.run_dir / "epochs.csv", csv);
  return out;
}

std::vector<ModelEval> run_evaluate(const ExperimentConfig& cfg, const std::vector<ModelRef>& refs,
                                    const EvalSettings& settings, const fs::path& out_dir,
                                    const LogSink& log) {
  const DataBundle b = load_data(cfg);
  auto models = load_models(refs, cfg, b.data.vocab);
  ensure_dir(out_dir);
  std::vector<ModelEval> results;
  ojson report = meta(cfg, {settings.seed});
  report["channel"] = channel_kind_name(settings.channel);
  report["snr_db"] = settings.snr_db;
  report["passes"] = settings.passes;
  report["models"] = ojson::array();
  for (size_t i = 0; i < models.size(); ++i) {
    EvalResult r = evaluate_model(models[i].model, b.data.test, b.test_idf, eval_options(cfg, settings));
    ojson m;
    m["label"] = models[i].label;
    m["checkpoint"] = refs[i].checkpoint.filename().string();
    m["metrics"] = metrics_json(r.report);
    m["per_pass"] = ojson::array();
    for (const auto& p : r.per_pass) m["per_pass"].push_back(metrics_json(p));
    report["models"].push_back(m);
    emit(log, ojson{{"event", "evaluate"}, {"model", models[i].label}, {"metrics", metrics_json(r.report)}});
    results.push_back({models[i].label, std::move(r)});
  }
  write_text(out_dir / "report.json", report.dump(2) + "\n");
  if (cfg.transcripts > 0) {
    std::string t;
    const size_t n = std::min(cfg.transcripts, b.data.test.size());
    for (size_t i = 0; i < n; ++i) {
      t += "IN: " + words(b.data.test.sentences[i].ids, b.data.vocab) + "\n";
      for (const auto& m : results)
        for (size_t p = 0; p < m.result.decoded.size(); ++p)
          t += upper(m.label) + (p ? " (pass " + std::to_string(p + 1) + ")" : std::string()) + ": " +
               words(m.result.decoded[p][i], b.data.vocab) + "\n";
      t += "\n";
    }
    write_text(out_dir / "transcripts.txt", t);
  }
  return results;
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg, const std::vector<ModelRef>& refs,
                                 const SnrGrid& grid, const std::vector<ChannelKind>& channels,
                                 const fs::path& out_dir, const LogSink& log) {
  const DataBundle b = load_data(cfg);
  auto models = load_models(refs, cfg, b.data.vocab);
  if (channels.empty()) fail(ErrorCode::Config, "sweep needs at least one channel");
  ensure_dir(out_dir);
  std::vector<SweepCell> cells;
  ojson j = meta(cfg, {cfg.eval_seed});
  j["snrs"] = grid.points;
  j["passes"] = cfg.eval_passes;
  j["cells"] = ojson::array();
  std::string csv = "model,channel,snr_db,bleu1,bleu2,bleu3,bleu4,cider_d,wer,count,seeds\n";
  for (auto& m : models)
    for (ChannelKind ch : channels)
      for (double snr : grid.points) {
        EvalSettings s{ch, snr, cfg.eval_passes, cfg.eval_seed};
        const auto r = evaluate_model(m.model, b.data.test, b.test_idf, eval_options(cfg, s)).report;
        cells.push_back({m.label, ch, snr, r});
        ojson c;
        c["model"] = m.label;
        c["channel"] = channel_kind_name(ch);
        c["snr_db"] = snr;
        c["seeds"] = {cfg.eval_seed};
        c["metrics"] = metrics_json(r);
        j["cells"].push_back(c);
        csv += m.label + "," + channel_kind_name(ch) + "," + format_double(snr) + "," + csv_metrics(r) +
               "," + std::to_string(r.count) + "," + std::to_string(cfg.eval_seed) + "\n";
        emit(log, ojson{{"event", "sweep"}, {"model", m.label}, {"channel", channel_kind_name(ch)},
                        {"snr_db", snr}, {"cider_d", r.cider_d}});
      }
  write_text(out_dir / "sweep.json", j.dump(2) + "\n");
  write_text(out_dir / "sweep.csv", csv);
  return cells;
}

double percent_degradation(double awgn, double fading) {
  if (awgn == 0.0) return 0.0;
  return 100.0 * (awgn - fading) / awgn;
}

std::string format_percent(double percent) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", percent);
  return buf;
}

DegradationRow degradation_row(const std::string& label, const MetricReport& awgn,
                               const MetricReport& fading) {
  if (awgn.count != fading.count)
    fail(ErrorCode::Contract, "degradation: reports cover " + std::to_string(awgn.count) + " and " +
                                  std::to_string(fading.count) + " sentences");
  DegradationRow row;
  row.label = label;
  auto fill = [](const MetricReport& r, std::array<double, 6>& v) {
    for (int k = 0; k < 4; ++k) v[k] = r.bleu[k];
    v[4] = r.cider_d;
    v[5] = r.wer;
  };
  fill(awgn, row.awgn);
  fill(fading, row.fading);
  for (size_t k = 0; k < 6; ++k) row.percent[k] = percent_degradation(row.awgn[k], row.fading[k]);
  return row;
}

std::string format_degradation_table(const std::vector<DegradationRow>& rows, double snr_db) {
  std::ostringstream out;
  char buf[64];
  out << "Performance under " << format_double(snr_db) << " dB phase-invariant fading\n";
  auto cell = [&](const std::string& s) {
    std::snprintf(buf, sizeof buf, "%-9s", s.c_str());
    out << buf;
  };
  std::snprintf(buf, sizeof buf, "%-18s", "Scenario");
  out << buf;
  for (const char* h : {"B@1", "B@2", "B@3", "B@4", "CIDEr", "WER"}) cell(h);
  out << "\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-18s", ("Fading-" + upper(r.label)).c_str());
    out << buf;
    for (double v : r.fading) {
      char num[32];
      std::snprintf(num, sizeof num, "%.3f", v);
      cell(num);
    }
    out << "\n";
  }
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-18s", ("Degradation-" + upper(r.label)).c_str());
    out << buf;
    for (double v : r.percent) cell(format_percent(v));
    out << "\n";
  }
  return out.str();
}

namespace {

void write_degradation(const std::vector<DegradationRow>& rows, double snr_db,
                       const fs::path& out_dir, ojson j) {
  ensure_dir(out_dir);
  static const char* names[] = {"bleu1", "bleu2", "bleu3", "bleu4", "cider_d", "wer"};
  j["snr_db"] = snr_db;
  j["rows"] = ojson::array();
  std::string csv = "model,metric,awgn,fading,degradation_percent\n";
  for (const auto& r : rows) {
    ojson row;
    row["model"] = r.label;
    for (size_t k = 0; k < 6; ++k) {
      row[names[k]] = {{"awgn", r.awgn[k]}, {"fading", r.fading[k]}, {"degradation_percent", r.percent[k]}};
      csv += r.label + "," + names[k] + "," + format_double(r.awgn[k]) + "," + format_double(r.fading[k]) +
             "," + format_double(r.percent[k]) + "\n";
    }
    j["rows"].push_back(row);
  }
  write_text(out_dir / "degradation.json", j.dump(2) + "\n");
  write_text(out_dir / "degradation.csv", csv);
  write_text(out_dir / "degradation.txt", format_degradation_table(rows, snr_db));
}

}  // namespace

std::vector<DegradationRow> run_degradation(const ExperimentConfig& cfg, const std::vector<ModelRef>& refs,
                                            double snr_db, const fs::path& out_dir, const LogSink& log) {
  const DataBundle b = load_data(cfg);
  auto models = load_models(refs, cfg, b.data.vocab);
  std::vector<DegradationRow> rows;
  for (auto& m : models) {
    EvalSettings a{ChannelKind::Awgn, snr_db, cfg.eval_passes, cfg.eval_seed};
    EvalSettings f{ChannelKind::PhaseInvariantFading, snr_db, cfg.eval_passes, cfg.eval_seed};
    const auto ra = evaluate_model(m.model, b.data.test, b.test_idf, eval_options(cfg, a)).report;
    const auto rf = evaluate_model(m.model, b.data.test, b.test_idf, eval_options(cfg, f)).report;
    rows.push_back(degradation_row(m.label, ra, rf));
    emit(log, ojson{{"event", "degradation"}, {"model", m.label},
                    {"cider_d_percent", rows.back().percent[4]}});
  }
  write_degradation(rows, snr_db, out_dir, meta(cfg, {cfg.eval_seed}));
  return rows;
}

std::vector<DegradationRow> degradation_from_reports(const fs::path& awgn_report,
                                                     const fs::path& fading_report) {
  ojson a, f;
  try {
    a = ojson::parse(read_text(awgn_report));
    f = ojson::parse(read_text(fading_report));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, std::string("cannot parse report: ") + e.what());
  }
  try {
    if (a.at("channel") != "awgn" || f.at("channel") != "fading")
      fail(ErrorCode::Contract, "degradation needs an awgn report and a fading report");
    if (a.at("snr_db").get<double>() != f.at("snr_db").get<double>())
      fail(ErrorCode::Contract, "degradation: reports were evaluated at different SNRs");
    if (a.at("config_hash") != f.at("config_hash"))
      fail(ErrorCode::Contract, "degradation: reports come from different configs");
    std::vector<DegradationRow> rows;
    for (const auto& ma : a.at("models")) {
      const auto label = ma.at("label").get<std::string>();
      const ojson* mf = nullptr;
      for (const auto& m : f.at("models"))
        if (m.at("label") == label) mf = &m;
      if (!mf) fail(ErrorCode::Contract, "degradation: fading report lacks model '" + label + "'");
      rows.push_back(degradation_row(label, metrics_from_json(ma.at("metrics")),
                                     metrics_from_json(mf->at("metrics"))));
    }
    return rows;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, std::string("malformed report: ") + e.what());
  }
}

void write_degradation_reports(const fs::path& awgn_report, const fs::path& fading_report,
                               const fs::path& out_dir) {
  const auto rows = degradation_from_reports(awgn_report, fading_report);
  const auto a = ojson::parse(read_text(awgn_report));
  ojson j;
  j["code_version"] = kCodeVersion;
  j["config_hash"] = a.at("config_hash");
  j["seeds"] = a.at("seeds");
  write_degradation(rows, a.at("snr_db").get<double>(), out_dir, j);
}

ImageDemoSummary run_image_demo(const ExperimentConfig& cfg, uint64_t seed, const fs::path& out_dir,
                                const LogSink& log) {
  const ImageSettings& im = cfg.image;
  std::vector<ImageGrid> train, test;
  if (!im.input_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(im.input_dir))
      if (e.path().extension() == ".pgm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorCode::Input, "no .pgm files in " + im.input_dir);
    for (const auto& p : files) {
      ImageGrid g = read_pgm(p);
      if (g.height != im.dims.height || g.width != im.dims.width)
        fail(ErrorCode::Input, p.string() + " is " + std::to_string(g.height) + "x" +
                                   std::to_string(g.width) + ", config expects " +
                                   std::to_string(im.dims.height) + "x" + std::to_string(im.dims.width));
      train.push_back(g);
    }
    test = train;
  } else {
    train = synthetic_stroke_images(im.train_images, im.dims.height, im.dims.width, im.image_seed);
    test = synthetic_stroke_images(im.test_images, im.dims.height, im.dims.width,
                                   Rng(im.image_seed).fork(1).next_u64());
  }
  ensure_dir(out_dir);
  PixelModel model = PixelModel::create(im.dims, model_init_seed(seed));
  const uint64_t eval_seed = Rng(seed).fork(0xE7A1).next_u64();
  const auto before = evaluate_pixel_model(model, test, im.test_channel, im.train.snr_db, eval_seed,
                                           im.train.gamma);
  std::string train_log;
  train_pixel_model(im.train, model, train, seed, [&](const PixelEpochRecord& r) {
    ojson j{{"epoch", r.epoch}, {"stage", r.stage}, {"lr", r.lr}};
    j[r.stage == "rl" ? "mean_reward" : "mean_ce_loss"] = r.value;
    train_log += j.dump() + "\n";
    emit(log, j);
  });
  const auto after = evaluate_pixel_model(model, test, im.test_channel, im.train.snr_db, eval_seed,
                                          im.train.gamma);
  std::string episodes;
  for (const auto* res : {&before, &after})
    for (size_t t = 0; t <= kEpisodeSteps; ++t) {
      ojson j{{"policy", res == &before ? "untrained" : "trained"},
              {"step", t},
              {"mse", res->step_mse[t]},
              {"mean_reward", t == 0 ? 0.0 : res->step_mean_reward[t - 1]}};
      episodes += j.dump() + "\n";
    }
  write_text(out_dir / "episodes.jsonl", episodes);
  write_text(out_dir / "image_log.jsonl", train_log);
  for (size_t k = 0; k < std::min(im.demo_images, test.size()); ++k) {
    const std::string stem = "image" + std::to_string(k);
    write_pgm(out_dir / (stem + "_target.pgm"), test[k]);
    for (size_t t = 0; t <= kEpisodeSteps; ++t)
      write_pgm(out_dir / (stem + "_step" + std::to_string(t) + ".pgm"), after.episodes[k].canvases[t]);
  }
  ojson r;
  r["code_version"] = kCodeVersion;
  r["config_hash"] = hash_hex(cfg.image_hash());
  r["seeds"] = {seed};
  r["train_channel"] = channel_kind_name(im.train.channel);
  r["test_channel"] = channel_kind_name(im.test_channel);
  r["snr_db"] = im.train.snr_db;
  r["images"] = test.size();
  r["untrained_final_mse"] = before.mean_final_mse;
  r["trained_final_mse"] = after.mean_final_mse;
  r["trained_step_mse"] = after.step_mse;
  r["untrained_step_mse"] = before.step_mse;
  write_text(out_dir / "image_report.json", r.dump(2) + "\n");
  return {before.mean_final_mse, after.mean_final_mse, after.step_mse};
}

std::vector<GoldenCase> load_goldens(const fs::path& path) {
  std::vector<GoldenCase> out;
  std::istringstream in(read_text(path));
  size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = ojson::parse(line);
      GoldenCase c;
      c.candidate = j.at("candidate").get<std::string>();
      c.reference = j.at("reference").get<std::string>();
      for (int k = 0; k < 4; ++k) c.bleu[k] = j.at("bleu" + std::to_string(k + 1)).get<double>();
      c.cider_d = j.at("cider_d").get<double>();
      c.wer = j.at("wer").get<double>();
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) fail(ErrorCode::Input, "golden file " + path.string() + " has no cases");
  return out;
}

double check_goldens(const std::vector<GoldenCase>& cases) {
  std::map<std::string, TokenId> ids;
  auto split = [](const std::string& s) {
    std::vector<std::string> w;
    std::istringstream in(s);
    for (std::string t; in >> t;) w.push_back(t);
    return w;
  };
  for (const auto& c : cases)
    for (const auto* s : {&c.candidate, &c.reference})
      for (const auto& w : split(*s)) ids.emplace(w, 0);
  TokenId next = kNumSpecials;
  for (auto& [w, id] : ids) id = next++;
  auto encode = [&](const std::string& s) {
    std::vector<TokenId> out;
    for (const auto& w : split(s)) out.push_back(ids.at(w));
    return out;
  };
  std::vector<std::vector<TokenId>> refs;
  for (const auto& c : cases) refs.push_back(encode(c.reference));
  const IdfTable idf = IdfTable::build(std::span<const std::vector<TokenId>>(refs));
  double worst = 0.0;
  for (const auto& c : cases) {
    const auto cand = encode(c.candidate), ref = encode(c.reference);
    for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(bleu_n(cand, ref, k + 1).value - c.bleu[k]));
    worst = std::max(worst, std::abs(cider_d(cand, ref, idf).value - c.cider_d));
    worst = std::max(worst, std::abs(word_error_rate(cand, ref).value - c.wer));
  }
  return worst;
}

std::vector<SelfTestCheck> run_selftest(const fs::path& goldens, const LogSink& log) {
  std::vector<SelfTestCheck> checks;
  auto run = [&](const std::string& name, const std::function<std::string()>& body) {
    SelfTestCheck c{name, false, {}};
    try {
      c.detail = body();
      c.passed = true;
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    emit(log, ojson{{"event", "selftest"}, {"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    checks.push_back(std::move(c));
  };
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::Internal, what);
  };
  char buf[160];

  run("metric-oracle", [&] {
    const auto seqs = oracle::all_sequences({4, 5, 6}, 3);
    const IdfTable idf = IdfTable::build(std::span<const std::vector<TokenId>>(seqs));
    const oracle::DocumentFrequency df(seqs);
    double worst = 0.0;
    for (const auto& c : seqs)
      for (const auto& r : seqs) {
        for (int k = 1; k <= 4; ++k)
          worst = std::max(worst, std::abs(bleu_n(c, r, k).value - oracle::bleu(c, r, k)));
        worst = std::max(worst, std::abs(cider_d(c, r, idf).value - oracle::cider_d(c, r, df)));
        worst = std::max(worst, std::abs(word_error_rate(c, r).value - oracle::wer(c, r)));
      }
    std::snprintf(buf, sizeof buf, "%zu pairs, max abs error %.3g", seqs.size() * seqs.size(), worst);
    require(worst <= 1e-12, buf);
    return std::string(buf);
  });

  if (!goldens.empty())
    run("metric-goldens", [&] {
      const auto cases = load_goldens(goldens);
      const double worst = check_goldens(cases);
      std::snprintf(buf, sizeof buf, "%zu cases, max abs error %.3g", cases.size(), worst);
      require(worst <= 1e-9, buf);
      return std::string(buf);
    });

  run("gradient-check", [&] {
    Seq2Seq model = Seq2Seq::create({7, 4, 5, 3}, 11);
    Corpus corpus;
    corpus.sentences = {{{4, 5, 6, kEos}}, {{6, 4, kEos}}};
    const std::vector<size_t> idx{0, 1};
    const Batch batch = make_batch(corpus, idx);
    auto loss = [&](Tape& tape) {
      Rng rng(5);
      Var y = transmit_batch(tape, model, batch, ChannelKind::Awgn, 10.0, rng);
      return ce_loss(tape, model, y, batch);
    };
    const auto probes = random_probes(model.params(), 60, 3);
    const auto rep = finite_difference_check(loss, model.params(), probes);
    std::snprintf(buf, sizeof buf, "%zu probes, max relative error %.3g", probes.size(), rep.max_rel_error);
    require(rep.passed, buf);
    return std::string(buf);
  });

  run("estimator-unbiased", [&] {
    Seq2Seq model = Seq2Seq::create({5, 3, 3, 2}, 17);
    const std::vector<double> received{0.8, -1.1};
    const auto exact = exact_policy_gradient(
        model, received, [](const std::vector<TokenId>& a) { return 1.0 + static_cast<double>(a.size()) +
                                                                        (a.empty() ? 0.0 : a[0] == kUnk); },
        2);
    const auto expected = oracle::expected_self_critic_gradient(exact, 3);
    double worst = 0.0;
    for (size_t d = 0; d < expected.size(); ++d) worst = std::max(worst, std::abs(expected[d] - exact.grad_j[d]));
    std::snprintf(buf, sizeof buf, "%zu trajectories, max abs error %.3g", exact.trajectories.size(), worst);
    require(worst < 1e-10, buf);
    return std::string(buf);
  });

  run("channel-snr", [&] {
    Rng rng(99);
    std::vector<double> x(100000, 1.0);
    const auto y = awgn(x, 10.0, rng);
    double noise = 0.0;
    for (size_t i = 0; i < x.size(); ++i) noise += (y[i] - x[i]) * (y[i] - x[i]);
    const double snr = 10.0 * std::log10(static_cast<double>(x.size()) / noise);
    std::snprintf(buf, sizeof buf, "empirical SNR %.3f dB at 10 dB", snr);
    require(std::abs(snr - 10.0) <= 0.2, buf);
    return std::string(buf);
  });

  run("pixel-telescoping", [&] {
    Rng rng(7);
    for (int e = 0; e < 1000; ++e) {
      ImageGrid target{4, 4, std::vector<int>(16)};
      for (auto& l : target.levels) l = static_cast<int>(rng.index(kPixelLevels));
      const auto ep = run_episode(target, [&](const ImageGrid& c, size_t) {
        std::vector<PixelAction> a(c.size());
        for (auto& v : a) v = static_cast<PixelAction>(rng.index(kPixelActions));
        return a;
      });
      for (size_t i = 0; i < target.size(); ++i) {
        int sum = 0;
        for (const auto& step : ep.reward_hundredths) sum += step[i];
        const int d0 = target.levels[i] - ep.canvases.front().levels[i];
        const int d5 = target.levels[i] - ep.canvases.back().levels[i];
        require(sum == d0 * d0 - d5 * d5, "telescoping identity violated");
      }
    }
    return std::string("1000 random episodes");
  });

  run("degradation-format", [&] {
    const auto rl = format_percent(percent_degradation(0.876, 0.744));
    const auto ce = format_percent(percent_degradation(0.883, 0.748));
    require(rl == "15.1%" && ce == "15.3%", "got " + rl + " and " + ce);
    return rl + " / " + ce;
  });
  return checks;
}

}  // namespace semrl
