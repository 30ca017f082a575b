/*
 * Copyright 2026 The TSCAN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// tscan command-line entry point: synth, prepare, train, eval, baseline,
// ablate, explain and compare. Logs go to stderr; data goes to files, except
// that eval also prints its result JSON on stdout.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tscan/tscan.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> g_args;

// Relative paths resolve against TSCAN_DATA_DIR when it is set.
fs::path resolve(const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("TSCAN_DATA_DIR"); root && *root) return fs::path(root) / path;
  return path;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return json::parse(in);
}

tscan::RunManifest manifest(const std::string& command, json config, std::uint64_t seed) {
  return {command, g_args, std::move(config), seed, {}};
}

std::string ablation_name(tscan::Fusion f) {
  switch (f) {
    case tscan::Fusion::kTemporalOnly: return "temporal";
    case tscan::Fusion::kSpatialOnly: return "spatial";
    default: return tscan::to_string(f);
  }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 0;
  std::size_t patients = 200;
  std::string out;
  std::string dict;
  bool force = false;
};

void cmd_synth(const SynthArgs& a) {
  const auto dict = a.dict.empty() ? tscan::default_dictionary() : tscan::VariableDictionary::load(resolve(a.dict));
  tscan::StagedDir dir(resolve(a.out), a.force);
  tscan::write_cohort(dir.path(), tscan::synth_cohort(a.seed, a.patients, dict));
  dict.save((dir / "dictionary.json").string());
  auto m = manifest("synth", {{"seed", a.seed}, {"patients", a.patients}, {"dictionary", dict.to_json()}}, a.seed);
  m.outputs = {"stays.csv", "events.csv", "labels.csv", "dictionary.json"};
  m.write(dir.path());
  dir.commit();
  std::cerr << "synth: wrote " << a.patients << " patients to " << resolve(a.out).string() << '\n';
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string task;
  std::string dict;
  std::string in;
  std::string out;
  std::optional<std::size_t> t;
  std::optional<std::size_t> stride;
  bool force = false;
};

void cmd_prepare(const PrepareArgs& a) {
  const auto task = tscan::parse_task(a.task);
  const auto defaults = tscan::task_defaults(task);
  const std::size_t t = a.t.value_or(defaults.t);
  const std::size_t stride = a.stride.value_or(defaults.stride);
  const fs::path in = resolve(a.in);
  const auto dict = a.dict.empty() ? tscan::default_dictionary() : tscan::VariableDictionary::load(resolve(a.dict));

  const auto stays = tscan::read_stays((in / "stays.csv").string());
  const auto events = tscan::read_events((in / "events.csv").string());
  std::vector<tscan::PhenotypeLabels> labels;
  if (fs::exists(in / "labels.csv")) labels = tscan::read_phenotypes((in / "labels.csv").string());
  const auto ds = tscan::prepare_dataset(stays, events, labels, dict, task, t, stride);
  for (const auto& s : ds.stages) {
    if (!s.conserved()) throw std::logic_error("stage " + s.stage + " does not conserve its input");
    std::cerr << "prepare: " << s.stage << " input " << s.input << " kept " << s.kept << " dropped "
              << s.dropped_total() << '\n';
  }

  tscan::StagedDir dir(resolve(a.out), a.force);
  ds.save(dir.path());
  auto m = manifest("prepare",
                    {{"task", tscan::to_string(task)},
                     {"t", t},
                     {"stride", stride},
                     {"input", in.string()},
                     {"dictionary", dict.to_json()}},
                    0);
  m.outputs = {"manifest.json", "samples.csv"};
  for (const auto& ep : ds.episodes) m.outputs.push_back(tscan::episode_detail::episode_file(ep.icustay_id));
  m.write(dir.path());
  dir.commit();
  std::cerr << "prepare: " << ds.samples.size() << " samples from " << ds.episodes.size() << " episodes\n";
}

// ---------------------------------------------------------------------------
// train / ablate shared configuration
// ---------------------------------------------------------------------------

struct ExperimentArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::string> fusion;
  std::optional<std::size_t> n, d_model, heads, d_ff, epochs, batch_size, patience;
  std::optional<double> dropout, lr;
  std::optional<std::string> optimizer, class_weight, checkpoint;
  std::optional<std::uint64_t> seed, split_seed;
  std::size_t jobs = 1;
  bool force = false;
};

void add_experiment_options(CLI::App* cmd, ExperimentArgs& a) {
  cmd->add_option("--config", a.config, "experiment JSON (flags override it)");
  cmd->add_option("--data", a.data, "prepared dataset directory");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--n", a.n, "chunk count");
  cmd->add_option("--d-model", a.d_model, "embedding width");
  cmd->add_option("--heads", a.heads, "attention heads");
  cmd->add_option("--d-ff", a.d_ff, "feed-forward width");
  cmd->add_option("--dropout", a.dropout, "dropout rate");
  cmd->add_option("--epochs", a.epochs, "maximum epochs");
  cmd->add_option("--batch-size", a.batch_size, "mini-batch size");
  cmd->add_option("--lr", a.lr, "learning rate");
  cmd->add_option("--optimizer", a.optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  cmd->add_option("--patience", a.patience, "early-stopping patience in epochs");
  cmd->add_option("--checkpoint", a.checkpoint, "keep the best validation epoch or the last one")
      ->check(CLI::IsMember({"best", "last"}));
  cmd->add_option("--class-weight", a.class_weight, "positive-class weight or 'auto'");
  cmd->add_option("--seed", a.seed, "initialisation, shuffling and dropout seed");
  cmd->add_option("--split-seed", a.split_seed, "patient split seed");
  cmd->add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--force", a.force, "replace a non-empty output directory");
}

tscan::ExperimentSpec resolve_spec(const ExperimentArgs& a, const tscan::PreparedDataset* ds) {
  tscan::ExperimentSpec s;
  if (!a.config.empty()) s = read_json(resolve(a.config)).get<tscan::ExperimentSpec>();
  if (!a.data.empty()) s.data_dir = resolve(a.data).string();
  if (!a.out.empty()) s.output_dir = resolve(a.out).string();
  if (a.fusion) s.model.fusion = tscan::parse_fusion(*a.fusion);
  if (a.n) s.model.n = *a.n;
  if (a.d_model) s.model.layer.d_model = *a.d_model;
  if (a.heads) s.model.layer.n_heads = *a.heads;
  if (a.d_ff) s.model.layer.d_ff = *a.d_ff;
  if (a.dropout) s.model.layer.dropout_rate = *a.dropout;
  if (a.epochs) s.train.epochs = *a.epochs;
  if (a.batch_size) s.train.batch_size = *a.batch_size;
  if (a.lr) s.train.learning_rate = *a.lr;
  if (a.optimizer) s.train.optimizer = *a.optimizer == "sgd" ? tscan::OptimizerKind::kSgd : tscan::OptimizerKind::kAdam;
  if (a.patience) s.train.patience = *a.patience;
  if (a.class_weight) {
    if (*a.class_weight == "auto") s.train.class_weight.reset();
    else s.train.class_weight = std::stod(*a.class_weight);
  }
  if (a.checkpoint) s.train.keep_best = *a.checkpoint == "best";
  if (a.seed) s.train.seed = *a.seed;
  if (a.split_seed) s.split_seed = *a.split_seed;
  s.train.jobs = a.jobs;
  if (ds) {
    s.model.t = ds->t;
    s.model.d = ds->width();
    s.model.task = ds->task;
    s.model.n_classes = tscan::default_classes(ds->task);
  }
  s.validate();
  return s;
}

// Config identity, also written as experiment.json, excludes paths and the worker count, neither of which
// changes the outputs.
json reproducible_config(const tscan::ExperimentSpec& s) {
  json j = s;
  j.erase("data_dir");
  j.erase("output_dir");
  j["train"].erase("jobs");
  return j;
}

struct TrainedRun {
  tscan::TrainResult result;
  tscan::Split split;
};

// Trains one configuration and writes model, log, split and evaluation files
// into `dir`, appending their names (prefixed by `prefix`) to `outputs`.
TrainedRun train_into(const fs::path& dir, const tscan::PreparedDataset& ds, const tscan::ExperimentSpec& spec,
                      const std::string& prefix, std::vector<std::string>& outputs) {
  const auto split = tscan::split_by_patient(ds, spec.split_seed);
  std::cerr << "train: " << tscan::to_string(spec.model.fusion) << " on " << split.train.size() << "/"
            << split.val.size() << "/" << split.test.size() << " train/val/test samples\n";
  TrainedRun run{tscan::train(ds, split, spec.model, spec.train, &std::cerr), split};
  fs::create_directories(dir);
  run.result.model.save((dir / "model").string());
  run.result.log.write_csv((dir / "train_log.csv").string(), false);
  json split_json = tscan::split_subjects(ds, run.split);
  split_json["split_seed"] = spec.split_seed;
  write_json(dir / "split.json", split_json);
  json evals = json::object();
  for (const auto& [name, idx] : {std::pair{"val", &run.split.val}, std::pair{"test", &run.split.test}}) {
    if (idx->empty()) continue;
    const auto probs = tscan::predict_samples(run.result.model, ds, *idx, spec.train.jobs);
    auto r = tscan::evaluate_predictions(ds.task, probs, tscan::labels_of(ds, *idx));
    r.metadata["split"] = name;
    evals[name] = r;
  }
  write_json(dir / "metrics.json", evals);
  for (const char* f : {"model.params", "model.json", "train_log.csv", "split.json", "metrics.json"})
    outputs.push_back(prefix + f);
  return run;
}

void write_timing(const fs::path& p, const tscan::TrainLog& log) {
  tscan::csv::Writer w(p.string());
  w.row({"epoch", "wall_seconds"});
  for (const auto& e : log.epochs) w.row({std::to_string(e.epoch), tscan::csv::num(e.wall_seconds, 6)});
  w.close();
}

void cmd_train(const ExperimentArgs& a) {
  auto spec = resolve_spec(a, nullptr);
  const auto ds = tscan::PreparedDataset::load(spec.data_dir);
  spec = resolve_spec(a, &ds);
  tscan::StagedDir dir(spec.output_dir, a.force);
  std::vector<std::string> outputs;
  const auto run = train_into(dir.path(), ds, spec, "", outputs);
  write_json(dir / "experiment.json", reproducible_config(spec));
  outputs.push_back("experiment.json");
  write_timing(dir / "timing.csv", run.result.log);
  auto m = manifest("train", reproducible_config(spec), spec.train.seed);
  m.outputs = outputs;
  m.write(dir.path());
  dir.commit();
  const auto& log = run.result.log;
  std::cerr << "train: best epoch " << log.best_epoch << " val_" << log.metric << ' ' << log.best_metric() << '\n';
}

void cmd_ablate(const ExperimentArgs& a) {
  auto spec = resolve_spec(a, nullptr);
  const auto ds = tscan::PreparedDataset::load(spec.data_dir);
  spec = resolve_spec(a, &ds);
  tscan::StagedDir dir(spec.output_dir, a.force);
  const auto vm = tscan::validation_metric(ds.task);

  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, TrainedRun>> runs;
  for (tscan::Fusion f : tscan::all_fusions()) {
    auto s = spec;
    s.model.fusion = f;
    const std::string name = ablation_name(f);
    runs.emplace_back(name, train_into(dir / name, ds, s, name + "/", outputs));
  }

  std::set<std::string> test_metrics;
  std::vector<std::map<std::string, double>> test_values;
  for (const auto& [name, run] : runs) {
    std::map<std::string, double> m;
    if (!run.split.test.empty()) {
      const auto probs = tscan::predict_samples(run.result.model, ds, run.split.test, spec.train.jobs);
      m = tscan::task_metrics(ds.task, probs, tscan::labels_of(ds, run.split.test));
    }
    for (const auto& [k, _] : m) test_metrics.insert(k);
    test_values.push_back(std::move(m));
  }
  tscan::csv::Writer w((dir / "ablation.csv").string());
  std::vector<std::string> header{"fusion", "best_epoch", "epochs_run", "val_" + vm.name};
  for (const auto& k : test_metrics) header.push_back("test_" + k);
  w.row(header);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& log = runs[i].second.result.log;
    std::vector<std::string> row{runs[i].first, std::to_string(log.best_epoch), std::to_string(log.epochs.size()),
                                 tscan::csv::num(log.best_metric())};
    for (const auto& k : test_metrics)
      row.push_back(test_values[i].count(k) ? tscan::csv::num(test_values[i].at(k)) : "");
    w.row(row);
  }
  w.close();
  outputs.push_back("ablation.csv");
  write_json(dir / "experiment.json", reproducible_config(spec));
  outputs.push_back("experiment.json");
  auto m = manifest("ablate", reproducible_config(spec), spec.train.seed);
  m.outputs = outputs;
  m.write(dir.path());
  dir.commit();
  for (const auto& [name, run] : runs)
    std::cerr << "ablate: " << name << " val_" << vm.name << ' ' << run.result.log.best_metric() << '\n';
}

// ---------------------------------------------------------------------------
// eval / explain / baseline
// ---------------------------------------------------------------------------

fs::path model_stem(const fs::path& p) { return fs::is_directory(p) ? p / "model" : p; }

std::vector<std::size_t> select_samples(const tscan::PreparedDataset& ds, const fs::path& model_path,
                                        const std::string& part) {
  if (part == "all") {
    std::vector<std::size_t> all(ds.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  const fs::path split_file = (fs::is_directory(model_path) ? model_path : model_path.parent_path()) / "split.json";
  if (!fs::exists(split_file)) throw std::invalid_argument("no split.json next to the model; use --split all");
  auto idx = tscan::select_part(ds, read_json(split_file), part);
  if (idx.empty()) throw std::invalid_argument("split '" + part + "' selects no samples of this dataset");
  return idx;
}

struct EvalArgs {
  std::string model;
  std::string data;
  std::string split = "test";
  std::size_t bootstrap = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t jobs = 1;
  bool force = false;
};

void cmd_eval(const EvalArgs& a) {
  const fs::path model_path = resolve(a.model);
  const auto model = tscan::TscanModel::load(model_stem(model_path).string());
  const auto ds = tscan::PreparedDataset::load(resolve(a.data));
  tscan::check_dataset_matches(model.config(), ds);
  const auto idx = select_samples(ds, model_path, a.split);
  const auto probs = tscan::predict_samples(model, ds, idx, a.jobs);
  auto r = tscan::evaluate_predictions(ds.task, probs, tscan::labels_of(ds, idx), a.bootstrap, a.seed);
  r.metadata["split"] = a.split;
  r.metadata["fusion"] = tscan::to_string(model.config().fusion);
  const json out = r;
  std::cout << out.dump(2) << std::endl;
  if (a.out.empty()) return;
  tscan::StagedDir dir(resolve(a.out), a.force);
  write_json(dir / "eval.json", out);
  auto m = manifest("eval",
                    {{"model", nlohmann::json(model.config())},
                     {"params_fnv1a", tscan::file_hash(model_stem(model_path).string() + ".params")},
                     {"split", a.split},
                     {"bootstrap", a.bootstrap}},
                    a.seed);
  m.outputs = {"eval.json"};
  m.write(dir.path());
  dir.commit();
}

struct ExplainArgs {
  std::string model;
  std::string data;
  std::string split = "test";
  std::string out;
  bool force = false;
};

void cmd_explain(const ExplainArgs& a) {
  const fs::path model_path = resolve(a.model);
  const auto model = tscan::TscanModel::load(model_stem(model_path).string());
  const auto ds = tscan::PreparedDataset::load(resolve(a.data));
  tscan::check_dataset_matches(model.config(), ds);
  const auto idx = select_samples(ds, model_path, a.split);
  auto report = tscan::attention_report(model, ds, idx);
  report.metadata["split"] = a.split;
  tscan::StagedDir dir(resolve(a.out), a.force);
  report.write(dir.path(), ds.dictionary);
  auto m = manifest("explain",
                    {{"model", nlohmann::json(model.config())},
                     {"params_fnv1a", tscan::file_hash(model_stem(model_path).string() + ".params")},
                     {"split", a.split}},
                    0);
  for (std::size_t j = 0; j < report.temporal.size(); ++j)
    m.outputs.push_back("temporal_chunk_" + std::to_string(j) + ".csv");
  if (!report.indicator.empty()) m.outputs.insert(m.outputs.end(), {"indicators.csv", "variables.csv"});
  m.outputs.push_back("report.json");
  m.write(dir.path());
  dir.commit();
  std::cerr << "explain: " << report.sample_count << " samples, " << report.temporal.size() << " temporal chunks, "
            << report.indicator.size() << " indicator columns\n";
}

struct BaselineArgs {
  std::string data;
  std::string out;
  std::uint64_t split_seed = 0;
  bool force = false;
};

void cmd_baseline(const BaselineArgs& a) {
  const auto ds = tscan::PreparedDataset::load(resolve(a.data));
  const auto split = tscan::split_by_patient(ds, a.split_seed);
  json evals = json::object();
  for (const auto& [name, idx] : {std::pair{"val", &split.val}, std::pair{"test", &split.test}}) {
    if (idx->empty()) continue;
    auto r = tscan::logistic_baseline(ds, split.train, *idx).eval;
    r.metadata["split"] = name;
    r.metadata["model"] = "logistic regression on per-variable summary features";
    evals[name] = r;
  }
  tscan::StagedDir dir(resolve(a.out), a.force);
  write_json(dir / "metrics.json", evals);
  json split_json = tscan::split_subjects(ds, split);
  split_json["split_seed"] = a.split_seed;
  write_json(dir / "split.json", split_json);
  auto m = manifest("baseline", {{"split_seed", a.split_seed}, {"task", tscan::to_string(ds.task)}}, a.split_seed);
  m.outputs = {"metrics.json", "split.json"};
  m.write(dir.path());
  dir.commit();
  if (evals.contains("val")) std::cerr << "baseline: val " << evals["val"]["metrics"].dump() << '\n';
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> runs;
  std::string split = "test";
  std::string out;
  bool force = false;
};

// Accepts eval.json files, metrics.json files holding {split: EvalResult}, or
// directories containing either.
tscan::EvalResult load_run(const fs::path& p, const std::string& split) {
  fs::path file = p;
  if (fs::is_directory(p)) file = fs::exists(p / "eval.json") ? p / "eval.json" : p / "metrics.json";
  const json j = read_json(file);
  if (j.contains("metrics")) return j.get<tscan::EvalResult>();
  if (j.contains(split)) return j.at(split).get<tscan::EvalResult>();
  throw std::invalid_argument(file.string() + " has no '" + split + "' evaluation");
}

void cmd_compare(const CompareArgs& a) {
  std::vector<tscan::EvalResult> results;
  std::set<std::string> names;
  for (const auto& r : a.runs) {
    results.push_back(load_run(resolve(r), a.split));
    for (const auto& [k, _] : results.back().values) names.insert(k);
  }
  tscan::StagedDir dir(resolve(a.out), a.force);
  tscan::csv::Writer w((dir / "comparison.csv").string());
  std::vector<std::string> header{"run", "sample_count"};
  for (const auto& k : names) {
    header.push_back(k);
    header.push_back(k + "_ci_lo");
    header.push_back(k + "_ci_hi");
  }
  w.row(header);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    std::vector<std::string> row{a.runs[i], std::to_string(r.sample_count)};
    for (const auto& k : names) {
      row.push_back(r.values.count(k) ? tscan::csv::num(r.values.at(k)) : "");
      const auto ci = r.intervals.find(k);
      row.push_back(ci != r.intervals.end() ? tscan::csv::num(ci->second.lo) : "");
      row.push_back(ci != r.intervals.end() ? tscan::csv::num(ci->second.hi) : "");
    }
    w.row(row);
  }
  w.close();
  auto m = manifest("compare", {{"runs", a.runs}, {"split", a.split}}, 0);
  m.outputs = {"comparison.csv"};
  m.write(dir.path());
  dir.commit();
}

}  // namespace

int main(int argc, char** argv) {
  g_args.assign(argv + 1, argv + argc);
  CLI::App app{"TSCAN clinical time-series toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic cohort with a planted mortality signal");
  c_synth->add_option("--seed", synth.seed, "generator seed");
  c_synth->add_option("--patients", synth.patients, "number of patients")->check(CLI::PositiveNumber);
  c_synth->add_option("--out", synth.out, "output directory")->required();
  c_synth->add_option("--dict", synth.dict, "variable dictionary JSON (default: built-in 24 variables)");
  c_synth->add_flag("--force", synth.force, "replace a non-empty output directory");

  PrepareArgs prep;
  auto* c_prep = app.add_subcommand("prepare", "build task samples from stays and events");
  c_prep->add_option("--task", prep.task, "prediction task")
      ->required()
      ->check(CLI::IsMember({"ihm", "los", "decomp", "pheno"}));
  c_prep->add_option("--dict", prep.dict, "variable dictionary JSON (default: built-in 24 variables)");
  c_prep->add_option("--in", prep.in, "directory with stays.csv, events.csv and optional labels.csv")->required();
  c_prep->add_option("--out", prep.out, "output dataset directory")->required();
  c_prep->add_option("--t", prep.t, "window length in hours")->check(CLI::PositiveNumber);
  c_prep->add_option("--stride", prep.stride, "sampling stride in hours")->check(CLI::PositiveNumber);
  c_prep->add_flag("--force", prep.force, "replace a non-empty output directory");

  ExperimentArgs trn;
  auto* c_train = app.add_subcommand("train", "train a model on a prepared dataset");
  add_experiment_options(c_train, trn);
  c_train->add_option("--fusion", trn.fusion, "fusion strategy");

  ExperimentArgs abl;
  auto* c_abl = app.add_subcommand("ablate", "train all six branch/fusion configurations");
  add_experiment_options(c_abl, abl);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint and print the result JSON");
  c_eval->add_option("--model", ev.model, "train output directory or checkpoint stem")->required();
  c_eval->add_option("--data", ev.data, "prepared dataset directory")->required();
  c_eval->add_option("--split", ev.split, "split part")->check(CLI::IsMember({"train", "val", "test", "all"}));
  c_eval->add_option("--bootstrap", ev.bootstrap, "bootstrap resamples for 95% intervals");
  c_eval->add_option("--seed", ev.seed, "bootstrap seed");
  c_eval->add_option("--out", ev.out, "also write eval.json and a run manifest here");
  c_eval->add_option("--jobs", ev.jobs, "worker threads")->check(CLI::PositiveNumber);
  c_eval->add_flag("--force", ev.force, "replace a non-empty output directory");

  BaselineArgs base;
  auto* c_base = app.add_subcommand("baseline", "fit the logistic summary-feature baseline");
  c_base->add_option("--data", base.data, "prepared dataset directory")->required();
  c_base->add_option("--out", base.out, "output directory")->required();
  c_base->add_option("--split-seed", base.split_seed, "patient split seed");
  c_base->add_flag("--force", base.force, "replace a non-empty output directory");

  ExplainArgs ex;
  auto* c_ex = app.add_subcommand("explain", "write averaged attention weights");
  c_ex->add_option("--model", ex.model, "train output directory or checkpoint stem")->required();
  c_ex->add_option("--data", ex.data, "prepared dataset directory")->required();
  c_ex->add_option("--split", ex.split, "split part")->check(CLI::IsMember({"train", "val", "test", "all"}));
  c_ex->add_option("--out", ex.out, "output directory")->required();
  c_ex->add_flag("--force", ex.force, "replace a non-empty output directory");

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare", "tabulate evaluation results side by side");
  c_cmp->add_option("runs", cmp.runs, "eval.json / metrics.json files or run directories")->required();
  c_cmp->add_option("--split", cmp.split, "part to read from metrics.json files");
  c_cmp->add_option("--out", cmp.out, "output directory")->required();
  c_cmp->add_flag("--force", cmp.force, "replace a non-empty output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_synth->parsed()) cmd_synth(synth);
    else if (c_prep->parsed()) cmd_prepare(prep);
    else if (c_train->parsed()) cmd_train(trn);
    else if (c_abl->parsed()) cmd_ablate(abl);
    else if (c_eval->parsed()) cmd_eval(ev);
    else if (c_base->parsed()) cmd_baseline(base);
    else if (c_ex->parsed()) cmd_explain(ex);
    else if (c_cmp->parsed()) cmd_compare(cmp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
