/*
 * Copyright 2026 The mvfusion Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// mvfusion command line: synth, train, compare, report.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "mvfusion/checkpoint.hpp"
#include "mvfusion/compare.hpp"
#include "mvfusion/datamodel.hpp"
#include "mvfusion/io.hpp"
#include "mvfusion/report.hpp"
#include "mvfusion/training.hpp"

namespace mvfusion::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

namespace fs = std::filesystem;

inline const char* kDefaultViews =
    "optical:11:0.8,radar:2:0.5,weather:2:0.3,ndvi:1:0.6,dem:2:0.0:static";

// name:channels:informativeness[:static], comma separated.
inline std::vector<SynthViewConfig> parse_view_list(const std::string& text, double noise) {
  std::vector<SynthViewConfig> out;
  std::stringstream list(text);
  std::string item;
  while (std::getline(list, item, ',')) {
    std::vector<std::string> parts;
    std::stringstream fields(item);
    std::string f;
    while (std::getline(fields, f, ':')) parts.push_back(f);
    if (parts.size() < 3 || parts.size() > 4 || (parts.size() == 4 && parts[3] != "static"))
      throw ConfigError("bad view '" + item + "', expected name:channels:informativeness[:static]");
    SynthViewConfig v;
    v.name = parts[0];
    try {
      std::size_t used = 0;
      const long ch = std::stol(parts[1], &used);
      if (used != parts[1].size() || ch < 1) throw std::invalid_argument("channels");
      v.channels = static_cast<std::size_t>(ch);
      v.informativeness = std::stod(parts[2], &used);
      if (used != parts[2].size()) throw std::invalid_argument("informativeness");
    } catch (const std::logic_error&) {
      throw ConfigError("bad numbers in view '" + item + "'");
    }
    v.is_static = parts.size() == 4;
    v.noise_scale = noise;
    out.push_back(std::move(v));
  }
  if (out.empty()) throw ConfigError("empty view list");
  return out;
}

inline fs::path manifest_path(const std::string& data) {
  fs::path p(data);
  if (fs::is_directory(p)) p /= "manifest.json";
  return p;
}

struct Options {
  // synth
  std::size_t samples = 2000;
  std::size_t timesteps = 12;
  std::string views = kDefaultViews;
  double positive_fraction = 0.5;
  double noise = 1.0;
  double test_fraction = 0.3;
  // train / compare
  std::string data;
  std::vector<std::string> methods;
  std::string merge, gate;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  TrainConfig train;
  double aux_weight = 0.3;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  double dropout = 0.2;
  bool no_standardize = false;
  bool no_checkpoints = false;
  bool quiet = false;
  // report
  std::string results;
  std::string out;
};

inline void add_training_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data, "dataset manifest or directory")->required();
  cmd->add_option("--runs", o.runs, "repetitions with seeds seed..seed+runs-1");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--batch-size", o.train.batch_size);
  cmd->add_option("--max-epochs", o.train.max_epochs);
  cmd->add_option("--patience", o.train.patience);
  cmd->add_option("--min-delta", o.train.min_delta);
  cmd->add_option("--lr", o.train.learning_rate);
  cmd->add_option("--aux-weight", o.aux_weight, "multiloss auxiliary weight");
  cmd->add_option("--threshold", o.train.threshold);
  cmd->add_option("--hidden", o.hidden, "GRU and head hidden units");
  cmd->add_option("--layers", o.layers, "GRU layers");
  cmd->add_option("--dropout", o.dropout);
  cmd->add_flag("--no-standardize", o.no_standardize, "use raw values");
  cmd->add_flag("--no-checkpoints", o.no_checkpoints);
  cmd->add_option("--out", o.out, "output directory")->required();
  cmd->add_flag("--quiet", o.quiet);
}

inline FusionModelConfig base_model_config(const Options& o, const MultiViewDataset& d) {
  FusionModelConfig c;
  c.views = d.view_specs();
  c.timesteps = d.timesteps();
  c.aux_weight = o.aux_weight;
  c.encoder.hidden_units = o.hidden;
  c.encoder.num_layers = o.layers;
  c.head.hidden_units = o.hidden;
  c.regularization.dropout_rate = o.dropout;
  return c;
}

inline MultiViewDataset prepare_data(const Options& o) {
  MultiViewDataset d = load_dataset(manifest_path(o.data));
  if (o.no_standardize) return d;
  return standardize(d).first;
}

inline nlohmann::json train_config_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},   {"max_epochs", t.max_epochs},
          {"patience", t.patience},       {"min_delta", t.min_delta},
          {"lr", t.learning_rate},        {"beta1", t.beta1},
          {"beta2", t.beta2},             {"epsilon", t.epsilon},
          {"runs", t.runs},               {"seed", t.base_seed},
          {"val_fraction", t.val_fraction}, {"threshold", t.threshold}};
}

inline void write_outputs(const fs::path& out, const std::vector<TrainRunResult>& results) {
  io::atomic_write(out / "results.jsonl", to_jsonl(results));
  const Report rep = build_report(results);
  io::atomic_write(out / "report.md", render_markdown(rep));
  io::atomic_write(out / "report.csv", render_csv(rep));
}

inline ExperimentHooks make_hooks(const Options& o, const fs::path& out, std::ostream& err) {
  ExperimentHooks hooks;
  if (!o.quiet) hooks.log = [&err](std::string_view m) { err << m << "\n"; };
  if (!o.no_checkpoints) {
    hooks.on_model = [out](std::size_t run, const TrainedModel<float>& m) {
      std::string section = m.result.section;
      for (char& c : section)
        if (c == ':') c = '-';
      save_checkpoint(m.model, out / "checkpoints" / section / ("run" + std::to_string(run)));
    };
    hooks.on_ensemble = [hooks](std::size_t run, const EnsembleRun<float>& e) {
      for (const auto& m : e.members) hooks.on_model(run, m);
    };
  }
  return hooks;
}

inline int cmd_synth(const Options& o, std::ostream& out) {
  SynthConfig sc;
  sc.num_samples = o.samples;
  sc.timesteps = o.timesteps;
  sc.views = parse_view_list(o.views, o.noise);
  sc.positive_fraction = o.positive_fraction;
  sc.test_fraction = o.test_fraction;
  sc.seed = o.seed;
  sc.validate();
  const MultiViewDataset d = synth_generate(sc);
  const fs::path manifest = write_dataset(d, o.out);
  std::size_t pos = 0;
  for (auto y : d.labels()) pos += y;
  out << "wrote " << manifest.string() << "\n"
      << "samples " << d.num_samples() << ", positives " << pos << " ("
      << format_fixed(100.0 * double(pos) / double(d.num_samples()), 1) << "%)\n";
  for (const auto& v : d.view_specs())
    out << "  view " << v.name << ": " << v.channels << " channels"
        << (v.is_static ? ", static" : "") << "\n";
  return kOk;
}

inline int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.methods.size() != 1) throw ConfigError("train takes exactly one --method");
  const Method method = parse_method(o.methods[0]);
  if (!o.merge.empty() && method != Method::kFeatureS)
    throw ConfigError("--merge applies only to --method feature-s");
  if (!o.gate.empty() && method != Method::kFeatureG)
    throw ConfigError("--gate applies only to --method feature-g");
  const MultiViewDataset d = prepare_data(o);
  FusionModelConfig cfg = base_model_config(o, d);
  cfg.method = method;
  if (method == Method::kFeatureS) cfg.merge = parse_merge(o.merge.empty() ? "average" : o.merge);
  if (method == Method::kFeatureG) cfg.gate = parse_gate(o.gate.empty() ? "gatedf-a" : o.gate);
  cfg.seed = o.seed;
  if (method != Method::kEnsemble) cfg.validate();
  TrainConfig tc = o.train;
  tc.runs = o.runs;
  tc.base_seed = o.seed;
  tc.validate();

  const fs::path dir(o.out);
  io::atomic_write(dir / "config.json",
                   nlohmann::json{{"command", "train"},
                                  {"data", manifest_path(o.data).string()},
                                  {"standardize", !o.no_standardize},
                                  {"model", config_to_json(cfg)},
                                  {"train", train_config_json(tc)}}
                           .dump(2) +
                       "\n");
  const auto results = run_experiment(cfg, tc, d, tc.runs, make_hooks(o, dir, err));
  write_outputs(dir, results);
  std::size_t ok = 0;
  for (const auto& r : results) ok += r.ok;
  out << ok << "/" << results.size() << " runs succeeded; results in "
      << (dir / "results.jsonl").string() << "\n";
  return kOk;
}

inline int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  const MultiViewDataset d = prepare_data(o);
  CompareConfig cc;
  cc.base = base_model_config(o, d);
  if (!o.merge.empty()) cc.merge = parse_merge(o.merge);
  if (!o.gate.empty()) cc.gate = parse_gate(o.gate);
  if (!o.methods.empty()) {
    cc.methods.clear();
    for (const auto& m : o.methods) cc.methods.push_back(parse_method(m));
  }
  TrainConfig tc = o.train;
  tc.runs = o.runs;
  tc.base_seed = o.seed;
  tc.validate();

  const fs::path dir(o.out);
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : cc.methods) methods.push_back(std::string(to_string(m)));
  io::atomic_write(dir / "config.json",
                   nlohmann::json{{"command", "compare"},
                                  {"data", manifest_path(o.data).string()},
                                  {"standardize", !o.no_standardize},
                                  {"methods", methods},
                                  {"merge", std::string(to_string(cc.merge))},
                                  {"gate", std::string(to_string(cc.gate))},
                                  {"model", config_to_json(cc.base)},
                                  {"train", train_config_json(tc)}}
                           .dump(2) +
                       "\n");
  const auto results = run_comparison(cc, tc, d, make_hooks(o, dir, err));
  write_outputs(dir, results);
  out << render_markdown(build_report(results));
  return kOk;
}

inline int cmd_report(const Options& o, std::ostream& out) {
  fs::path in(o.results);
  if (fs::is_directory(in)) in /= "results.jsonl";
  const auto results = parse_jsonl(io::read_file(in));
  if (results.empty()) throw SchemaError("no results in " + in.string());
  const Report rep = build_report(results);
  const std::string md = render_markdown(rep);
  if (!o.out.empty()) {
    io::atomic_write(fs::path(o.out) / "report.md", md);
    io::atomic_write(fs::path(o.out) / "report.csv", render_csv(rep));
  }
  out << md;
  return kOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Multi-view fusion experiments", "mvfusion"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-view dataset");
  synth->add_option("--samples", o.samples);
  synth->add_option("--timesteps", o.timesteps);
  synth->add_option("--views", o.views, "name:channels:informativeness[:static],...");
  synth->add_option("--positive-fraction", o.positive_fraction);
  synth->add_option("--noise", o.noise, "noise scale for every view");
  synth->add_option("--test-fraction", o.test_fraction);
  synth->add_option("--seed", o.seed);
  synth->add_option("--out", o.out, "dataset directory")->required();

  auto* train = app.add_subcommand("train", "train one method for several runs");
  train->add_option("--method", o.methods, "input|feature-s|feature-g|decision|multiloss|ensemble")
      ->required()
      ->expected(1);
  train->add_option("--merge", o.merge, "average|maximum|product|concatenate");
  train->add_option("--gate", o.gate, "gated-c|gated-a|gatedf-a");
  add_training_flags(train, o);

  auto* compare = app.add_subcommand("compare", "compare all methods and single views");
  compare->add_option("--method", o.methods, "restrict to these methods")->delimiter(',');
  compare->add_option("--merge", o.merge, "feature-s merge (default average)");
  compare->add_option("--gate", o.gate, "feature-g gate (default gatedf-a)");
  add_training_flags(compare, o);

  auto* report = app.add_subcommand("report", "tables from a results file");
  report->add_option("results", o.results, "results.jsonl or its directory")->required();
  report->add_option("--out", o.out, "write report.md and report.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  try {
    if (*synth) return cmd_synth(o, out);
    if (*train) return cmd_train(o, out, err);
    if (*compare) return cmd_compare(o, out, err);
    return cmd_report(o, out);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace mvfusion::cli
