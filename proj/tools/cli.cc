// Copyright 2026 The LoadVeil Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "loadveil/errors.h"
#include "loadveil/evaluation.h"
#include "loadveil/meterdata.h"
#include "loadveil/pipeline.h"
#include "loadveil/randomized_response.h"
#include "loadveil/sparse_coding.h"

namespace loadveil::cli {
namespace {

// Every knob any subcommand reads. Flags override the config file.
struct RunConfig {
  std::string config_path;

  // synth
  std::vector<std::string> appliances;
  std::size_t batches = 1;
  std::size_t meters = 1;
  std::string truth_path = "truth.csv";

  // shared
  std::size_t t = kDefaultBatchLength;
  long long n = 0;
  std::optional<double> lambda;
  std::optional<double> sigma;
  std::uint64_t seed = 0;

  // train
  std::string train_path;
  int max_iters = 500;
  double tol = 1e-6;
  std::string init_mode = "data_segments";

  // obfuscate
  std::string input_path;
  std::string dict_path;
  std::optional<double> f;
  std::optional<double> delta0;
  unsigned threads = 0;
  std::string out_path;
  std::string sidecar_path;

  // evaluate
  std::string original_path;
  std::string obfuscated_path;
  std::vector<std::string> thresholds;
  int hysteresis = 1;
  std::string report_path = "report.json";
};

std::string Fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// `key = value` lines, `#` comments.
std::map<std::string, std::string> ReadConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::map<std::string, std::string> entries;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string();
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgumentError("config line " + std::to_string(line_no) +
                                 ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    entries[key] = trim(line.substr(eq + 1));
  }
  return entries;
}

std::vector<ApplianceProfile> ParseAppliances(const std::vector<std::string>& specs) {
  if (specs.empty()) return StandardAppliances();
  std::vector<ApplianceProfile> profiles;
  for (const std::string& s : specs) profiles.push_back(ParseApplianceSpec(s));
  return profiles;
}

void CmdSynth(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::vector<ApplianceProfile> profiles = ParseAppliances(cfg.appliances);
  if (cfg.meters == 0) throw InvalidArgumentError("--meters must be positive");
  SyntheticData all;
  for (std::size_t m = 0; m < cfg.meters; ++m) {
    const std::uint64_t seed = cfg.meters == 1 ? cfg.seed : DeriveSeed(cfg.seed, m);
    SyntheticData one = GenerateSynthetic(profiles, cfg.t, cfg.batches, seed,
                                          "meter-" + std::to_string(m));
    std::move(one.batches.begin(), one.batches.end(), std::back_inserter(all.batches));
    std::move(one.truth.begin(), one.truth.end(), std::back_inserter(all.truth));
  }
  const std::string readings = cfg.out_path.empty() ? "readings.csv" : cfg.out_path;
  WriteCsv(all.batches, readings);
  WriteTruthCsv(all, cfg.truth_path);
  out << "wrote " << all.batches.size() << " batches of t=" << cfg.t << " to "
      << readings << " and truth to " << cfg.truth_path << '\n';
  (void)err;
}

std::vector<ReadingBatch> FullBatches(std::vector<ReadingBatch> batches, std::size_t t,
                                      std::ostream& err) {
  std::vector<ReadingBatch> kept;
  for (ReadingBatch& b : batches) {
    if (b.size() == t) {
      kept.push_back(std::move(b));
    } else {
      err << "skipping partial batch of " << b.size() << " readings from "
          << b.meter_id() << '\n';
    }
  }
  return kept;
}

void CmdTrain(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  TrainingConfig tc;
  tc.n = static_cast<Eigen::Index>(cfg.n);
  tc.lambda = cfg.lambda;
  tc.max_outer_iters = cfg.max_iters;
  tc.tol = cfg.tol;
  tc.sigma = cfg.sigma;
  tc.seed = cfg.seed;
  if (cfg.init_mode == "data_segments") {
    tc.init_mode = InitMode::kDataSegments;
  } else if (cfg.init_mode == "random") {
    tc.init_mode = InitMode::kRandom;
  } else {
    throw InvalidArgumentError("--init must be data_segments or random");
  }
  if (tc.n <= static_cast<Eigen::Index>(cfg.t)) {
    throw InvalidArgumentError("n=" + std::to_string(cfg.n) + " must exceed t=" +
                               std::to_string(cfg.t) +
                               " (training needs an over-complete dictionary)");
  }
  const std::vector<ReadingBatch> batches =
      FullBatches(LoadCsv(cfg.train_path, cfg.t), cfg.t, err);
  if (batches.empty()) {
    throw InvalidArgumentError("no full batches of t=" + std::to_string(cfg.t) + " in " +
                               cfg.train_path);
  }
  const TrainingResult result = TrainDictionary(batches, tc);
  result.dictionary.Save(cfg.dict_path);
  err << "final objective " << Fmt(result.objectives.back()) << " after "
      << result.iterations << " iterations ("
      << (result.converged ? "converged" : "iteration limit") << "), lambda "
      << Fmt(result.lambda) << '\n';
  if (cfg.sigma) {
    err << result.sigma_violations << " batches exceed sigma " << Fmt(*cfg.sigma) << '\n';
  }
  out << "wrote dictionary t=" << result.dictionary.t() << " n=" << result.dictionary.n()
      << " to " << cfg.dict_path << '\n';
}

void CmdObfuscate(const RunConfig& cfg, bool t_given, std::ostream& out,
                  std::ostream& err) {
  const Dictionary dict = Dictionary::Load(cfg.dict_path);
  if (t_given && static_cast<Eigen::Index>(cfg.t) != dict.t()) {
    throw DimensionMismatchError("data batch length t=" + std::to_string(cfg.t) +
                                 " does not match dictionary t=" +
                                 std::to_string(dict.t()));
  }
  PrivacyParams params;
  params.f = *cfg.f;
  params.delta0 = cfg.delta0;
  params.seed = cfg.seed;
  params.Validate();

  const std::vector<ReadingBatch> batches =
      LoadCsv(cfg.input_path, static_cast<std::size_t>(dict.t()));
  ObfuscationOptions options;
  options.lambda = cfg.lambda;
  options.sigma = cfg.sigma;
  options.threads = cfg.threads;
  const std::vector<ObfuscationResult> results =
      ProcessStream(batches, dict, params, options);

  std::vector<ReadingBatch> obfuscated;
  obfuscated.reserve(results.size());
  std::vector<double> paper_eps;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const ObfuscationResult& r = results[i];
    obfuscated.push_back(r.obfuscated);
    if (r.epsilon_paper) paper_eps.push_back(*r.epsilon_paper);
    out << "batch " << i << " " << r.original.meter_id() << " "
        << FormatIso8601Utc(r.original.start_time()) << " epsilon_paper="
        << (r.epsilon_paper ? Fmt(*r.epsilon_paper) : std::string("undefined"))
        << " epsilon_mechanism=" << Fmt(r.epsilon_mechanism)
        << " reconstruction_error=" << Fmt(r.reconstruction_error) << '\n';
    for (const std::string& w : r.warnings) err << "batch " << i << ": " << w << '\n';
  }
  if (!results.empty()) {
    const double mech = results.front().epsilon_mechanism;
    out << "max over batches: epsilon_paper="
        << (paper_eps.empty() ? std::string("undefined") : Fmt(ComposeParallel(paper_eps)))
        << " epsilon_mechanism=" << Fmt(mech) << '\n';
    out << "note: the max is parallel composition, which assumes disjoint data; "
           "batches of one consumer are not disjoint\n";
  }
  const std::string out_path = cfg.out_path.empty() ? "obfuscated.csv" : cfg.out_path;
  WriteCsv(obfuscated, out_path);
  if (!cfg.sidecar_path.empty()) WriteSidecar(results, params, cfg.sidecar_path);
}

PrivacySummary SummaryFromSidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sidecar " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "sidecar " + path + ": " + e.what());
  }
  PrivacySummary s;
  if (!doc.is_array()) throw ParseError(0, "sidecar must be a JSON array");
  const double inf = std::numeric_limits<double>::infinity();
  for (const auto& entry : doc) {
    s.f = entry.value("f", 0.0);
    const std::string paper_status = entry.value("epsilon_paper_status", "ok");
    const std::string mech_status = entry.value("epsilon_mechanism_status", "ok");
    std::optional<double> paper;
    if (paper_status == "unbounded") paper = inf;
    else if (entry.contains("epsilon_paper") && entry["epsilon_paper"].is_number())
      paper = entry["epsilon_paper"].get<double>();
    if (paper && (!s.epsilon_paper || *paper > *s.epsilon_paper)) {
      s.epsilon_paper = paper;
      s.delta0 = entry.value("delta0", 0.0);
    }
    std::optional<double> mech;
    if (mech_status == "unbounded") mech = inf;
    else if (entry.contains("epsilon_mechanism") && entry["epsilon_mechanism"].is_number())
      mech = entry["epsilon_mechanism"].get<double>();
    if (mech && (!s.epsilon_mechanism || *mech > *s.epsilon_mechanism)) {
      s.epsilon_mechanism = mech;
    }
  }
  return s;
}

void CmdEvaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::vector<ApplianceProfile> profiles = ParseAppliances(cfg.appliances);
  AttackConfig attack;
  attack.hysteresis_slots = cfg.hysteresis;
  if (cfg.hysteresis < 1) throw InvalidArgumentError("--hysteresis must be >= 1");
  for (const std::string& spec : cfg.thresholds) {
    const auto eq = spec.find('=');
    const std::optional<double> watts =
        eq == std::string::npos ? std::nullopt : ParseDouble(spec.substr(eq + 1));
    if (!watts || !(*watts > 0.0)) {
      throw InvalidArgumentError("--threshold expects name=watts with watts > 0, got '" +
                                 spec + "'");
    }
    attack.thresholds[spec.substr(0, eq)] = *watts;
  }

  const std::vector<ReadingBatch> original = LoadCsv(cfg.original_path, cfg.t);
  const std::vector<ReadingBatch> obfuscated = LoadCsv(cfg.obfuscated_path, cfg.t);
  if (original.size() != obfuscated.size()) {
    throw DimensionMismatchError("original has " + std::to_string(original.size()) +
                                 " batches but obfuscated has " +
                                 std::to_string(obfuscated.size()));
  }
  const TruthTable table = LoadTruthCsv(cfg.truth_path);
  const auto truth = SplitTruth(table, original);

  PrivacySummary privacy;
  if (!cfg.sidecar_path.empty()) privacy = SummaryFromSidecar(cfg.sidecar_path);
  if (cfg.f) privacy.f = *cfg.f;

  const EvalReport report =
      CompareReport(original, truth, obfuscated, profiles, privacy, attack);
  std::ofstream report_out(cfg.report_path, std::ios::binary | std::ios::trunc);
  if (!report_out) throw IoError("cannot open " + cfg.report_path + " for writing");
  report_out << ReportJson(report);
  report_out.flush();
  if (!report_out) throw IoError("write failure on " + cfg.report_path);

  out << "appliance          F1 original  F1 obfuscated\n";
  for (const ApplianceScores& a : report.appliances) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-18s %11.4f  %13.4f\n", a.name.c_str(),
                  a.original.f1, a.obfuscated.f1);
    out << line;
  }
  out << "mae_watts " << Fmt(report.utility.mae_watts) << "\n";
  (void)err;
}

void CmdEpsilon(const RunConfig& cfg, bool n_given, std::ostream& out) {
  const double f = *cfg.f;
  if (f == 0.0) {
    throw UnboundedPrivacyError("f = 0 performs no randomization; epsilon is unbounded");
  }
  if (!(f > 0.0 && f < 1.0)) {
    throw InvalidArgumentError("f must lie in (0, 1), got " + Fmt(f));
  }
  if (!cfg.delta0 && !n_given) {
    throw InvalidArgumentError("give --delta0 and/or --n");
  }
  out << "f        " << Fmt(f) << '\n';
  if (cfg.delta0) {
    const double eps = EpsilonSparsityBound(f, *cfg.delta0);
    out << "delta0   " << Fmt(*cfg.delta0) << '\n';
    out << "epsilon_paper      " << Fmt(eps) << '\n';
  }
  if (n_given) {
    if (cfg.n <= 0) throw InvalidArgumentError("--n must be positive");
    std::vector<double> positions(static_cast<std::size_t>(cfg.n));
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<double>(i);
    const double eps = EpsilonEmpirical(TransitionMatrix::Build(positions, f));
    out << "n        " << cfg.n << '\n';
    out << "epsilon_mechanism  " << Fmt(eps) << '\n';
  }
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"loadveil: differentially private obfuscation of smart-meter load data"};
  app.name(args.empty() ? "loadveil" : args[0]);
  app.require_subcommand(1);

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", cfg.config_path, "key = value file; flags override it");
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic readings and truth");
  add_config(synth);
  synth->add_option("--appliances", cfg.appliances,
                    "name:watts:mean_on:mean_off[:jitter] (default: standard household)")
      ->delimiter(',');
  synth->add_option("--t", cfg.t, "Readings per batch")->required()->check(CLI::Range(2, 1 << 30));
  synth->add_option("--batches", cfg.batches, "Batches per meter")->check(CLI::PositiveNumber);
  synth->add_option("--meters", cfg.meters, "Number of meters");
  synth->add_option("--seed", cfg.seed);
  synth->add_option("--out", cfg.out_path, "Readings CSV (default readings.csv)");
  synth->add_option("--truth", cfg.truth_path, "Truth CSV");

  CLI::App* train = app.add_subcommand("train", "Learn a dictionary");
  add_config(train);
  train->add_option("--train", cfg.train_path, "Training readings CSV")->required();
  train->add_option("--t", cfg.t, "Readings per batch")->check(CLI::Range(2, 1 << 30));
  train->add_option("--n", cfg.n, "Basis count (must exceed t)")->required();
  train->add_option("--lambda", cfg.lambda, "Sparsity weight");
  train->add_option("--max-iters", cfg.max_iters)->check(CLI::NonNegativeNumber);
  train->add_option("--tol", cfg.tol)->check(CLI::PositiveNumber);
  train->add_option("--sigma", cfg.sigma)->check(CLI::NonNegativeNumber);
  train->add_option("--seed", cfg.seed);
  train->add_option("--init", cfg.init_mode, "data_segments or random");
  train->add_option("--dict", cfg.dict_path, "Output dictionary file")->required();

  CLI::App* obf = app.add_subcommand("obfuscate", "Obfuscate readings");
  add_config(obf);
  obf->add_option("--input", cfg.input_path, "Readings CSV")->required();
  obf->add_option("--dict", cfg.dict_path, "Dictionary file")->required();
  obf->add_option("--f", cfg.f, "Replacement probability in [0, 1)")->required();
  obf->add_option("--delta0", cfg.delta0, "Override the measured sparsity");
  obf->add_option("--lambda", cfg.lambda, "Sparsity weight (default per batch)");
  obf->add_option("--sigma", cfg.sigma)->check(CLI::NonNegativeNumber);
  obf->add_option("--seed", cfg.seed);
  CLI::Option* obf_t = obf->add_option("--t", cfg.t, "Expected batch length");
  obf->add_option("--threads", cfg.threads);
  obf->add_option("--out", cfg.out_path, "Obfuscated CSV (default obfuscated.csv)");
  obf->add_option("--sidecar", cfg.sidecar_path, "Per-batch metadata JSON");

  CLI::App* eval = app.add_subcommand("evaluate", "Score privacy and utility");
  add_config(eval);
  eval->add_option("--original", cfg.original_path)->required();
  eval->add_option("--obfuscated", cfg.obfuscated_path)->required();
  eval->add_option("--truth", cfg.truth_path)->required();
  eval->add_option("--appliances", cfg.appliances)->delimiter(',');
  eval->add_option("--t", cfg.t)->check(CLI::Range(2, 1 << 30));
  eval->add_option("--sidecar", cfg.sidecar_path);
  eval->add_option("--f", cfg.f);
  eval->add_option("--threshold", cfg.thresholds, "name=watts")->delimiter(',');
  eval->add_option("--hysteresis", cfg.hysteresis);
  eval->add_option("--report", cfg.report_path);

  CLI::App* eps = app.add_subcommand("epsilon", "Print privacy budgets");
  add_config(eps);
  eps->add_option("--f", cfg.f)->required();
  eps->add_option("--delta0", cfg.delta0);
  CLI::Option* eps_n = eps->add_option("--n", cfg.n, "Activation length");

  // Splice config-file entries in front of the user's flags, skipping keys
  // the user set explicitly.
  std::vector<std::string> argv(args.begin() + (args.empty() ? 0 : 1), args.end());
  CLI::App* selected = nullptr;
  try {
    std::optional<std::string> config_path;
    std::size_t sub_pos = argv.size();
    for (std::size_t i = 0; i < argv.size(); ++i) {
      if (sub_pos == argv.size()) {
        for (CLI::App* s : {synth, train, obf, eval, eps}) {
          if (argv[i] == s->get_name()) {
            selected = s;
            sub_pos = i;
          }
        }
      }
      if (argv[i] == "--config" && i + 1 < argv.size()) config_path = argv[i + 1];
      if (argv[i].rfind("--config=", 0) == 0) config_path = argv[i].substr(9);
    }
    if (config_path && selected) {
      std::vector<std::string> injected;
      for (const auto& [key, value] : ReadConfigFile(*config_path)) {
        const std::string flag = "--" + key;
        if (key == "config" || selected->get_option_no_throw(flag) == nullptr) continue;
        const bool explicit_flag = std::any_of(argv.begin(), argv.end(), [&](const std::string& a) {
          return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (explicit_flag) continue;
        injected.push_back(flag);
        injected.push_back(value);
      }
      argv.insert(argv.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, injected.begin(),
                  injected.end());
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return dynamic_cast<const IoError*>(&e) != nullptr ? kExitRuntime : kExitUsage;
  }

  try {
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << (selected ? selected->help() : app.help());
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      CmdSynth(cfg, out, err);
    } else if (train->parsed()) {
      CmdTrain(cfg, out, err);
    } else if (obf->parsed()) {
      CmdObfuscate(cfg, obf_t->count() > 0, out, err);
    } else if (eval->parsed()) {
      CmdEvaluate(cfg, out, err);
    } else if (eps->parsed()) {
      CmdEpsilon(cfg, eps_n->count() > 0, out);
    }
  } catch (const InvalidArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UnboundedPrivacyError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace loadveil::cli
