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

#include "loadveil/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"
#include "loadveil/errors.h"

namespace loadveil {
namespace {

std::vector<bool> ApplyHysteresis(const std::vector<bool>& raw, int min_run) {
  if (min_run <= 1 || raw.empty()) return raw;
  std::vector<bool> out(raw.size());
  bool state = raw[0];
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != state) {
      const std::size_t end = std::min(raw.size(), i + static_cast<std::size_t>(min_run));
      bool persists = true;
      for (std::size_t j = i; j < end; ++j) persists = persists && raw[j] == raw[i];
      if (persists) state = raw[i];
    }
    out[i] = state;
  }
  return out;
}

double SafeRatio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

nlohmann::json ScoreJson(const F1Score& s) {
  return {{"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1},
          {"tp", s.counts.true_positive},
          {"fp", s.counts.false_positive},
          {"fn", s.counts.false_negative}};
}

nlohmann::json OptionalJson(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

}  // namespace

double AttackConfig::ThresholdFor(const ApplianceProfile& profile) const {
  const auto it = thresholds.find(profile.name);
  return it != thresholds.end() ? it->second : 0.5 * profile.rated_power_watts;
}

std::vector<GroundTruthStates> NilmAttack(std::span<const double> values,
                                          std::span<const ApplianceProfile> profiles,
                                          const AttackConfig& config) {
  std::vector<std::size_t> order(profiles.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return profiles[a].rated_power_watts > profiles[b].rated_power_watts;
  });
  std::vector<double> thresholds(profiles.size());
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    thresholds[k] = config.ThresholdFor(profiles[k]);
    if (!(thresholds[k] > 0.0)) {
      throw InvalidArgumentError("attack threshold for '" + profiles[k].name +
                                 "' must be positive");
    }
  }

  std::vector<GroundTruthStates> predicted(profiles.size());
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    predicted[k].appliance_name = profiles[k].name;
    predicted[k].states.assign(values.size(), false);
  }
  for (std::size_t slot = 0; slot < values.size(); ++slot) {
    double residual = values[slot];
    for (std::size_t k : order) {
      if (residual >= thresholds[k]) {
        predicted[k].states[slot] = true;
        residual -= profiles[k].rated_power_watts;
      }
    }
  }
  for (GroundTruthStates& p : predicted) {
    p.states = ApplyHysteresis(p.states, config.hysteresis_slots);
  }
  return predicted;
}

ConfusionCounts CountConfusion(const std::vector<bool>& predicted,
                               const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionMismatchError("prediction length " + std::to_string(predicted.size()) +
                                 " differs from truth length " +
                                 std::to_string(truth.size()));
  }
  ConfusionCounts counts;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] && truth[i]) ++counts.true_positive;
    if (predicted[i] && !truth[i]) ++counts.false_positive;
    if (!predicted[i] && truth[i]) ++counts.false_negative;
  }
  return counts;
}

double F1FromPrecisionRecall(double precision, double recall) {
  return SafeRatio(2.0 * precision * recall, precision + recall);
}

F1Score ScoreFromCounts(const ConfusionCounts& counts) {
  F1Score s;
  s.counts = counts;
  const double tp = static_cast<double>(counts.true_positive);
  s.precision = SafeRatio(tp, tp + static_cast<double>(counts.false_positive));
  s.recall = SafeRatio(tp, tp + static_cast<double>(counts.false_negative));
  s.f1 = F1FromPrecisionRecall(s.precision, s.recall);
  return s;
}

F1Score ScoreF1(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  return ScoreFromCounts(CountConfusion(predicted, truth));
}

std::optional<double> RelativeTotalError(std::span<const double> original,
                                         std::span<const double> obfuscated) {
  const double total = std::accumulate(original.begin(), original.end(), 0.0);
  const double total_prime = std::accumulate(obfuscated.begin(), obfuscated.end(), 0.0);
  if (total == 0.0) {
    if (total_prime == 0.0) return 0.0;
    return std::nullopt;
  }
  return std::abs(total_prime - total) / total;
}

UtilityMetrics ComputeUtility(std::span<const double> original,
                              std::span<const double> obfuscated,
                              const std::optional<ConsumerPanel>& panel) {
  if (original.size() != obfuscated.size()) {
    throw DimensionMismatchError("original has " + std::to_string(original.size()) +
                                 " readings, obfuscated has " +
                                 std::to_string(obfuscated.size()));
  }
  UtilityMetrics m;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    abs_sum += std::abs(obfuscated[i] - original[i]);
  }
  m.mae_watts = original.empty() ? 0.0 : abs_sum / static_cast<double>(original.size());
  m.total_energy_relative_error = RelativeTotalError(original, obfuscated);

  if (panel) {
    if (panel->original.size() != panel->obfuscated.size() || panel->original.empty()) {
      throw DimensionMismatchError("consumer panel halves differ in consumer count");
    }
    const std::size_t slots = panel->original.front().size();
    for (std::size_t c = 0; c < panel->original.size(); ++c) {
      if (panel->original[c].size() != slots || panel->obfuscated[c].size() != slots) {
        throw DimensionMismatchError("consumer panel rows differ in length");
      }
    }
    double worst = 0.0;
    for (std::size_t s = 0; s < slots; ++s) {
      std::vector<double> column(panel->original.size());
      std::vector<double> column_prime(panel->original.size());
      for (std::size_t c = 0; c < panel->original.size(); ++c) {
        column[c] = panel->original[c][s];
        column_prime[c] = panel->obfuscated[c][s];
      }
      // An instant with zero true load but nonzero obfuscated load has no
      // relative error; it is skipped.
      if (const auto err = RelativeTotalError(column, column_prime)) {
        worst = std::max(worst, *err);
      }
    }
    m.instant_aggregate_relative_error = worst;
  }
  return m;
}

EvalReport CompareReport(std::span<const ReadingBatch> original,
                         std::span<const std::vector<GroundTruthStates>> truth,
                         std::span<const ReadingBatch> obfuscated,
                         std::span<const ApplianceProfile> profiles,
                         const PrivacySummary& privacy, const AttackConfig& attack) {
  if (original.empty()) throw InvalidArgumentError("no batches to evaluate");
  if (original.size() != obfuscated.size() || original.size() != truth.size()) {
    throw DimensionMismatchError(
        "batch counts differ: original " + std::to_string(original.size()) +
        ", obfuscated " + std::to_string(obfuscated.size()) + ", truth " +
        std::to_string(truth.size()));
  }
  if (profiles.empty()) throw InvalidArgumentError("no appliance profiles given");

  std::vector<ConfusionCounts> counts_original(profiles.size());
  std::vector<ConfusionCounts> counts_obfuscated(profiles.size());
  std::vector<double> all_original;
  std::vector<double> all_obfuscated;

  for (std::size_t b = 0; b < original.size(); ++b) {
    if (original[b].size() != obfuscated[b].size()) {
      throw DimensionMismatchError("batch " + std::to_string(b) +
                                   " has different original/obfuscated lengths");
    }
    const auto predicted_original = NilmAttack(original[b].values(), profiles, attack);
    const auto predicted_obfuscated =
        NilmAttack(obfuscated[b].values(), profiles, attack);
    for (std::size_t k = 0; k < profiles.size(); ++k) {
      const auto match = std::find_if(
          truth[b].begin(), truth[b].end(),
          [&](const GroundTruthStates& g) { return g.appliance_name == profiles[k].name; });
      if (match == truth[b].end()) {
        throw InvalidArgumentError("no ground truth for appliance '" +
                                   profiles[k].name + "' in batch " + std::to_string(b));
      }
      counts_original[k] += CountConfusion(predicted_original[k].states, match->states);
      counts_obfuscated[k] +=
          CountConfusion(predicted_obfuscated[k].states, match->states);
    }
    all_original.insert(all_original.end(), original[b].values().begin(),
                        original[b].values().end());
    all_obfuscated.insert(all_obfuscated.end(), obfuscated[b].values().begin(),
                          obfuscated[b].values().end());
  }

  std::optional<ConsumerPanel> panel;
  std::set<std::string> meters;
  for (const ReadingBatch& b : original) meters.insert(b.meter_id());
  if (meters.size() > 1) {
    // Keep only instants reported by every meter.
    std::map<Timestamp, std::map<std::string, std::pair<double, double>>> by_time;
    for (std::size_t b = 0; b < original.size(); ++b) {
      for (std::size_t i = 0; i < original[b].size(); ++i) {
        by_time[original[b].time_at(i)][original[b].meter_id()] = {
            original[b].values()[i], obfuscated[b].values()[i]};
      }
    }
    panel.emplace();
    const std::vector<std::string> meter_list(meters.begin(), meters.end());
    panel->original.assign(meter_list.size(), {});
    panel->obfuscated.assign(meter_list.size(), {});
    for (const auto& [time, readings] : by_time) {
      if (readings.size() != meter_list.size()) continue;
      for (std::size_t c = 0; c < meter_list.size(); ++c) {
        const auto& [y, y_prime] = readings.at(meter_list[c]);
        panel->original[c].push_back(y);
        panel->obfuscated[c].push_back(y_prime);
      }
    }
    if (panel->original.front().empty()) panel.reset();
  }

  EvalReport report;
  report.utility = ComputeUtility(all_original, all_obfuscated, panel);
  report.privacy = privacy;
  report.attack = attack;
  report.batches = original.size();
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    report.appliances.push_back({profiles[k].name, ScoreFromCounts(counts_original[k]),
                                 ScoreFromCounts(counts_obfuscated[k])});
  }
  return report;
}

std::string ReportJson(const EvalReport& report) {
  nlohmann::json appliances = nlohmann::json::array();
  for (const ApplianceScores& a : report.appliances) {
    appliances.push_back({{"name", a.name},
                          {"original", ScoreJson(a.original)},
                          {"obfuscated", ScoreJson(a.obfuscated)}});
  }
  nlohmann::json thresholds = nlohmann::json::object();
  for (const auto& [name, watts] : report.attack.thresholds) thresholds[name] = watts;

  nlohmann::json doc;
  doc["schema"] = "loadveil-eval-report/v1";
  doc["appliances"] = std::move(appliances);
  doc["utility"] = {
      {"mae_watts", report.utility.mae_watts},
      {"total_energy_relative_error",
       OptionalJson(report.utility.total_energy_relative_error)},
      {"instant_aggregate_relative_error",
       OptionalJson(report.utility.instant_aggregate_relative_error)}};
  doc["privacy"] = {{"f", report.privacy.f},
                    {"delta0", OptionalJson(report.privacy.delta0)},
                    {"epsilon_paper", OptionalJson(report.privacy.epsilon_paper)},
                    {"epsilon_mechanism", OptionalJson(report.privacy.epsilon_mechanism)}};
  doc["config"] = {{"averaging", "micro"},
                   {"attack", "greedy_threshold_subtraction"},
                   {"default_threshold_fraction", 0.5},
                   {"thresholds", std::move(thresholds)},
                   {"hysteresis_slots", report.attack.hysteresis_slots},
                   {"batches", report.batches}};
  return doc.dump(2) + "\n";
}

}  // namespace loadveil
