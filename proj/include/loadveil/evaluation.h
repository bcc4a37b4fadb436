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

// Privacy and utility scoring of obfuscated load data.
//
// Privacy is measured by attacking the data with a load-disaggregation
// oracle and scoring how well it recovers each appliance's ON/OFF
// sequence (lower F1 means better hidden behaviour). Utility is measured by
// how well the obfuscated series preserves energy totals.

#ifndef LOADVEIL_EVALUATION_H_
#define LOADVEIL_EVALUATION_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadveil/meterdata.h"

namespace loadveil {

struct AttackConfig {
  // Per-appliance ON thresholds in watts; missing names default to half the
  // rated power.
  std::map<std::string, double> thresholds;
  // Minimum run length (slots) for a state change to be accepted. 1 keeps
  // every per-slot decision.
  int hysteresis_slots = 1;

  double ThresholdFor(const ApplianceProfile& profile) const;
};

// Greedy residual subtraction, strongest appliance first: an appliance is
// ON in a slot when the remaining power reaches its threshold, in which
// case its rated power is subtracted. Predictions are returned in the order
// of `profiles`, which need not be sorted.
std::vector<GroundTruthStates> NilmAttack(std::span<const double> values,
                                          std::span<const ApplianceProfile> profiles,
                                          const AttackConfig& config = {});

struct ConfusionCounts {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& other) {
    true_positive += other.true_positive;
    false_positive += other.false_positive;
    false_negative += other.false_negative;
    return *this;
  }
};

struct F1Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
};

ConfusionCounts CountConfusion(const std::vector<bool>& predicted,
                               const std::vector<bool>& truth);

// Zero denominators score 0.
F1Score ScoreFromCounts(const ConfusionCounts& counts);
double F1FromPrecisionRecall(double precision, double recall);

// Throws DimensionMismatchError on a length mismatch.
F1Score ScoreF1(const std::vector<bool>& predicted, const std::vector<bool>& truth);

// Readings of several consumers over the same slots: consumers[c][slot].
struct ConsumerPanel {
  std::vector<std::vector<double>> original;
  std::vector<std::vector<double>> obfuscated;
};

struct UtilityMetrics {
  double mae_watts = 0.0;
  // Empty when the original total is zero but the obfuscated one is not.
  std::optional<double> total_energy_relative_error;
  // Max over slots of the relative error of the all-consumer aggregate;
  // only computed when a panel is given.
  std::optional<double> instant_aggregate_relative_error;
};

UtilityMetrics ComputeUtility(std::span<const double> original,
                              std::span<const double> obfuscated,
                              const std::optional<ConsumerPanel>& panel = std::nullopt);

// |sum(obfuscated) - sum(original)| / sum(original) with 0/0 := 0.
std::optional<double> RelativeTotalError(std::span<const double> original,
                                         std::span<const double> obfuscated);

struct PrivacySummary {
  double f = 0.0;
  std::optional<double> delta0;
  std::optional<double> epsilon_paper;
  std::optional<double> epsilon_mechanism;
};

struct ApplianceScores {
  std::string name;
  F1Score original;
  F1Score obfuscated;
};

struct EvalReport {
  std::vector<ApplianceScores> appliances;
  UtilityMetrics utility;
  PrivacySummary privacy;
  AttackConfig attack;
  std::size_t batches = 0;
};

// Attacks both versions of every batch and pools TP/FP/FN across batches
// (micro-averaging). truth[b] must list one state sequence per profile, by
// name. Utility is computed over the concatenation of all batches; when
// more than one meter is present, readings that share a timestamp form the
// instant-aggregate panel.
EvalReport CompareReport(std::span<const ReadingBatch> original,
                         std::span<const std::vector<GroundTruthStates>> truth,
                         std::span<const ReadingBatch> obfuscated,
                         std::span<const ApplianceProfile> profiles,
                         const PrivacySummary& privacy,
                         const AttackConfig& attack = {});

// Report schema v1: top-level `appliances`, `utility`, `privacy`, `config`.
std::string ReportJson(const EvalReport& report);

}  // namespace loadveil

#endif  // LOADVEIL_EVALUATION_H_
