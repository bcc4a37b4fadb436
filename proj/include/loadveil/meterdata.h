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

// Smart-meter readings: batching, CSV persistence and a synthetic appliance
// simulator that also emits per-slot ON/OFF ground truth.

#ifndef LOADVEIL_METERDATA_H_
#define LOADVEIL_METERDATA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadveil/timestamp.h"

namespace loadveil {

inline constexpr std::int64_t kDefaultPeriodSeconds = 900;
inline constexpr std::size_t kDefaultBatchLength = 96;

// One batch of t consecutive power readings (watts) from a single meter.
// Immutable once constructed; construction validates the invariants.
class ReadingBatch {
 public:
  // Throws InvalidArgumentError unless values.size() >= 2, every value is
  // finite and >= 0, and period_seconds > 0.
  ReadingBatch(std::string meter_id, Timestamp start_time,
               std::int64_t period_seconds, std::vector<double> values);

  const std::string& meter_id() const { return meter_id_; }
  Timestamp start_time() const { return start_time_; }
  std::int64_t period_seconds() const { return period_seconds_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  Timestamp time_at(std::size_t slot) const {
    return start_time_ +
           std::chrono::seconds{period_seconds_ * static_cast<std::int64_t>(slot)};
  }

  // Same meter, start and cadence with replacement readings.
  ReadingBatch WithValues(std::vector<double> values) const;

 private:
  std::string meter_id_;
  Timestamp start_time_;
  std::int64_t period_seconds_;
  std::vector<double> values_;
};

struct ApplianceProfile {
  std::string name;
  double rated_power_watts = 0.0;
  double mean_on_duration_slots = 1.0;
  double mean_off_duration_slots = 1.0;
  double power_jitter_fraction = 0.0;
  // Unset: the first state is drawn from the stationary ON probability.
  std::optional<bool> initial_on;

  // Throws InvalidArgumentError on a violated bound.
  void Validate() const;
};

// Four-appliance household used by the demos and acceptance runs: fridge
// 100 W, light1 60 W, washer_dryer 40 W, light2 15 W.
std::vector<ApplianceProfile> StandardAppliances();

// Parses `name:watts:mean_on:mean_off[:jitter]`. Throws InvalidArgumentError.
ApplianceProfile ParseApplianceSpec(const std::string& spec);

struct GroundTruthStates {
  std::string appliance_name;
  std::vector<bool> states;
};

// truth[b][k] holds appliance k's states for batch b.
struct SyntheticData {
  std::vector<ReadingBatch> batches;
  std::vector<std::vector<GroundTruthStates>> truth;
};

// Rows are `meter_id,timestamp,watts`; an optional header line is skipped.
// Rows of one meter must be time-ordered. A batch closes when it reaches
// `batch_length` readings, when the meter changes, or when the spacing
// between consecutive rows changes. Shorter trailing batches are returned
// as-is (their size() is the flag); a lone trailing row cannot form a batch
// and is reported as a ParseError.
std::vector<ReadingBatch> LoadCsv(const std::filesystem::path& path,
                                  std::size_t batch_length = kDefaultBatchLength);

// Writes the header plus one row per reading.
void WriteCsv(std::span<const ReadingBatch> batches,
              const std::filesystem::path& path);

// Each appliance runs an alternating ON/OFF renewal process with geometric
// durations; the process continues across batch boundaries. Every reading
// is the sum of the ON appliances' draws rated * (1 + u), u uniform in
// [-jitter, jitter]. Batches are consecutive periods of one meter.
SyntheticData GenerateSynthetic(std::span<const ApplianceProfile> profiles,
                                std::size_t t, std::size_t batches,
                                std::uint64_t seed,
                                const std::string& meter_id = "meter-0");

// Per-slot truth table: header `meter_id,timestamp,<appliance>...`, one row
// per reading with 0/1 cells.
void WriteTruthCsv(const SyntheticData& data, const std::filesystem::path& path);

struct TruthTable {
  std::vector<std::string> appliance_names;
  // states[k] is the flat per-row sequence for appliance k.
  std::vector<std::vector<bool>> states;
  std::size_t rows() const { return states.empty() ? 0 : states[0].size(); }
};

TruthTable LoadTruthCsv(const std::filesystem::path& path);

// Slices a flat truth table along the row layout of `batches`.
std::vector<std::vector<GroundTruthStates>> SplitTruth(
    const TruthTable& table, std::span<const ReadingBatch> batches);

}  // namespace loadveil

#endif  // LOADVEIL_METERDATA_H_
