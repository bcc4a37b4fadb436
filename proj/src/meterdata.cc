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

#include "loadveil/meterdata.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>
#include <utility>

#include "loadveil/errors.h"
#include "loadveil/random.h"

namespace loadveil {
namespace {

constexpr std::string_view kReadingsHeader = "meter_id,timestamp,watts";

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(
        start, comma == std::string_view::npos ? std::string_view::npos
                                               : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
      field.remove_prefix(1);
    }
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' ||
                              field.back() == '\r')) {
      field.remove_suffix(1);
    }
    fields.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool IsBlank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

std::ofstream OpenForWrite(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream OpenForRead(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

struct PendingBatch {
  std::string meter_id;
  Timestamp start;
  Timestamp last;
  std::int64_t period = 0;  // 0 until the second row fixes it
  std::vector<double> values;
  std::size_t first_line = 0;
};

}  // namespace

ReadingBatch::ReadingBatch(std::string meter_id, Timestamp start_time,
                           std::int64_t period_seconds,
                           std::vector<double> values)
    : meter_id_(std::move(meter_id)),
      start_time_(start_time),
      period_seconds_(period_seconds),
      values_(std::move(values)) {
  if (values_.size() < 2) {
    throw InvalidArgumentError("a reading batch needs at least 2 values, got " +
                               std::to_string(values_.size()));
  }
  if (period_seconds_ <= 0) {
    throw InvalidArgumentError("period_seconds must be positive");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
      throw InvalidArgumentError("reading " + std::to_string(i) +
                                 " is negative or non-finite: " +
                                 FormatDouble(values_[i]));
    }
  }
}

ReadingBatch ReadingBatch::WithValues(std::vector<double> values) const {
  return ReadingBatch(meter_id_, start_time_, period_seconds_, std::move(values));
}

void ApplianceProfile::Validate() const {
  if (!(rated_power_watts > 0.0) || !std::isfinite(rated_power_watts)) {
    throw InvalidArgumentError("appliance '" + name +
                               "': rated power must be positive");
  }
  if (!(mean_on_duration_slots > 0.0) || !(mean_off_duration_slots > 0.0)) {
    throw InvalidArgumentError("appliance '" + name +
                               "': mean ON/OFF durations must be positive");
  }
  if (!(power_jitter_fraction >= 0.0 && power_jitter_fraction < 1.0)) {
    throw InvalidArgumentError("appliance '" + name +
                               "': jitter fraction must lie in [0, 1)");
  }
}

std::vector<ApplianceProfile> StandardAppliances() {
  return {
      {"fridge", 100.0, 8.0, 12.0, 0.05, std::nullopt},
      {"light1", 60.0, 16.0, 32.0, 0.02, std::nullopt},
      {"washer_dryer", 40.0, 10.0, 40.0, 0.10, std::nullopt},
      {"light2", 15.0, 20.0, 28.0, 0.02, std::nullopt},
  };
}

ApplianceProfile ParseApplianceSpec(const std::string& spec) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = spec.find(':', start);
    parts.push_back(spec.substr(start, colon == std::string::npos ? std::string::npos
                                                                  : colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() != 4 && parts.size() != 5) {
    throw InvalidArgumentError("appliance spec '" + spec +
                               "' must be name:watts:mean_on:mean_off[:jitter]");
  }
  ApplianceProfile p;
  p.name = parts[0];
  if (p.name.empty()) throw InvalidArgumentError("appliance name is empty");
  double* targets[] = {&p.rated_power_watts, &p.mean_on_duration_slots,
                       &p.mean_off_duration_slots, &p.power_jitter_fraction};
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::optional<double> v = ParseDouble(parts[i]);
    if (!v) {
      throw InvalidArgumentError("appliance spec '" + spec + "': bad number '" +
                                 parts[i] + "'");
    }
    *targets[i - 1] = *v;
  }
  p.Validate();
  return p;
}

std::vector<ReadingBatch> LoadCsv(const std::filesystem::path& path,
                                  std::size_t batch_length) {
  if (batch_length < 2) {
    throw InvalidArgumentError("batch length must be at least 2");
  }
  std::ifstream in = OpenForRead(path);

  std::vector<ReadingBatch> batches;
  std::optional<PendingBatch> pending;
  std::optional<std::pair<std::string, Timestamp>> previous_row;

  auto flush = [&]() {
    if (!pending) return;
    if (pending->values.size() < 2) {
      throw ParseError(pending->first_line,
                       "meter '" + pending->meter_id +
                           "' has a single isolated reading that cannot form "
                           "a batch");
    }
    batches.emplace_back(std::move(pending->meter_id), pending->start,
                         pending->period, std::move(pending->values));
    pending.reset();
  };

  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsBlank(line)) continue;
    const std::vector<std::string_view> fields = SplitFields(line);
    if (!seen_content) {
      seen_content = true;
      if (!fields.empty() && fields[0] == "meter_id") continue;
    }
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 fields (meter_id,timestamp,watts), "
                                "got " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(line_no, "empty meter_id");
    const std::optional<Timestamp> ts = ParseIso8601Utc(fields[1]);
    if (!ts) {
      throw ParseError(line_no, "bad ISO-8601 UTC timestamp '" +
                                    std::string(fields[1]) + "'");
    }
    const std::optional<double> watts = ParseDouble(fields[2]);
    if (!watts) {
      throw ParseError(line_no, "bad watts value '" + std::string(fields[2]) + "'");
    }
    if (!std::isfinite(*watts)) {
      throw ParseError(line_no, "non-finite watts value " + std::string(fields[2]));
    }
    if (*watts < 0.0) {
      throw ParseError(line_no, "negative watts value " + std::string(fields[2]));
    }

    const std::string meter(fields[0]);
    if (previous_row && previous_row->first == meter &&
        *ts <= previous_row->second) {
      throw ParseError(line_no, "timestamp " + std::string(fields[1]) +
                                    " is not after the previous reading of "
                                    "meter '" + meter + "'");
    }

    bool extend = false;
    if (pending && pending->meter_id == meter &&
        pending->values.size() < batch_length) {
      const std::int64_t gap = (*ts - pending->last).count();
      if (pending->period == 0) {
        pending->period = gap;
        extend = true;
      } else {
        extend = gap == pending->period;
      }
    }
    if (extend) {
      pending->values.push_back(*watts);
      pending->last = *ts;
    } else {
      flush();
      pending = PendingBatch{meter, *ts, *ts, 0, {*watts}, line_no};
    }
    previous_row = std::make_pair(meter, *ts);
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  flush();
  return batches;
}

void WriteCsv(std::span<const ReadingBatch> batches,
              const std::filesystem::path& path) {
  std::ofstream out = OpenForWrite(path);
  out << kReadingsHeader << '\n';
  for (const ReadingBatch& batch : batches) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      out << batch.meter_id() << ',' << FormatIso8601Utc(batch.time_at(i)) << ','
          << FormatDouble(batch.values()[i]) << '\n';
    }
  }
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

SyntheticData GenerateSynthetic(std::span<const ApplianceProfile> profiles,
                                std::size_t t, std::size_t batches,
                                std::uint64_t seed,
                                const std::string& meter_id) {
  if (profiles.empty()) {
    throw InvalidArgumentError("at least one appliance profile is required");
  }
  if (t < 2) throw InvalidArgumentError("batch length t must be at least 2");
  if (batches == 0) throw InvalidArgumentError("batch count must be positive");
  for (const ApplianceProfile& p : profiles) p.Validate();

  Rng rng(seed);
  const std::size_t k = profiles.size();
  std::vector<bool> on(k);
  for (std::size_t a = 0; a < k; ++a) {
    const ApplianceProfile& p = profiles[a];
    if (p.initial_on) {
      on[a] = *p.initial_on;
    } else {
      const double stationary_on =
          p.mean_on_duration_slots /
          (p.mean_on_duration_slots + p.mean_off_duration_slots);
      on[a] = rng.Bernoulli(stationary_on);
    }
  }

  // 2020-01-01T00:00:00Z
  const Timestamp epoch = std::chrono::sys_days{std::chrono::year{2020} /
                                                std::chrono::January / 1};
  SyntheticData data;
  data.batches.reserve(batches);
  data.truth.reserve(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    std::vector<double> values(t, 0.0);
    std::vector<GroundTruthStates> truth(k);
    for (std::size_t a = 0; a < k; ++a) {
      truth[a].appliance_name = profiles[a].name;
      truth[a].states.resize(t);
    }
    for (std::size_t slot = 0; slot < t; ++slot) {
      if (b != 0 || slot != 0) {
        for (std::size_t a = 0; a < k; ++a) {
          const double mean = on[a] ? profiles[a].mean_on_duration_slots
                                    : profiles[a].mean_off_duration_slots;
          if (rng.Bernoulli(1.0 / std::max(mean, 1.0))) on[a] = !on[a];
        }
      }
      for (std::size_t a = 0; a < k; ++a) {
        truth[a].states[slot] = on[a];
        // Draw jitter unconditionally so one appliance's state never shifts
        // another's random stream.
        const double u = 2.0 * rng.Uniform01() - 1.0;
        if (on[a]) {
          values[slot] += profiles[a].rated_power_watts *
                          (1.0 + profiles[a].power_jitter_fraction * u);
        }
      }
    }
    const Timestamp start =
        epoch + std::chrono::seconds{kDefaultPeriodSeconds *
                                     static_cast<std::int64_t>(b * t)};
    data.batches.emplace_back(meter_id, start, kDefaultPeriodSeconds,
                              std::move(values));
    data.truth.push_back(std::move(truth));
  }
  return data;
}

void WriteTruthCsv(const SyntheticData& data, const std::filesystem::path& path) {
  std::ofstream out = OpenForWrite(path);
  out << "meter_id,timestamp";
  if (!data.truth.empty()) {
    for (const GroundTruthStates& g : data.truth.front()) {
      out << ',' << g.appliance_name;
    }
  }
  out << '\n';
  for (std::size_t b = 0; b < data.batches.size(); ++b) {
    const ReadingBatch& batch = data.batches[b];
    for (std::size_t i = 0; i < batch.size(); ++i) {
      out << batch.meter_id() << ',' << FormatIso8601Utc(batch.time_at(i));
      for (const GroundTruthStates& g : data.truth[b]) {
        out << ',' << (g.states[i] ? '1' : '0');
      }
      out << '\n';
    }
  }
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

TruthTable LoadTruthCsv(const std::filesystem::path& path) {
  std::ifstream in = OpenForRead(path);
  TruthTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsBlank(line)) continue;
    const std::vector<std::string_view> fields = SplitFields(line);
    if (!have_header) {
      if (fields.size() < 3 || fields[0] != "meter_id" ||
          fields[1] != "timestamp") {
        throw ParseError(line_no,
                         "truth header must be meter_id,timestamp,<appliance>...");
      }
      for (std::size_t i = 2; i < fields.size(); ++i) {
        table.appliance_names.emplace_back(fields[i]);
      }
      table.states.resize(table.appliance_names.size());
      have_header = true;
      continue;
    }
    if (fields.size() != table.appliance_names.size() + 2) {
      throw ParseError(line_no, "expected " +
                                    std::to_string(table.appliance_names.size() + 2) +
                                    " fields");
    }
    for (std::size_t i = 2; i < fields.size(); ++i) {
      if (fields[i] != "0" && fields[i] != "1") {
        throw ParseError(line_no, "state cell must be 0 or 1");
      }
      table.states[i - 2].push_back(fields[i] == "1");
    }
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  if (!have_header) throw ParseError(0, path.string() + " has no truth header");
  return table;
}

std::vector<std::vector<GroundTruthStates>> SplitTruth(
    const TruthTable& table, std::span<const ReadingBatch> batches) {
  std::size_t total = 0;
  for (const ReadingBatch& b : batches) total += b.size();
  if (total != table.rows()) {
    throw DimensionMismatchError("truth table has " + std::to_string(table.rows()) +
                                 " rows but readings have " +
                                 std::to_string(total));
  }
  std::vector<std::vector<GroundTruthStates>> out;
  out.reserve(batches.size());
  std::size_t offset = 0;
  for (const ReadingBatch& b : batches) {
    std::vector<GroundTruthStates> per_batch;
    for (std::size_t k = 0; k < table.appliance_names.size(); ++k) {
      const auto first = table.states[k].begin() + static_cast<std::ptrdiff_t>(offset);
      per_batch.push_back(
          {table.appliance_names[k],
           std::vector<bool>(first, first + static_cast<std::ptrdiff_t>(b.size()))});
    }
    out.push_back(std::move(per_batch));
    offset += b.size();
  }
  return out;
}

}  // namespace loadveil
