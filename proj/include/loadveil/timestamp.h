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

#ifndef LOADVEIL_TIMESTAMP_H_
#define LOADVEIL_TIMESTAMP_H_

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace loadveil {

using Timestamp = std::chrono::sys_seconds;

// Accepts "YYYY-MM-DDTHH:MM:SS" followed by "Z" or "+00:00".
std::optional<Timestamp> ParseIso8601Utc(std::string_view text);

// Always emits "YYYY-MM-DDTHH:MM:SSZ".
std::string FormatIso8601Utc(Timestamp ts);

// Decimal text that parses back to exactly `value`.
std::string FormatDouble(double value);

// Strict full-string parse; rejects trailing garbage and empty input.
std::optional<double> ParseDouble(std::string_view text);

}  // namespace loadveil

#endif  // LOADVEIL_TIMESTAMP_H_
