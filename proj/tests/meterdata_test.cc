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

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "loadveil/errors.h"
#include "test_util.h"

namespace loadveil {
namespace {

using ::loadveil::testing::TempDir;

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::size_t CountLines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

TEST(ReadingBatchTest, EnforcesInvariants) {
  EXPECT_THROW(ReadingBatch("m", Timestamp{}, 900, {1.0}), InvalidArgumentError);
  EXPECT_THROW(ReadingBatch("m", Timestamp{}, 0, {1.0, 2.0}), InvalidArgumentError);
  EXPECT_THROW(ReadingBatch("m", Timestamp{}, 900, {1.0, -0.1}), InvalidArgumentError);
  EXPECT_THROW(ReadingBatch("m", Timestamp{}, 900, {1.0, INFINITY}), InvalidArgumentError);
  const ReadingBatch ok("m", Timestamp{}, 900, {0.0, 2.0});
  EXPECT_EQ(ok.size(), 2u);
  EXPECT_EQ(ok.time_at(1) - ok.time_at(0), std::chrono::seconds{900});
}

TEST(TimestampTest, ParsesAndFormatsUtc) {
  const auto ts = ParseIso8601Utc("2020-03-01T12:34:56Z");
  ASSERT_TRUE(ts.has_value());
  EXPECT_EQ(FormatIso8601Utc(*ts), "2020-03-01T12:34:56Z");
  EXPECT_TRUE(ParseIso8601Utc("2020-03-01T12:34:56+00:00").has_value());
  EXPECT_FALSE(ParseIso8601Utc("2020-02-30T00:00:00Z").has_value());
  EXPECT_FALSE(ParseIso8601Utc("2020-03-01T12:34:56+01:00").has_value());
  EXPECT_FALSE(ParseIso8601Utc("yesterday").has_value());
}

TEST(LoadCsvTest, ExactDayFitsOneBatch) {
  TempDir dir("csv_day");
  std::ostringstream text;
  text << "meter_id,timestamp,watts\n";
  const Timestamp start = *ParseIso8601Utc("2020-01-01T00:00:00Z");
  for (int i = 0; i < 96; ++i) {
    text << "m1," << FormatIso8601Utc(start + std::chrono::seconds{900 * i}) << ","
         << 10.0 + i << "\n";
  }
  WriteText(dir / "day.csv", text.str());
  const auto batches = LoadCsv(dir / "day.csv", 96);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].size(), 96u);
  EXPECT_EQ(batches[0].period_seconds(), 900);
  EXPECT_EQ(batches[0].values()[95], 105.0);
}

TEST(LoadCsvTest, EmptyFileGivesNoBatches) {
  TempDir dir("csv_empty");
  WriteText(dir / "empty.csv", "");
  EXPECT_TRUE(LoadCsv(dir / "empty.csv").empty());
  WriteText(dir / "header.csv", "meter_id,timestamp,watts\n");
  EXPECT_TRUE(LoadCsv(dir / "header.csv").empty());
}

TEST(LoadCsvTest, NegativeWattsNamesLineAndValue) {
  TempDir dir("csv_neg");
  WriteText(dir / "neg.csv", "m1,2020-01-01T00:00:00Z,-5.0\n");
  try {
    LoadCsv(dir / "neg.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_NE(std::string(e.what()).find("-5.0"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos) << e.what();
  }
}

TEST(LoadCsvTest, RejectsMalformedRows) {
  TempDir dir("csv_bad");
  WriteText(dir / "fields.csv", "meter_id,timestamp,watts\nm1,2020-01-01T00:00:00Z\n");
  try {
    LoadCsv(dir / "fields.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  WriteText(dir / "nan.csv", "m1,2020-01-01T00:00:00Z,nan\nm1,2020-01-01T00:15:00Z,1\n");
  EXPECT_THROW(LoadCsv(dir / "nan.csv"), ParseError);
  WriteText(dir / "order.csv",
            "m1,2020-01-01T00:15:00Z,1\nm1,2020-01-01T00:00:00Z,1\n");
  EXPECT_THROW(LoadCsv(dir / "order.csv"), ParseError);
  EXPECT_THROW(LoadCsv(dir / "does_not_exist.csv"), IoError);
}

TEST(LoadCsvTest, SplitsOnMeterSpacingAndLength) {
  TempDir dir("csv_split");
  WriteText(dir / "mix.csv",
            "meter_id,timestamp,watts\n"
            "a,2020-01-01T00:00:00Z,1\n"
            "a,2020-01-01T00:15:00Z,2\n"
            "a,2020-01-01T00:30:00Z,3\n"
            "a,2020-01-01T00:45:00Z,4\n"
            "a,2020-01-01T01:00:00Z,5\n"
            "a,2020-01-01T03:00:00Z,6\n"
            "a,2020-01-01T05:00:00Z,7\n"
            "b,2020-01-01T00:00:00Z,8\n"
            "b,2020-01-01T00:15:00Z,9\n");
  const auto batches = LoadCsv(dir / "mix.csv", 4);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 4u);
  // The fifth reading opens a new batch whose cadence is set by the next gap.
  EXPECT_EQ(batches[1].size(), 3u);
  EXPECT_EQ(batches[1].period_seconds(), 7200);
  EXPECT_EQ(batches[2].meter_id(), "b");
  EXPECT_EQ(batches[2].size(), 2u);
}

TEST(WriteCsvTest, EmptyBatchListWritesHeaderOnly) {
  TempDir dir("csv_write_empty");
  WriteCsv({}, dir / "out.csv");
  std::ifstream in(dir / "out.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "meter_id,timestamp,watts");
  EXPECT_EQ(CountLines(dir / "out.csv"), 1u);
}

TEST(WriteCsvTest, OneRowPerReading) {
  TempDir dir("csv_rows");
  const auto data = GenerateSynthetic(StandardAppliances(), 96, 1, 3);
  WriteCsv(data.batches, dir / "out.csv");
  EXPECT_EQ(CountLines(dir / "out.csv"), 97u);
}

TEST(WriteCsvTest, RoundTripPreservesValuesAndOrder) {
  TempDir dir("csv_roundtrip");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto data = GenerateSynthetic(StandardAppliances(), 24, 7, seed);
    WriteCsv(data.batches, dir / "rt.csv");
    const auto loaded = LoadCsv(dir / "rt.csv", 24);
    ASSERT_EQ(loaded.size(), data.batches.size());
    for (std::size_t b = 0; b < loaded.size(); ++b) {
      EXPECT_EQ(loaded[b].meter_id(), data.batches[b].meter_id());
      EXPECT_EQ(loaded[b].start_time(), data.batches[b].start_time());
      ASSERT_EQ(loaded[b].size(), data.batches[b].size());
      for (std::size_t i = 0; i < loaded[b].size(); ++i) {
        const double want = data.batches[b].values()[i];
        EXPECT_LE(std::abs(loaded[b].values()[i] - want), 1e-9 * std::abs(want));
      }
    }
  }
}

TEST(GenerateSyntheticTest, ForcedOnApplianceIsConstant) {
  const ApplianceProfile always_on{"heater", 100.0, 1e12, 1e12, 0.0, true};
  const auto data = GenerateSynthetic(std::span(&always_on, 1), 48, 3, 1);
  for (const ReadingBatch& b : data.batches) {
    for (double v : b.values()) EXPECT_EQ(v, 100.0);
  }
  for (const auto& truth : data.truth) {
    for (bool s : truth[0].states) EXPECT_TRUE(s);
  }
}

TEST(GenerateSyntheticTest, RequiresProfiles) {
  EXPECT_THROW(GenerateSynthetic({}, 10, 1, 0), InvalidArgumentError);
  const std::vector<ApplianceProfile> p = {{"x", 10.0, 2.0, 2.0, 0.0, std::nullopt}};
  EXPECT_THROW(GenerateSynthetic(p, 1, 1, 0), InvalidArgumentError);
  const std::vector<ApplianceProfile> jitter = {{"x", 10.0, 2.0, 2.0, 1.0, std::nullopt}};
  EXPECT_THROW(GenerateSynthetic(jitter, 10, 1, 0), InvalidArgumentError);
}

TEST(GenerateSyntheticTest, TwoAppliancesTakeOnlyCombinationLevels) {
  const std::vector<ApplianceProfile> p = {{"a", 100.0, 3.0, 4.0, 0.0, std::nullopt},
                                           {"b", 60.0, 5.0, 2.0, 0.0, std::nullopt}};
  // Enumerate state combinations: {off, on} x {off, on}.
  std::set<double> levels;
  for (int sa = 0; sa < 2; ++sa) {
    for (int sb = 0; sb < 2; ++sb) levels.insert(100.0 * sa + 60.0 * sb);
  }
  ASSERT_EQ(levels, (std::set<double>{0.0, 60.0, 100.0, 160.0}));
  const auto data = GenerateSynthetic(p, 96, 20, 5);
  std::set<double> seen;
  for (std::size_t b = 0; b < data.batches.size(); ++b) {
    for (std::size_t i = 0; i < data.batches[b].size(); ++i) {
      const double v = data.batches[b].values()[i];
      EXPECT_TRUE(levels.count(v)) << v;
      seen.insert(v);
      const double expected = (data.truth[b][0].states[i] ? 100.0 : 0.0) +
                              (data.truth[b][1].states[i] ? 60.0 : 0.0);
      EXPECT_NEAR(v, expected, 1e-12);
    }
  }
  EXPECT_EQ(seen, levels);
}

TEST(GenerateSyntheticTest, IsPureFunctionOfSeed) {
  const auto a = GenerateSynthetic(StandardAppliances(), 32, 4, 99);
  const auto b = GenerateSynthetic(StandardAppliances(), 32, 4, 99);
  const auto c = GenerateSynthetic(StandardAppliances(), 32, 4, 100);
  bool differs = false;
  for (std::size_t k = 0; k < a.batches.size(); ++k) {
    EXPECT_TRUE(std::equal(a.batches[k].values().begin(), a.batches[k].values().end(),
                           b.batches[k].values().begin()));
    differs = differs || !std::equal(a.batches[k].values().begin(),
                                     a.batches[k].values().end(),
                                     c.batches[k].values().begin());
  }
  EXPECT_TRUE(differs);
}

TEST(GenerateSyntheticTest, DutyCycleMatchesMeanDurations) {
  const std::vector<ApplianceProfile> p = {{"a", 10.0, 6.0, 18.0, 0.0, std::nullopt}};
  const auto data = GenerateSynthetic(p, 96, 400, 7);
  double on = 0.0, total = 0.0;
  for (const auto& truth : data.truth) {
    for (bool s : truth[0].states) {
      on += s;
      total += 1;
    }
  }
  EXPECT_NEAR(on / total, 0.25, 0.02);
}

TEST(TruthCsvTest, RoundTripsAndSplits) {
  TempDir dir("truth");
  const auto data = GenerateSynthetic(StandardAppliances(), 16, 3, 8);
  WriteCsv(data.batches, dir / "r.csv");
  WriteTruthCsv(data, dir / "t.csv");
  const TruthTable table = LoadTruthCsv(dir / "t.csv");
  EXPECT_EQ(table.appliance_names.size(), 4u);
  EXPECT_EQ(table.rows(), 48u);
  const auto batches = LoadCsv(dir / "r.csv", 16);
  const auto split = SplitTruth(table, batches);
  ASSERT_EQ(split.size(), 3u);
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_EQ(split[b][k].appliance_name, data.truth[b][k].appliance_name);
      EXPECT_EQ(split[b][k].states, data.truth[b][k].states);
    }
  }
  const std::vector<ReadingBatch> fewer(batches.begin(), batches.begin() + 2);
  EXPECT_THROW(SplitTruth(table, fewer), DimensionMismatchError);
}

TEST(ApplianceSpecTest, ParsesAndValidates) {
  const ApplianceProfile p = ParseApplianceSpec("fridge:100:20:20");
  EXPECT_EQ(p.name, "fridge");
  EXPECT_EQ(p.rated_power_watts, 100.0);
  EXPECT_EQ(p.power_jitter_fraction, 0.0);
  EXPECT_EQ(ParseApplianceSpec("x:5:1:2:0.5").power_jitter_fraction, 0.5);
  EXPECT_THROW(ParseApplianceSpec("x:5:1:2:1.0"), InvalidArgumentError);
  EXPECT_THROW(ParseApplianceSpec("x:5:1"), InvalidArgumentError);
  EXPECT_THROW(ParseApplianceSpec("x:-5:1:1"), InvalidArgumentError);
  EXPECT_THROW(ParseApplianceSpec("x:abc:1:1"), InvalidArgumentError);
}

}  // namespace
}  // namespace loadveil
