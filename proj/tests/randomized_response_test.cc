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

#include "loadveil/randomized_response.h"

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "loadveil/errors.h"
#include "loadveil/random.h"

namespace loadveil {
namespace {

Activation MakeActivation(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return Activation(v);
}

// Largest log-ratio over all (r1, r2, c) triples, computed from the raw
// probability definition rather than the stored matrix.
double BruteForceEpsilon(int i, double f) {
  auto prob = [&](int r, int c) { return f / i + (r == c ? 1.0 - f : 0.0); };
  double best = 0.0;
  for (int c = 0; c < i; ++c) {
    for (int r1 = 0; r1 < i; ++r1) {
      for (int r2 = 0; r2 < i; ++r2) {
        best = std::max(best, std::log(prob(r1, c) / prob(r2, c)));
      }
    }
  }
  return best;
}

std::vector<double> Candidates(int i) {
  std::vector<double> v;
  for (int k = 0; k < i; ++k) v.push_back(1.5 * k);
  return v;
}

TEST(PrivacyParamsTest, Validate) {
  PrivacyParams p;
  EXPECT_NO_THROW(p.Validate());
  p.f = 0.0;
  EXPECT_NO_THROW(p.Validate());
  p.f = 1.0;
  EXPECT_THROW(p.Validate(), InvalidArgumentError);
  p.f = -0.1;
  EXPECT_THROW(p.Validate(), InvalidArgumentError);
  p.f = 0.5;
  p.delta0 = 0.0;
  EXPECT_THROW(p.Validate(), InvalidArgumentError);
  p.delta0 = 1.0;
  EXPECT_NO_THROW(p.Validate());
}

TEST(PerturbActivationTest, ZeroFIsIdentity) {
  Rng rng(1);
  const Activation a = MakeActivation({3.0, 0.0, 1.5, 2.0});
  for (int trial = 0; trial < 100; ++trial) {
    EXPECT_EQ(PerturbActivation(a, 0.0, rng).coeffs(), a.coeffs());
  }
}

TEST(PerturbActivationTest, SingleEntryIsFixed) {
  Rng rng(2);
  const Activation a = MakeActivation({7.0});
  for (double f : {0.0, 0.5, 1.0}) {
    EXPECT_EQ(PerturbActivation(a, f, rng)[0], 7.0);
  }
}

TEST(PerturbActivationTest, RejectsEmptyAndBadF) {
  Rng rng(3);
  EXPECT_THROW(PerturbActivation(Activation::Zero(0), 0.5, rng), InvalidArgumentError);
  EXPECT_THROW(PerturbActivation(MakeActivation({1.0}), 1.5, rng), InvalidArgumentError);
}

TEST(PerturbActivationTest, OutputsAreDrawnFromInputValues) {
  Rng rng(4);
  const Activation a = MakeActivation({1.0, 2.0, 3.0, 0.0, 5.0});
  for (int trial = 0; trial < 200; ++trial) {
    const Activation out = PerturbActivation(a, 0.7, rng);
    ASSERT_EQ(out.size(), a.size());
    for (Eigen::Index k = 0; k < out.size(); ++k) {
      EXPECT_TRUE((a.coeffs().array() == out[k]).any());
    }
  }
}

TEST(PerturbActivationTest, MonteCarloMatchesAnalyticProbabilities) {
  Rng rng(5);
  const Activation a = MakeActivation({10.0, 0.0, 0.0, 0.0});
  constexpr int kTrials = 1000000;
  int kept = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    kept += PerturbActivation(a, 0.5, rng)[0] == 10.0;
  }
  const double p = static_cast<double>(kept) / kTrials;
  EXPECT_NEAR(p, 0.625, 0.002);
  EXPECT_NEAR(1.0 - p, 0.375, 0.002);
}

TEST(PerturbActivationTest, SumIsUnbiased) {
  Rng rng(6);
  const Activation a = MakeActivation({4.0, 0.0, 1.0, 0.0, 0.0, 9.0, 0.5, 0.0});
  const double expected = a.coeffs().sum();
  constexpr int kTrials = 100000;
  double total = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    total += PerturbActivation(a, 0.6, rng).coeffs().sum();
  }
  EXPECT_NEAR(total / kTrials, expected, 0.01 * expected);
}

TEST(PerturbActivationTest, DeterministicPerSeed) {
  const Activation a = MakeActivation({1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  Rng r1(77), r2(77);
  for (int trial = 0; trial < 20; ++trial) {
    EXPECT_EQ(PerturbActivation(a, 0.5, r1).coeffs(), PerturbActivation(a, 0.5, r2).coeffs());
  }
}

TEST(TransitionMatrixTest, Examples) {
  const std::vector<double> two = {0.0, 1.0};
  EXPECT_TRUE(TransitionMatrix::Build(two, 1.0).probs().isApprox(
      Eigen::MatrixXd::Constant(2, 2, 0.5)));
  EXPECT_EQ(TransitionMatrix::Build(two, 0.0).probs(), Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd p4 = TransitionMatrix::Build(Candidates(4), 0.5).probs();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(p4(r, c), r == c ? 0.625 : 0.125, 1e-15);
  }
}

TEST(TransitionMatrixTest, RowsAreStochastic) {
  for (int i = 1; i <= 8; ++i) {
    for (double f : {0.0, 0.1, 0.3, 0.5, 0.9, 1.0}) {
      const Eigen::MatrixXd p = TransitionMatrix::Build(Candidates(i), f).probs();
      EXPECT_GE(p.minCoeff(), 0.0);
      for (int r = 0; r < i; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
    }
  }
}

TEST(TransitionMatrixTest, RejectsBadInput) {
  const std::vector<double> dup = {1.0, 2.0, 1.0};
  EXPECT_THROW(TransitionMatrix::Build(dup, 0.5), InvalidArgumentError);
  EXPECT_THROW(TransitionMatrix::Build(std::vector<double>{}, 0.5), InvalidArgumentError);
  EXPECT_THROW(TransitionMatrix::Build(Candidates(2), 1.2), InvalidArgumentError);
}

TEST(TransitionMatrixTest, MatchesPerturbationFrequencies) {
  // Row 0 of the i = 4 matrix against the empirical output distribution.
  const std::vector<double> values = {10.0, 20.0, 30.0, 40.0};
  const Eigen::MatrixXd p = TransitionMatrix::Build(values, 0.5).probs();
  const Activation a = MakeActivation({10.0, 20.0, 30.0, 40.0});
  Rng rng(8);
  constexpr int kTrials = 200000;
  std::vector<int> hits(4, 0);
  for (int trial = 0; trial < kTrials; ++trial) {
    const double out = PerturbActivation(a, 0.5, rng)[0];
    ++hits[static_cast<int>(out / 10.0) - 1];
  }
  for (int c = 0; c < 4; ++c) {
    const double q = p(0, c);
    const double se = std::sqrt(q * (1 - q) / kTrials);
    EXPECT_NEAR(static_cast<double>(hits[c]) / kTrials, q, 4 * se);
  }
}

TEST(EpsilonEmpiricalTest, Examples) {
  EXPECT_EQ(EpsilonEmpirical(TransitionMatrix::Build(Candidates(3), 1.0)), 0.0);
  EXPECT_EQ(EpsilonEmpirical(TransitionMatrix::Build(Candidates(1), 0.4)), 0.0);
  EXPECT_NEAR(EpsilonEmpirical(TransitionMatrix::Build(Candidates(4), 0.5)), std::log(5.0),
              1e-12);
  EXPECT_TRUE(std::isinf(EpsilonEmpirical(TransitionMatrix::Build(Candidates(3), 0.0))));
}

TEST(EpsilonEmpiricalTest, MatchesBruteForceAndClosedForm) {
  for (int i = 1; i <= 8; ++i) {
    for (double f : {0.1, 0.3, 0.5, 0.9}) {
      const double eps = EpsilonEmpirical(TransitionMatrix::Build(Candidates(i), f));
      EXPECT_NEAR(eps, BruteForceEpsilon(i, f), 1e-12) << i << " " << f;
      EXPECT_NEAR(eps, EpsilonMechanism(i, f), 1e-12) << i << " " << f;
    }
  }
}

TEST(EpsilonEmpiricalTest, RatioBoundIsTight) {
  for (int i = 2; i <= 8; ++i) {
    for (double f : {0.1, 0.3, 0.5, 0.9}) {
      const Eigen::MatrixXd p = TransitionMatrix::Build(Candidates(i), f).probs();
      const double bound = std::exp(EpsilonEmpirical(TransitionMatrix::Build(Candidates(i), f)));
      double worst = 0.0;
      for (int c = 0; c < i; ++c) {
        for (int r1 = 0; r1 < i; ++r1) {
          for (int r2 = 0; r2 < i; ++r2) {
            const double ratio = p(r1, c) / p(r2, c);
            EXPECT_LE(ratio, bound * (1 + 1e-12));
            worst = std::max(worst, ratio);
          }
        }
      }
      EXPECT_NEAR(worst, bound, 1e-12 * bound);
    }
  }
}

TEST(EpsilonMechanismTest, RejectsBadArguments) {
  EXPECT_THROW(EpsilonMechanism(0, 0.5), InvalidArgumentError);
  EXPECT_EQ(EpsilonMechanism(1, 0.5), 0.0);
}

TEST(EpsilonSparsityBoundTest, Examples) {
  EXPECT_NEAR(EpsilonSparsityBound(0.5, 0.05), std::log(20.0), 1e-12);
  EXPECT_NEAR(EpsilonSparsityBound(0.5, 0.05), 2.99573, 1e-5);
  EXPECT_EQ(EpsilonSparsityBound(0.5, 1.0), 0.0);
  EXPECT_THROW(EpsilonSparsityBound(0.9, 0.5), InvalidArgumentError);
  EXPECT_THROW(EpsilonSparsityBound(0.0, 0.5), UnboundedPrivacyError);
  EXPECT_THROW(EpsilonSparsityBound(0.5, 0.0), InvalidArgumentError);
  EXPECT_THROW(EpsilonSparsityBound(1.0, 0.5), InvalidArgumentError);
}

TEST(EpsilonSparsityBoundTest, MatchesFormulaOnGrid) {
  for (double f : {0.05, 0.1, 0.3, 0.5}) {
    for (double d : {0.01, 0.05, 0.2, 0.5}) {
      const double ratio = (1 - f) / (d * f);
      if (ratio < 1) continue;
      EXPECT_NEAR(EpsilonSparsityBound(f, d), std::log(ratio), 1e-12);
    }
  }
}

TEST(ClampDelta0Test, Clamps) {
  EXPECT_EQ(ClampDelta0(0.0), 1e-3);
  EXPECT_EQ(ClampDelta0(0.25), 0.25);
  EXPECT_EQ(ClampDelta0(1.0), 1.0);
}

TEST(RapporBitTest, Examples) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    EXPECT_TRUE(RapporBit(true, 0.0, rng));
    EXPECT_FALSE(RapporBit(false, 0.0, rng));
  }
  constexpr int kTrials = 1000000;
  int ones = 0;
  for (int trial = 0; trial < kTrials; ++trial) ones += RapporBit(false, 1.0, rng);
  EXPECT_NEAR(static_cast<double>(ones) / kTrials, 0.5, 0.002);
  ones = 0;
  for (int trial = 0; trial < kTrials; ++trial) ones += RapporBit(true, 0.5, rng);
  EXPECT_NEAR(static_cast<double>(ones) / kTrials, 0.75, 0.002);
}

TEST(ComposeParallelTest, Examples) {
  EXPECT_EQ(ComposeParallel(std::vector<double>{1.0, 2.0, 0.5}), 2.0);
  EXPECT_EQ(ComposeParallel(std::vector<double>{3.2}), 3.2);
  EXPECT_EQ(ComposeParallel(std::vector<double>{1.1, 1.1}), 1.1);
  EXPECT_THROW(ComposeParallel(std::vector<double>{}), InvalidArgumentError);
  EXPECT_THROW(ComposeParallel(std::vector<double>{1.0, -1.0}), InvalidArgumentError);
}

TEST(RngTest, UniformIndexCoversRange) {
  Rng rng(10);
  std::vector<int> hits(7, 0);
  for (int trial = 0; trial < 70000; ++trial) ++hits[rng.UniformIndex(7)];
  for (int h : hits) EXPECT_NEAR(h, 10000, 500);
  EXPECT_NE(DeriveSeed(1, 0), DeriveSeed(1, 1));
  EXPECT_NE(DeriveSeed(1, 0), DeriveSeed(2, 0));
}

}  // namespace
}  // namespace loadveil
