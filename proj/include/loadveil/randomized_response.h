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

// Randomized response over activation vectors and its privacy accounting.
//
// Each activation entry is kept with probability 1 - f and otherwise
// replaced by an entry drawn uniformly from the whole vector (itself
// included). Two budgets are exposed:
//   * EpsilonSparsityBound: ln((1 - f) / (delta0 * f)), a bound driven by
//     delta0, the activation's zero fraction;
//   * EpsilonEmpirical: the tight per-coordinate epsilon of the mechanism
//     as implemented, read off its transition matrix.
// The two generally disagree; reports carry both.

#ifndef LOADVEIL_RANDOMIZED_RESPONSE_H_
#define LOADVEIL_RANDOMIZED_RESPONSE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "loadveil/random.h"
#include "loadveil/sparse_coding.h"

namespace loadveil {

struct PrivacyParams {
  // Replacement probability. f = 0 disables randomization and is accepted
  // only as an identity test mode (its budget is unbounded).
  double f = 0.5;
  // Overrides the measured sparsity fed to EpsilonSparsityBound.
  std::optional<double> delta0;
  std::uint64_t seed = 0;

  // Throws InvalidArgumentError unless 0 <= f < 1 and delta0 (if set) lies
  // in (0, 1].
  void Validate() const;
};

// P(output = values[c] | input = values[r]) = f / i + (1 - f) [r == c].
class TransitionMatrix {
 public:
  // Throws InvalidArgumentError on duplicate values, empty input, or f
  // outside [0, 1].
  static TransitionMatrix Build(std::span<const double> values, double f);

  const std::vector<double>& candidate_values() const { return values_; }
  const Eigen::MatrixXd& probs() const { return probs_; }
  Eigen::Index size() const { return probs_.rows(); }

 private:
  TransitionMatrix(std::vector<double> values, Eigen::MatrixXd probs)
      : values_(std::move(values)), probs_(std::move(probs)) {}

  std::vector<double> values_;
  Eigen::MatrixXd probs_;
};

// Randomizes each entry independently. Requires a non-empty activation and
// 0 <= f <= 1 (the endpoints are allowed here for testing).
Activation PerturbActivation(const Activation& a, double f, Rng& rng);

// max over columns c and row pairs (r1, r2) of ln(P[r1][c] / P[r2][c]).
// Returns +infinity when a column mixes zero and nonzero entries.
double EpsilonEmpirical(const TransitionMatrix& tm);

// Tight epsilon of the uniform-replacement mechanism over i candidates:
// ln((1 - f + f/i) / (f/i)). +infinity at f = 0.
double EpsilonMechanism(Eigen::Index i, double f);

// ln((1 - f) / (delta0 * f)).
// Throws UnboundedPrivacyError at f = 0, InvalidArgumentError when f is not
// in (0, 1), delta0 is not in (0, 1], or the ratio is below 1 (negative
// epsilon).
double EpsilonSparsityBound(double f, double delta0);

// Clamps a measured zero fraction into [1e-3, 1] for use as delta0.
double ClampDelta0(double sparsity);

// Bit flip baseline: 1 w.p. f/2, 0 w.p. f/2, x w.p. 1 - f.
bool RapporBit(bool x, double f, Rng& rng);

// Parallel composition over disjoint inputs: the maximum epsilon.
// Throws InvalidArgumentError for an empty or negative input.
double ComposeParallel(std::span<const double> epsilons);

}  // namespace loadveil

#endif  // LOADVEIL_RANDOMIZED_RESPONSE_H_
