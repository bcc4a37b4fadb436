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

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "loadveil/errors.h"

namespace loadveil {
namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

void CheckProbability(double f) {
  if (!(f >= 0.0 && f <= 1.0)) {
    throw InvalidArgumentError("f must lie in [0, 1], got " + std::to_string(f));
  }
}

}  // namespace

void PrivacyParams::Validate() const {
  if (!(f >= 0.0 && f < 1.0)) {
    throw InvalidArgumentError("f must lie in [0, 1), got " + std::to_string(f));
  }
  if (delta0 && !(*delta0 > 0.0 && *delta0 <= 1.0)) {
    throw InvalidArgumentError("delta0 must lie in (0, 1], got " +
                               std::to_string(*delta0));
  }
}

TransitionMatrix TransitionMatrix::Build(std::span<const double> values, double f) {
  if (values.empty()) throw InvalidArgumentError("need at least one candidate value");
  CheckProbability(f);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidArgumentError("candidate values must be distinct");
  }
  const Eigen::Index i = static_cast<Eigen::Index>(values.size());
  Eigen::MatrixXd probs = Eigen::MatrixXd::Constant(i, i, f / static_cast<double>(i));
  probs.diagonal().array() += 1.0 - f;
  return TransitionMatrix(std::vector<double>(values.begin(), values.end()),
                          std::move(probs));
}

Activation PerturbActivation(const Activation& a, double f, Rng& rng) {
  if (a.size() == 0) throw InvalidArgumentError("activation is empty");
  CheckProbability(f);
  const Eigen::Index n = a.size();
  Eigen::VectorXd out = a.coeffs();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (rng.Bernoulli(f)) {
      out[k] = a[static_cast<Eigen::Index>(rng.UniformIndex(static_cast<std::uint64_t>(n)))];
    }
  }
  return Activation(std::move(out));
}

double EpsilonEmpirical(const TransitionMatrix& tm) {
  const Eigen::MatrixXd& p = tm.probs();
  double eps = 0.0;
  // The worst ratio within a column is its max over its min.
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    const double hi = p.col(c).maxCoeff();
    const double lo = p.col(c).minCoeff();
    if (hi == 0.0) continue;
    if (lo == 0.0) return kInfinity;
    eps = std::max(eps, std::log(hi / lo));
  }
  return eps;
}

double EpsilonMechanism(Eigen::Index i, double f) {
  if (i <= 0) throw InvalidArgumentError("candidate count must be positive");
  CheckProbability(f);
  if (i == 1) return 0.0;
  if (f == 0.0) return kInfinity;
  const double off = f / static_cast<double>(i);
  return std::log((1.0 - f + off) / off);
}

double EpsilonSparsityBound(double f, double delta0) {
  if (f == 0.0) {
    throw UnboundedPrivacyError("f = 0 performs no randomization; epsilon is unbounded");
  }
  if (!(f > 0.0 && f < 1.0)) {
    throw InvalidArgumentError("f must lie in (0, 1), got " + std::to_string(f));
  }
  if (!(delta0 > 0.0 && delta0 <= 1.0)) {
    throw InvalidArgumentError("delta0 must lie in (0, 1], got " +
                               std::to_string(delta0));
  }
  const double ratio = (1.0 - f) / (delta0 * f);
  if (ratio < 1.0) {
    throw InvalidArgumentError("(1 - f) / (delta0 * f) = " + std::to_string(ratio) +
                               " < 1 gives a negative epsilon");
  }
  return std::log(ratio);
}

double ClampDelta0(double sparsity) {
  if (!std::isfinite(sparsity)) return 1.0;
  return std::clamp(sparsity, 1e-3, 1.0);
}

bool RapporBit(bool x, double f, Rng& rng) {
  CheckProbability(f);
  const double u = rng.Uniform01();
  if (u < 0.5 * f) return true;
  if (u < f) return false;
  return x;
}

double ComposeParallel(std::span<const double> epsilons) {
  if (epsilons.empty()) throw InvalidArgumentError("no epsilons to compose");
  double worst = 0.0;
  for (double e : epsilons) {
    if (!(e >= 0.0)) throw InvalidArgumentError("epsilons must be >= 0");
    worst = std::max(worst, e);
  }
  return worst;
}

}  // namespace loadveil
