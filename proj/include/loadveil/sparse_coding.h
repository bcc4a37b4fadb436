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

// Nonnegative sparse coding of load profiles.
//
// A batch y (length t) is modelled as y ~= B a with a nonnegative
// dictionary B (t x n, unit-norm columns, usually n > t) and a sparse
// nonnegative activation a (length n). Activations minimize
//
//   F(a) = ||y - B a||_2^2 + lambda * ||a||_1,   a >= 0,
//
// and the dictionary is learnt by alternating between activation inference
// and a column-wise dictionary update.

#ifndef LOADVEIL_SPARSE_CODING_H_
#define LOADVEIL_SPARSE_CODING_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadveil/meterdata.h"

namespace loadveil {

inline constexpr double kSparsityZeroTol = 1e-10;

// Nonnegative t x n basis. Construction checks entries (finite, >= 0) and
// that every column has norm in (0, 1 + 1e-9]. Over-completeness is only
// demanded of trained dictionaries, not of every instance.
class Dictionary {
 public:
  explicit Dictionary(Eigen::MatrixXd basis);

  // Rescales each column to unit norm. Columns must be nonzero.
  static Dictionary Normalized(Eigen::MatrixXd basis);

  const Eigen::MatrixXd& basis() const { return basis_; }
  Eigen::Index t() const { return basis_.rows(); }
  Eigen::Index n() const { return basis_.cols(); }

  // Text format: `LOADVEIL-DICT v1 t=<t> n=<n>` then t rows of n values.
  void Save(const std::filesystem::path& path) const;
  static Dictionary Load(const std::filesystem::path& path);

 private:
  Eigen::MatrixXd basis_;
};

// Nonnegative activation coefficients.
class Activation {
 public:
  explicit Activation(Eigen::VectorXd coeffs);
  static Activation Zero(Eigen::Index n) {
    return Activation(Eigen::VectorXd::Zero(n));
  }

  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  Eigen::Index size() const { return coeffs_.size(); }
  double operator[](Eigen::Index i) const { return coeffs_[i]; }

 private:
  Eigen::VectorXd coeffs_;
};

enum class InitMode { kDataSegments, kRandom };

enum class ActivationSolver {
  // Lawson-Hanson style active set; terminates at an exact KKT point.
  kActiveSet,
  // Cyclic coordinate descent with soft threshold and clamp at zero.
  kCoordinateDescent,
};

struct InferenceOptions {
  ActivationSolver solver = ActivationSolver::kActiveSet;
  // Coordinate descent stops when a full sweep moves no coordinate by more
  // than this (relative to the largest coefficient).
  double cd_tol = 1e-13;
  int cd_max_sweeps = 100000;
};

struct TrainingConfig {
  Eigen::Index n = 0;
  // Unset: 0.01 * max_i |(B0^T y)_i| over all training batches, evaluated
  // on the initial dictionary.
  std::optional<double> lambda;
  int max_outer_iters = 500;
  double tol = 1e-6;
  // When set, batches whose final residual norm exceeds sigma are counted in
  // TrainingResult::sigma_violations. Not enforced during the solve.
  std::optional<double> sigma;
  std::uint64_t seed = 0;
  InitMode init_mode = InitMode::kDataSegments;
};

struct TrainingResult {
  Dictionary dictionary;
  double lambda = 0.0;
  // objectives[0] is the summed objective of the initial dictionary with its
  // optimal activations; objectives[k] follows outer iteration k.
  std::vector<double> objectives;
  int iterations = 0;
  bool converged = false;
  std::size_t sigma_violations = 0;
};

// ||y - B a||^2 + lambda * ||a||_1. Throws DimensionMismatchError.
double Objective(std::span<const double> y, const Dictionary& dict,
                 const Activation& a, double lambda);

// Minimizer of Objective over a >= 0 for fixed B.
Activation InferActivation(std::span<const double> y, const Dictionary& dict,
                           double lambda, const InferenceOptions& options = {});

// Largest violation of the nonnegative-lasso optimality conditions, divided
// by max(1, ||B^T y||_inf). For g = 2 B^T (B a - y) + lambda:
//   a_i > 0  requires g_i == 0,   a_i == 0  requires g_i >= 0.
double KktResidual(std::span<const double> y, const Dictionary& dict,
                   const Activation& a, double lambda);

// 0.01 * max_i |(B^T y)_i|; the library-wide lambda default.
double DefaultLambda(std::span<const double> y, const Dictionary& dict);

// Fraction of entries with |a_i| <= kSparsityZeroTol. Empty -> 1.
double Sparsity(const Activation& a);

// Initial t x n dictionary, columns scaled to unit norm.
//  kDataSegments: the training series are concatenated and n windows of
//    length t start at offsets UniformIndex(total) (wrapping around); an
//    all-zero window is replaced by a uniform random column.
//  kRandom: i.i.d. Uniform01 entries, column-major draw order.
// `t` is only consulted in kRandom mode when `batches` is empty.
Dictionary InitDictionary(std::span<const ReadingBatch> batches,
                          const TrainingConfig& config, Eigen::Index t = 0);

// Rescales column j of `basis` to unit norm and multiplies row j of
// `activations` (n x batches) by the old norm, keeping basis * activations
// unchanged. Zero columns are left alone.
void RenormalizeColumns(Eigen::MatrixXd& basis, Eigen::MatrixXd& activations);

// Alternating minimization. Throws NumericalError on non-finite values.
TrainingResult TrainDictionary(std::span<const ReadingBatch> batches,
                               const TrainingConfig& config);

}  // namespace loadveil

#endif  // LOADVEIL_SPARSE_CODING_H_
