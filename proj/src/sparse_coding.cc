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

#include "loadveil/sparse_coding.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include "loadveil/errors.h"
#include "loadveil/random.h"

namespace loadveil {
namespace {

constexpr double kColumnNormSlack = 1e-9;
constexpr char kDictMagic[] = "LOADVEIL-DICT";

Eigen::Map<const Eigen::VectorXd> AsVector(std::span<const double> y) {
  return Eigen::Map<const Eigen::VectorXd>(y.data(),
                                           static_cast<Eigen::Index>(y.size()));
}

void CheckShapes(std::span<const double> y, const Dictionary& dict) {
  if (static_cast<Eigen::Index>(y.size()) != dict.t()) {
    throw DimensionMismatchError("batch length " + std::to_string(y.size()) +
                                 " does not match dictionary rows " +
                                 std::to_string(dict.t()));
  }
}

void CheckFinite(std::span<const double> y) {
  for (double v : y) {
    if (!std::isfinite(v)) throw InvalidArgumentError("non-finite reading");
  }
}

void CheckLambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgumentError("lambda must be finite and >= 0");
  }
}

// Solves G_PP s = d_P for the passive set. Returns false if the subsystem is
// numerically singular or inconsistent.
bool SolvePassive(const Eigen::MatrixXd& gram, const Eigen::VectorXd& d,
                  const std::vector<Eigen::Index>& passive, double scale,
                  Eigen::VectorXd* s) {
  const Eigen::Index p = static_cast<Eigen::Index>(passive.size());
  Eigen::MatrixXd sub(p, p);
  Eigen::VectorXd rhs(p);
  for (Eigen::Index r = 0; r < p; ++r) {
    rhs[r] = d[passive[r]];
    for (Eigen::Index c = 0; c < p; ++c) sub(r, c) = gram(passive[r], passive[c]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sub);
  if (ldlt.info() != Eigen::Success) return false;
  Eigen::VectorXd x = ldlt.solve(rhs);
  // One round of iterative refinement.
  x += ldlt.solve(rhs - sub * x);
  if (!x.allFinite()) return false;
  const double residual = (sub * x - rhs).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * scale) return false;
  *s = std::move(x);
  return true;
}

// Lawson-Hanson active set method for
//   min 0.5 a^T G a - d^T a   s.t. a >= 0,
// which is Objective/2 up to a constant when d = B^T y - lambda/2.
// `a` carries a feasible warm start in and the solution out.
void ActiveSetSolve(const Eigen::MatrixXd& gram, const Eigen::VectorXd& d,
                    double scale, Eigen::VectorXd& a) {
  const Eigen::Index n = gram.rows();
  const double entry_tol = 1e-12 * scale;
  std::vector<char> in_passive(static_cast<std::size_t>(n), 0);
  std::vector<char> blocked(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> passive;
  Eigen::VectorXd s;

  auto rebuild_passive = [&]() {
    passive.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      in_passive[static_cast<std::size_t>(i)] = a[i] > 0.0;
      if (a[i] > 0.0) passive.push_back(i);
    }
  };

  // Singular passive set: step along a null direction of G_PP, oriented not
  // to increase the objective, until a coordinate reaches zero.
  auto null_step = [&]() -> bool {
    const Eigen::Index p = static_cast<Eigen::Index>(passive.size());
    Eigen::MatrixXd sub(p, p);
    Eigen::VectorXd grad(p);
    const Eigen::VectorXd full_grad = gram * a - d;
    for (Eigen::Index r = 0; r < p; ++r) {
      grad[r] = full_grad[passive[r]];
      for (Eigen::Index c = 0; c < p; ++c) sub(r, c) = gram(passive[r], passive[c]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub);
    if (eig.info() != Eigen::Success) return false;
    const double largest = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    if (eig.eigenvalues()[0] > 1e-10 * largest) return false;
    Eigen::VectorXd v = eig.eigenvectors().col(0);
    if (grad.dot(v) > 0.0) v = -v;
    double alpha = std::numeric_limits<double>::infinity();
    Eigen::Index limiting = -1;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (v[k] < 0.0) {
        const double step = a[passive[k]] / -v[k];
        if (step < alpha) {
          alpha = step;
          limiting = k;
        }
      }
    }
    if (limiting < 0) return false;
    for (Eigen::Index k = 0; k < p; ++k) {
      a[passive[k]] = std::max(0.0, a[passive[k]] + alpha * v[k]);
    }
    a[passive[limiting]] = 0.0;
    rebuild_passive();
    return true;
  };

  // Moves `a` towards the passive-set solution until it is reached, dropping
  // coordinates that hit zero on the way. Returns false if a solve failed.
  auto descend = [&]() -> bool {
    while (!passive.empty()) {
      if (!SolvePassive(gram, d, passive, scale, &s)) {
        if (!null_step()) return false;
        continue;
      }
      double alpha = 1.0;
      Eigen::Index limiting = -1;
      for (std::size_t k = 0; k < passive.size(); ++k) {
        if (s[static_cast<Eigen::Index>(k)] <= 0.0) {
          const double ai = a[passive[k]];
          const double step = ai / (ai - s[static_cast<Eigen::Index>(k)]);
          if (step < alpha) {
            alpha = step;
            limiting = static_cast<Eigen::Index>(k);
          }
        }
      }
      if (limiting < 0) {
        for (std::size_t k = 0; k < passive.size(); ++k) {
          a[passive[k]] = s[static_cast<Eigen::Index>(k)];
        }
        return true;
      }
      for (std::size_t k = 0; k < passive.size(); ++k) {
        const Eigen::Index i = passive[k];
        a[i] += alpha * (s[static_cast<Eigen::Index>(k)] - a[i]);
        if (a[i] < 0.0) a[i] = 0.0;
      }
      a[passive[static_cast<std::size_t>(limiting)]] = 0.0;
      rebuild_passive();
    }
    return true;
  };

  a = a.cwiseMax(0.0);
  rebuild_passive();
  if (!descend()) {
    a.setZero();
    rebuild_passive();
  }

  const int max_outer = static_cast<int>(3 * n + 20);
  for (int iter = 0; iter < max_outer; ++iter) {
    const Eigen::VectorXd w = d - gram * a;
    Eigen::Index entering = -1;
    double best = entry_tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_passive[static_cast<std::size_t>(i)] ||
          blocked[static_cast<std::size_t>(i)]) {
        continue;
      }
      if (w[i] > best) {
        best = w[i];
        entering = i;
      }
    }
    if (entering < 0) break;

    const Eigen::VectorXd before = a;
    passive.push_back(entering);
    in_passive[static_cast<std::size_t>(entering)] = 1;
    // The entering coordinate starts at zero; give descend() a positive seed
    // so the ratio test treats it as passive.
    bool ok = true;
    if (SolvePassive(gram, d, passive, scale, &s) &&
        s[static_cast<Eigen::Index>(passive.size() - 1)] <= 0.0) {
      ok = false;
    }
    if (ok) {
      a[entering] = std::numeric_limits<double>::min();
      ok = descend();
    }
    if (!ok) {
      a = before;
      blocked[static_cast<std::size_t>(entering)] = 1;
      rebuild_passive();
    }
  }
}

void CoordinateDescentSolve(const Eigen::MatrixXd& gram, const Eigen::VectorXd& d,
                            const InferenceOptions& options, Eigen::VectorXd& a) {
  const Eigen::Index n = gram.rows();
  a = a.cwiseMax(0.0);
  Eigen::VectorXd ga = gram * a;
  for (int sweep = 0; sweep < options.cd_max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double gii = gram(i, i);
      const double old = a[i];
      // Coordinate minimizer of the half objective with the others fixed.
      const double updated = std::max(0.0, old + (d[i] - ga[i]) / gii);
      const double delta = updated - old;
      if (delta != 0.0) {
        a[i] = updated;
        ga.noalias() += delta * gram.col(i);
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    const double magnitude = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    if (max_delta <= options.cd_tol * magnitude) break;
  }
}

void Solve(const Eigen::MatrixXd& gram, const Eigen::VectorXd& btY, double lambda,
           const InferenceOptions& options, Eigen::VectorXd& a) {
  const Eigen::VectorXd d = btY.array() - 0.5 * lambda;
  const double scale = std::max(1.0, btY.cwiseAbs().maxCoeff());
  if (options.solver == ActivationSolver::kActiveSet) {
    ActiveSetSolve(gram, d, scale, a);
  } else {
    CoordinateDescentSolve(gram, d, options, a);
  }
}

void CheckMatrixFinite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericalError(std::string("non-finite values in ") + what +
                         "; training diverged");
  }
}

double SummedObjective(const Eigen::MatrixXd& y, const Eigen::MatrixXd& basis,
                       const Eigen::MatrixXd& activations, double lambda) {
  return (y - basis * activations).squaredNorm() + lambda * activations.sum();
}

}  // namespace

Dictionary::Dictionary(Eigen::MatrixXd basis) : basis_(std::move(basis)) {
  if (basis_.rows() == 0 || basis_.cols() == 0) {
    throw InvalidArgumentError("dictionary must be non-empty");
  }
  if (!basis_.allFinite() || basis_.minCoeff() < 0.0) {
    throw InvalidArgumentError("dictionary entries must be finite and >= 0");
  }
  for (Eigen::Index j = 0; j < basis_.cols(); ++j) {
    const double norm = basis_.col(j).norm();
    if (!(norm > 0.0) || norm > 1.0 + kColumnNormSlack) {
      throw InvalidArgumentError("dictionary column " + std::to_string(j) +
                                 " has norm " + std::to_string(norm) +
                                 ", expected (0, 1]");
    }
  }
}

Dictionary Dictionary::Normalized(Eigen::MatrixXd basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    const double norm = basis.col(j).norm();
    if (!(norm > 0.0)) {
      throw InvalidArgumentError("cannot normalize zero column " + std::to_string(j));
    }
    basis.col(j) /= norm;
  }
  return Dictionary(std::move(basis));
}

void Dictionary::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << kDictMagic << " v1 t=" << t() << " n=" << n() << '\n';
  for (Eigen::Index r = 0; r < t(); ++r) {
    for (Eigen::Index c = 0; c < n(); ++c) {
      if (c != 0) out << ' ';
      out << FormatDouble(basis_(r, c));
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

Dictionary Dictionary::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw ParseError(1, "missing dictionary header");
  long long t = 0, n = 0;
  {
    std::istringstream hs(header);
    std::string magic, version, t_field, n_field;
    hs >> magic >> version >> t_field >> n_field;
    if (magic != kDictMagic || version != "v1" || t_field.rfind("t=", 0) != 0 ||
        n_field.rfind("n=", 0) != 0) {
      throw ParseError(1, "expected 'LOADVEIL-DICT v1 t=<t> n=<n>'");
    }
    try {
      t = std::stoll(t_field.substr(2));
      n = std::stoll(n_field.substr(2));
    } catch (const std::exception&) {
      throw ParseError(1, "bad dictionary dimensions");
    }
    if (t <= 0 || n <= 0) throw ParseError(1, "dictionary dimensions must be positive");
  }
  Eigen::MatrixXd basis(t, n);
  std::string line;
  for (long long r = 0; r < t; ++r) {
    const std::size_t line_no = static_cast<std::size_t>(r) + 2;
    if (!std::getline(in, line)) {
      throw ParseError(line_no, "expected " + std::to_string(t) + " basis rows");
    }
    std::istringstream ls(line);
    std::string token;
    long long c = 0;
    while (ls >> token) {
      if (c >= n) throw ParseError(line_no, "too many values in row");
      const std::optional<double> v = ParseDouble(token);
      if (!v) throw ParseError(line_no, "bad value '" + token + "'");
      basis(r, c++) = *v;
    }
    if (c != n) {
      throw ParseError(line_no, "expected " + std::to_string(n) + " values, got " +
                                    std::to_string(c));
    }
  }
  return Dictionary(std::move(basis));
}

Activation::Activation(Eigen::VectorXd coeffs) : coeffs_(std::move(coeffs)) {
  if (!coeffs_.allFinite() || (coeffs_.size() > 0 && coeffs_.minCoeff() < 0.0)) {
    throw InvalidArgumentError("activation entries must be finite and >= 0");
  }
}

double Objective(std::span<const double> y, const Dictionary& dict,
                 const Activation& a, double lambda) {
  CheckShapes(y, dict);
  if (a.size() != dict.n()) {
    throw DimensionMismatchError("activation length " + std::to_string(a.size()) +
                                 " does not match dictionary columns " +
                                 std::to_string(dict.n()));
  }
  return (AsVector(y) - dict.basis() * a.coeffs()).squaredNorm() +
         lambda * a.coeffs().lpNorm<1>();
}

Activation InferActivation(std::span<const double> y, const Dictionary& dict,
                           double lambda, const InferenceOptions& options) {
  CheckShapes(y, dict);
  CheckFinite(y);
  CheckLambda(lambda);
  const Eigen::MatrixXd gram = dict.basis().transpose() * dict.basis();
  const Eigen::VectorXd bty = dict.basis().transpose() * AsVector(y);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(dict.n());
  Solve(gram, bty, lambda, options, a);
  if (!a.allFinite()) throw NumericalError("activation solve produced non-finite values");
  return Activation(std::move(a));
}

double KktResidual(std::span<const double> y, const Dictionary& dict,
                   const Activation& a, double lambda) {
  CheckShapes(y, dict);
  const Eigen::VectorXd bty = dict.basis().transpose() * AsVector(y);
  const Eigen::VectorXd grad =
      2.0 * (dict.basis().transpose() * (dict.basis() * a.coeffs()) - bty).array() +
      lambda;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double violation = a[i] > 0.0 ? std::abs(grad[i]) : std::max(0.0, -grad[i]);
    worst = std::max(worst, violation);
  }
  return worst / std::max(1.0, bty.cwiseAbs().maxCoeff());
}

double DefaultLambda(std::span<const double> y, const Dictionary& dict) {
  CheckShapes(y, dict);
  return 0.01 * (dict.basis().transpose() * AsVector(y)).cwiseAbs().maxCoeff();
}

double Sparsity(const Activation& a) {
  if (a.size() == 0) return 1.0;
  Eigen::Index zeros = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::abs(a[i]) <= kSparsityZeroTol) ++zeros;
  }
  return static_cast<double>(zeros) / static_cast<double>(a.size());
}

Dictionary InitDictionary(std::span<const ReadingBatch> batches,
                          const TrainingConfig& config, Eigen::Index t) {
  if (config.n <= 0) throw InvalidArgumentError("basis count n must be positive");
  if (!batches.empty()) t = static_cast<Eigen::Index>(batches.front().size());
  if (t <= 0) throw InvalidArgumentError("batch length t must be positive");
  for (const ReadingBatch& b : batches) {
    if (static_cast<Eigen::Index>(b.size()) != t) {
      throw DimensionMismatchError("training batches must share one length");
    }
  }

  Rng rng(config.seed);
  Eigen::MatrixXd basis(t, config.n);
  auto random_column = [&](Eigen::Index j) {
    for (Eigen::Index r = 0; r < t; ++r) basis(r, j) = rng.Uniform01();
  };

  if (config.init_mode == InitMode::kRandom) {
    for (Eigen::Index j = 0; j < config.n; ++j) random_column(j);
  } else {
    if (batches.empty()) {
      throw InvalidArgumentError("data_segments initialization needs training data");
    }
    std::vector<double> series;
    series.reserve(batches.size() * static_cast<std::size_t>(t));
    for (const ReadingBatch& b : batches) {
      series.insert(series.end(), b.values().begin(), b.values().end());
    }
    const std::size_t total = series.size();
    for (Eigen::Index j = 0; j < config.n; ++j) {
      const std::size_t offset = rng.UniformIndex(total);
      for (Eigen::Index r = 0; r < t; ++r) {
        basis(r, j) = series[(offset + static_cast<std::size_t>(r)) % total];
      }
      if (!(basis.col(j).norm() > 0.0)) random_column(j);
    }
  }
  for (Eigen::Index j = 0; j < config.n; ++j) {
    // Uniform01 can in principle return an all-zero column.
    while (!(basis.col(j).norm() > 0.0)) random_column(j);
  }
  return Dictionary::Normalized(std::move(basis));
}

void RenormalizeColumns(Eigen::MatrixXd& basis, Eigen::MatrixXd& activations) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    const double norm = basis.col(j).norm();
    if (!(norm > 0.0)) continue;
    basis.col(j) /= norm;
    activations.row(j) *= norm;
  }
}

TrainingResult TrainDictionary(std::span<const ReadingBatch> batches,
                               const TrainingConfig& config) {
  if (batches.empty()) throw InvalidArgumentError("training set is empty");
  const Eigen::Index t = static_cast<Eigen::Index>(batches.front().size());
  if (config.n <= t) {
    throw InvalidArgumentError("training requires an over-complete dictionary (n=" +
                               std::to_string(config.n) + " must exceed t=" +
                               std::to_string(t) + ")");
  }
  if (!(config.tol > 0.0)) throw InvalidArgumentError("tol must be positive");
  if (config.max_outer_iters < 0) {
    throw InvalidArgumentError("max_outer_iters must be >= 0");
  }
  if (config.lambda) CheckLambda(*config.lambda);

  Dictionary initial = InitDictionary(batches, config);
  const Eigen::Index n = config.n;
  const Eigen::Index count = static_cast<Eigen::Index>(batches.size());

  Eigen::MatrixXd y(t, count);
  for (Eigen::Index b = 0; b < count; ++b) {
    const auto values = batches[static_cast<std::size_t>(b)].values();
    y.col(b) = AsVector(values);
  }

  Eigen::MatrixXd basis = initial.basis();
  double lambda = 0.0;
  if (config.lambda) {
    lambda = *config.lambda;
  } else {
    lambda = 0.01 * (basis.transpose() * y).cwiseAbs().maxCoeff();
  }

  const InferenceOptions options;
  Eigen::MatrixXd activations = Eigen::MatrixXd::Zero(n, count);
  auto infer_all = [&]() {
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    const Eigen::MatrixXd bty = basis.transpose() * y;
    for (Eigen::Index b = 0; b < count; ++b) {
      Eigen::VectorXd a = activations.col(b);
      Solve(gram, bty.col(b), lambda, options, a);
      activations.col(b) = a;
    }
    CheckMatrixFinite(activations, "activations");
  };

  TrainingResult result{std::move(initial), lambda, {}, 0, false, 0};
  infer_all();
  result.objectives.push_back(SummedObjective(y, basis, activations, lambda));

  for (int iter = 1; iter <= config.max_outer_iters; ++iter) {
    // Column-wise exact minimization of ||Y - B A||^2 over
    // {b_j >= 0, ||b_j|| <= 1}. The per-column Hessian is a multiple of the
    // identity, so clamping then scaling into the ball is the exact minimizer.
    const Eigen::MatrixXd aat = activations * activations.transpose();
    const Eigen::MatrixXd yat = y * activations.transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = aat(j, j);
      if (!(h > 0.0)) continue;
      Eigen::VectorXd col =
          basis.col(j) + (yat.col(j) - basis * aat.col(j)) / h;
      col = col.cwiseMax(0.0);
      const double norm = col.norm();
      if (!(norm > 1e-12)) continue;  // keep the old column
      if (norm > 1.0) col /= norm;
      basis.col(j) = col;
    }
    CheckMatrixFinite(basis, "dictionary");
    // Scaling columns up to unit norm shrinks the matching activations, which
    // can only lower the l1 term.
    RenormalizeColumns(basis, activations);
    infer_all();

    const double objective = SummedObjective(y, basis, activations, lambda);
    if (!std::isfinite(objective)) {
      throw NumericalError("objective became non-finite at iteration " +
                           std::to_string(iter));
    }
    const double previous = result.objectives.back();
    result.objectives.push_back(objective);
    result.iterations = iter;
    const double decrease = (previous - objective) / std::max(previous, 1e-300);
    if (decrease < config.tol) {
      result.converged = true;
      break;
    }
  }

  if (config.sigma) {
    for (Eigen::Index b = 0; b < count; ++b) {
      if ((y.col(b) - basis * activations.col(b)).norm() > *config.sigma) {
        ++result.sigma_violations;
      }
    }
  }
  if (result.iterations > 0) result.dictionary = Dictionary(std::move(basis));
  return result;
}

}  // namespace loadveil
