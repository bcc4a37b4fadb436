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

#include "loadveil/pipeline.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "loadveil/errors.h"

namespace loadveil {
namespace {

// Tight epsilon of the position-level mechanism over n candidates.
double MechanismEpsilon(Eigen::Index n, double f) {
  std::vector<double> positions(static_cast<std::size_t>(n));
  std::iota(positions.begin(), positions.end(), 0.0);
  return EpsilonEmpirical(TransitionMatrix::Build(positions, f));
}

ObfuscationResult ObfuscateWithEpsilon(const ReadingBatch& batch,
                                       const Dictionary& dict,
                                       const PrivacyParams& params,
                                       const ObfuscationOptions& options,
                                       double epsilon_mechanism) {
  const std::span<const double> y = batch.values();
  if (static_cast<Eigen::Index>(y.size()) != dict.t()) {
    throw DimensionMismatchError("batch has t=" + std::to_string(y.size()) +
                                 " readings but the dictionary has t=" +
                                 std::to_string(dict.t()) + " rows");
  }
  const double lambda = options.lambda ? *options.lambda : DefaultLambda(y, dict);

  Activation activation = InferActivation(y, dict, lambda);
  Rng rng(params.seed);
  Activation perturbed = PerturbActivation(activation, params.f, rng);
  std::vector<double> obfuscated_values = Reaggregate(dict, perturbed);
  const std::vector<double> fitted = Reaggregate(dict, activation);

  double residual_sq = 0.0;
  double abs_distortion = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    residual_sq += (y[i] - fitted[i]) * (y[i] - fitted[i]);
    abs_distortion += std::abs(obfuscated_values[i] - y[i]);
  }

  ObfuscationResult result{
      batch,
      batch.WithValues(std::move(obfuscated_values)),
      std::move(activation),
      std::move(perturbed),
      lambda,
      std::sqrt(residual_sq),
      abs_distortion / static_cast<double>(y.size()),
      0.0,
      0.0,
      std::nullopt,
      epsilon_mechanism,
      {}};
  result.sparsity = Sparsity(result.activation);
  result.delta0 = params.delta0 ? *params.delta0 : ClampDelta0(result.sparsity);
  if (params.f == 0.0) {
    result.epsilon_paper = std::numeric_limits<double>::infinity();
  } else {
    try {
      result.epsilon_paper = EpsilonSparsityBound(params.f, result.delta0);
    } catch (const InvalidArgumentError& e) {
      result.warnings.push_back(std::string("epsilon_paper undefined: ") + e.what());
    }
  }
  if (options.sigma && result.reconstruction_error > *options.sigma) {
    result.warnings.push_back("reconstruction error " +
                              FormatDouble(result.reconstruction_error) +
                              " exceeds sigma " + FormatDouble(*options.sigma));
  }
  return result;
}

[[noreturn]] void RethrowWithIndex(std::exception_ptr error, std::size_t index) {
  const std::string prefix = "batch " + std::to_string(index) + ": ";
  try {
    std::rethrow_exception(error);
  } catch (const DimensionMismatchError& e) {
    throw DimensionMismatchError(prefix + e.what());
  } catch (const InvalidArgumentError& e) {
    throw InvalidArgumentError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + e.what());
  }
}

nlohmann::json EpsilonJson(double value) {
  if (std::isfinite(value)) return value;
  return nullptr;
}

}  // namespace

std::vector<double> Reaggregate(const Dictionary& dict, const Activation& a) {
  if (a.size() != dict.n()) {
    throw DimensionMismatchError("activation length " + std::to_string(a.size()) +
                                 " does not match dictionary columns " +
                                 std::to_string(dict.n()));
  }
  const Eigen::VectorXd product = dict.basis() * a.coeffs();
  std::vector<double> out(product.data(), product.data() + product.size());
  for (double& v : out) {
    if (v < 0.0 && v >= -1e-9) v = 0.0;
  }
  return out;
}

ObfuscationResult ObfuscateBatch(const ReadingBatch& batch, const Dictionary& dict,
                                 const PrivacyParams& params,
                                 const ObfuscationOptions& options) {
  params.Validate();
  return ObfuscateWithEpsilon(batch, dict, params, options,
                              MechanismEpsilon(dict.n(), params.f));
}

std::vector<ObfuscationResult> ProcessStream(std::span<const ReadingBatch> batches,
                                             const Dictionary& dict,
                                             const PrivacyParams& params,
                                             const ObfuscationOptions& options) {
  params.Validate();
  if (batches.empty()) return {};
  const double epsilon_mechanism = MechanismEpsilon(dict.n(), params.f);

  std::vector<std::optional<ObfuscationResult>> slots(batches.size());
  std::vector<std::exception_ptr> errors(batches.size());
  auto run = [&](std::size_t i) {
    try {
      PrivacyParams batch_params = params;
      batch_params.seed = DeriveSeed(params.seed, i);
      slots[i] = ObfuscateWithEpsilon(batches[i], dict, batch_params, options,
                                      epsilon_mechanism);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  unsigned threads = options.threads != 0 ? options.threads
                                          : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, batches.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < batches.size(); ++i) run(i);
  } else {
    // Strided partition; each slot is written by exactly one worker.
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      workers.emplace_back([&, w]() {
        for (std::size_t i = w; i < batches.size(); i += threads) run(i);
      });
    }
  }

  for (std::size_t i = 0; i < batches.size(); ++i) {
    if (errors[i]) RethrowWithIndex(errors[i], i);
  }
  std::vector<ObfuscationResult> results;
  results.reserve(batches.size());
  for (auto& slot : slots) results.push_back(std::move(*slot));
  return results;
}

std::string SidecarJson(std::span<const ObfuscationResult> results,
                        const PrivacyParams& params) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const ObfuscationResult& r = results[i];
    nlohmann::json entry;
    entry["batch_index"] = i;
    entry["meter_id"] = r.original.meter_id();
    entry["start_time"] = FormatIso8601Utc(r.original.start_time());
    entry["t"] = r.original.size();
    entry["n"] = r.activation.size();
    entry["f"] = params.f;
    entry["lambda"] = r.lambda;
    entry["reconstruction_error"] = r.reconstruction_error;
    entry["mean_abs_distortion"] = r.mean_abs_distortion;
    entry["sparsity"] = r.sparsity;
    entry["delta0"] = r.delta0;
    if (r.epsilon_paper) {
      entry["epsilon_paper"] = EpsilonJson(*r.epsilon_paper);
      entry["epsilon_paper_status"] =
          std::isfinite(*r.epsilon_paper) ? "ok" : "unbounded";
    } else {
      entry["epsilon_paper"] = nullptr;
      entry["epsilon_paper_status"] = "undefined";
    }
    entry["epsilon_mechanism"] = EpsilonJson(r.epsilon_mechanism);
    entry["epsilon_mechanism_status"] =
        std::isfinite(r.epsilon_mechanism) ? "ok" : "unbounded";
    entry["warnings"] = r.warnings;
    out.push_back(std::move(entry));
  }
  return out.dump(2) + "\n";
}

void WriteSidecar(std::span<const ObfuscationResult> results,
                  const PrivacyParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << SidecarJson(results, params);
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace loadveil
