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

// Per-batch obfuscation: sparse-code y against B, randomize the activation,
// re-aggregate y' = B a'.

#ifndef LOADVEIL_PIPELINE_H_
#define LOADVEIL_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadveil/meterdata.h"
#include "loadveil/randomized_response.h"
#include "loadveil/sparse_coding.h"

namespace loadveil {

struct ObfuscationOptions {
  // Unset: DefaultLambda(y, B) per batch.
  std::optional<double> lambda;
  // Residual norms above sigma add a warning to the result.
  std::optional<double> sigma;
  // process_stream worker count; 0 picks hardware_concurrency.
  unsigned threads = 0;
};

struct ObfuscationResult {
  ReadingBatch original;
  ReadingBatch obfuscated;
  Activation activation;
  Activation perturbed_activation;
  double lambda = 0.0;
  double reconstruction_error = 0.0;  // ||y - B a||_2
  double mean_abs_distortion = 0.0;   // mean |y' - y|
  double sparsity = 0.0;
  double delta0 = 0.0;
  // Empty when the sparsity bound is undefined for (f, delta0); +inf when
  // f = 0.
  std::optional<double> epsilon_paper;
  double epsilon_mechanism = 0.0;
  std::vector<std::string> warnings;
};

// B a with rounding negatives in [-1e-9, 0) clamped to zero.
std::vector<double> Reaggregate(const Dictionary& dict, const Activation& a);

// Randomness comes from Rng(params.seed).
ObfuscationResult ObfuscateBatch(const ReadingBatch& batch, const Dictionary& dict,
                                 const PrivacyParams& params,
                                 const ObfuscationOptions& options = {});

// Batch i is obfuscated with seed DeriveSeed(params.seed, i). Output order
// follows input order and does not depend on the thread count. A failing
// batch aborts the stream with an InvalidArgumentError (or the original
// error type) naming its index.
std::vector<ObfuscationResult> ProcessStream(std::span<const ReadingBatch> batches,
                                             const Dictionary& dict,
                                             const PrivacyParams& params,
                                             const ObfuscationOptions& options = {});

// Sidecar JSON: an array with one metadata object per batch.
std::string SidecarJson(std::span<const ObfuscationResult> results,
                        const PrivacyParams& params);
void WriteSidecar(std::span<const ObfuscationResult> results,
                  const PrivacyParams& params, const std::filesystem::path& path);

}  // namespace loadveil

#endif  // LOADVEIL_PIPELINE_H_
