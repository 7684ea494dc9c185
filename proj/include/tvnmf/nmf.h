// tvnmf/nmf.h

// Copyright 2026  The tvnmf Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TVNMF_NMF_H_
#define TVNMF_NMF_H_

#include <span>
#include <vector>

#include "tvnmf/spectrogram.h"
#include "tvnmf/tvnmf-common.h"

namespace tvnmf {

/// d x k matrix of spectral atoms; all entries finite and > 0.
class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(Matrix values);

  const Matrix &Values() const { return values_; }
  int FeatDim() const { return static_cast<int>(values_.rows()); }
  int NumComponents() const { return static_cast<int>(values_.cols()); }

 private:
  Matrix values_;
};

/// k x t non-negative activations. When normalized, every column sums to 1
/// and can be read as per-frame posteriors over dictionary atoms.
class ActivationMatrix {
 public:
  ActivationMatrix() = default;
  explicit ActivationMatrix(Matrix values, bool normalized = false);

  const Matrix &Values() const { return values_; }
  bool Normalized() const { return normalized_; }
  int NumComponents() const { return static_cast<int>(values_.rows()); }
  int NumFrames() const { return static_cast<int>(values_.cols()); }

 private:
  Matrix values_;
  bool normalized_ = false;
};

struct NmfConfig {
  int k = 60;
  double lambda = 0.1;      // l1 weight on the activations
  int max_iters = 200;
  double rel_tol = 1e-5;    // stop when |c_prev - c| / |c_prev| < rel_tol
  uint64_t seed = 0;
  double epsilon = kDefaultEpsilon;

  void Check() const;
};

/// Generalized KL divergence D(V || WH) plus lambda * sum(H).
/// Throws on shape mismatch, non-positive WH, or a non-finite result.
double GklCost(const Eigen::Ref<const Matrix> &V, const Eigen::Ref<const Matrix> &W,
               const Eigen::Ref<const Matrix> &H, double lambda);

/// One multiplicative dictionary update:
///   W <- W .* ((V ./ WH) H^T) ./ (1 H^T), floored at epsilon.
Matrix UpdateDictionary(const Eigen::Ref<const Matrix> &V, const Eigen::Ref<const Matrix> &W,
                        const Eigen::Ref<const Matrix> &H, double epsilon = kDefaultEpsilon);

/// One multiplicative activation update:
///   H <- H .* (W^T (V ./ WH)) ./ (W^T 1 + lambda), floored at epsilon.
Matrix UpdateActivations(const Eigen::Ref<const Matrix> &V, const Eigen::Ref<const Matrix> &W,
                         const Eigen::Ref<const Matrix> &H, double lambda,
                         double epsilon = kDefaultEpsilon);

struct NmfResult {
  Dictionary dictionary;
  ActivationMatrix activations;    // k x (total frames), blocks in input order
  std::vector<double> cost_trace;  // cost at init, then after each iteration
  int iterations = 0;
};

/// Learns W and H for the column-wise concatenation of the spectrograms.
/// The concatenated matrix is never formed: each update sums over blocks.
NmfResult Factorize(std::span<const Spectrogram> corpus, const NmfConfig &config);
NmfResult Factorize(const Spectrogram &V, const NmfConfig &config);

/// Activations for V against a fixed dictionary; W is never modified.
ActivationMatrix InferActivations(const Spectrogram &V, const Dictionary &W,
                                  const NmfConfig &config,
                                  std::vector<double> *cost_trace = nullptr);

/// Columns scaled to sum to 1; columns summing to < epsilon become 1/k.
ActivationMatrix NormalizeColumns(const ActivationMatrix &H,
                                  double epsilon = kDefaultEpsilon);

/// Uniform entries in (epsilon, 1], drawn column-major from a seeded
/// std::mt19937_64 (shared with factorize/infer initialization).
Matrix RandomPositiveMatrix(int rows, int cols, uint64_t seed, double epsilon);

}  // namespace tvnmf

#endif  // TVNMF_NMF_H_
