// tvnmf/tvm.h

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

#ifndef TVNMF_TVM_H_
#define TVNMF_TVM_H_

#include <span>
#include <vector>

#include "tvnmf/nmf.h"
#include "tvnmf/spectrogram.h"
#include "tvnmf/tvnmf-common.h"

namespace tvnmf {

inline constexpr double kDefaultStatFloor = 1e-8;

/// Per-utterance statistics in the log domain. Normalized activation columns
/// play the role of component posteriors and the dictionary atoms the role of
/// component means.
struct SufficientStats {
  Vector n;           // k, zeroth order soft counts; sums to num_frames
  Matrix F;           // d x k, first order
  Matrix F_centered;  // d x k, F(:,c) - n_c log W(:,c)
  int num_frames = 0;
};

/// n   = sum over frames of the posteriors
/// F_c = n_c * log(sum_t V(:,t) post(c,t) / n_c)
/// Components with n_c < stat_floor get F_c = n_c log W(:,c), so their
/// centered statistic is zero.
SufficientStats ComputeStats(const Spectrogram &V, const Dictionary &ubm,
                             const ActivationMatrix &posteriors,
                             double stat_floor = kDefaultStatFloor);

/// Per-component d x d covariances of log V around log W(:,c).
struct CovarianceBlocks {
  std::vector<Matrix> blocks;
  std::vector<double> jitter;         // diagonal loading added to each block
  std::vector<bool> defaulted;        // no data for the component; identity used
  bool diagonal = false;

  int NumComponents() const { return static_cast<int>(blocks.size()); }
  /// Symmetric within 1e-10 and Cholesky-factorizable.
  void Check() const;
};

struct CovarianceOptions {
  double jitter_scale = 1e-6;      // jitter = max(jitter_scale * trace / d, min_jitter)
  double min_jitter = 1e-10;
  bool diagonal = false;           // keep only the diagonal of each block
};

/// Streams utterances and pools the weighted scatter over all of them:
///   Sigma_c = sum_u sum_t post_u(c,t) (x - m_c)(x - m_c)^T / sum_u n_uc
/// with x = log V_u(:,t) and m_c = log W(:,c).
class CovarianceAccumulator {
 public:
  explicit CovarianceAccumulator(const Dictionary &ubm);

  void Accumulate(const Spectrogram &V, const ActivationMatrix &posteriors);
  /// Adds another accumulator's sums (used to merge per-utterance partials in
  /// a fixed order).
  void Add(const CovarianceAccumulator &other);
  CovarianceBlocks Finish(const CovarianceOptions &opts = {}) const;

 private:
  Matrix log_means_;            // d x k
  std::vector<Matrix> scatter_;
  Vector counts_;
};

CovarianceBlocks EstimateCovariances(std::span<const Spectrogram> spectrograms,
                                     std::span<const ActivationMatrix> posteriors,
                                     const Dictionary &ubm,
                                     const CovarianceOptions &opts = {});

/// UBM supervector, total variability blocks T_c (d x s) and fixed
/// covariance blocks, plus the NMF settings the model was trained with.
class TotalVariabilityModel {
 public:
  TotalVariabilityModel() = default;
  TotalVariabilityModel(Dictionary ubm, std::vector<Matrix> t_blocks, CovarianceBlocks sigma,
                        double lambda, double epsilon);

  int FeatDim() const { return ubm_.FeatDim(); }
  int NumComponents() const { return ubm_.NumComponents(); }
  int IvectorDim() const { return t_blocks_.empty() ? 0 : static_cast<int>(t_blocks_[0].cols()); }
  double Lambda() const { return lambda_; }
  double Epsilon() const { return epsilon_; }

  const Dictionary &Ubm() const { return ubm_; }
  /// Columns of the UBM dictionary stacked into a k*d vector.
  Vector UbmSupervector() const;
  const std::vector<Matrix> &TBlocks() const { return t_blocks_; }
  /// T as one kd x s matrix, block c in rows [c*d, (c+1)*d).
  Matrix TotalVariabilityMatrix() const;
  const CovarianceBlocks &Sigma() const { return sigma_; }

  void SetTBlocks(std::vector<Matrix> t_blocks);

  /// Sigma_c^{-1} T_c, d x s.
  const Matrix &SigmaInvT(int c) const { return sigma_inv_t_[c]; }
  /// T_c^T Sigma_c^{-1} T_c, s x s.
  const Matrix &Precision(int c) const { return precision_[c]; }

 private:
  void Check() const;
  void ComputeDerived();

  Dictionary ubm_;
  std::vector<Matrix> t_blocks_;
  CovarianceBlocks sigma_;
  double lambda_ = 0.1;
  double epsilon_ = kDefaultEpsilon;
  std::vector<Matrix> sigma_inv_t_;
  std::vector<Matrix> precision_;
};

struct IVectorPosterior {
  Vector mean;        // s
  Matrix covariance;  // s x s
  /// This utterance's log-likelihood term, T-dependent part only:
  /// 0.5 mean^T b - 0.5 log det L.
  double objective = 0.0;
};

/// L = I + sum_c n_c T_c^T Sigma_c^{-1} T_c,  b = sum_c T_c^T Sigma_c^{-1} Fbar_c,
/// covariance = L^{-1}, mean = L^{-1} b.
IVectorPosterior EStep(const SufficientStats &stats, const TotalVariabilityModel &model);

struct MStepResult {
  std::vector<Matrix> t_blocks;
  std::vector<bool> skipped;  // no counts for the component; block kept
  std::vector<bool> loaded;   // accumulator was singular; diagonal loading used
};

/// T_c = (sum_u Fbar_u(:,c) mu_u^T) (sum_u n_uc (Cov_u + mu_u mu_u^T))^{-1}.
/// Sums run in utterance order.
MStepResult MStep(std::span<const SufficientStats> stats,
                  std::span<const IVectorPosterior> posteriors,
                  const std::vector<Matrix> &current_blocks,
                  double stat_floor = kDefaultStatFloor);

struct TvmTrainOptions {
  int ivector_dim = 400;
  int em_iters = 10;
  uint64_t seed = 0;
  int num_jobs = 1;
  double init_scale = 1e-3;  // T init: U[-0.5, 0.5] * init_scale * mean(diag Sigma)
  double lambda = 0.1;
  double epsilon = kDefaultEpsilon;

  void Check() const;
};

struct TvmTrainResult {
  TotalVariabilityModel model;
  /// Objective before each M step, plus one final entry for the returned T.
  std::vector<double> objective_trace;
};

/// EM with Sigma held fixed.
TvmTrainResult TrainTvm(std::span<const SufficientStats> stats, const Dictionary &ubm,
                        CovarianceBlocks sigma, const TvmTrainOptions &opts);

/// Sum over utterances of EStep(...).objective, in utterance order.
double TvmObjective(std::span<const SufficientStats> stats, const TotalVariabilityModel &model,
                    int num_jobs = 1);

}  // namespace tvnmf

#endif  // TVNMF_TVM_H_
