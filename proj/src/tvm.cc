// tvnmf/tvm.cc

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

#include "tvnmf/tvm.h"

#include <cmath>
#include <random>

namespace tvnmf {

SufficientStats ComputeStats(const Spectrogram &V, const Dictionary &ubm,
                             const ActivationMatrix &posteriors, double stat_floor) {
  const Matrix &post = posteriors.Values();
  if (!posteriors.Normalized()) throw Error("compute stats: posteriors must be column-normalized");
  if (ubm.FeatDim() != V.NumBins() || post.rows() != ubm.NumComponents() ||
      post.cols() != V.NumFrames())
    throw Error("compute stats: shape mismatch (V " + std::to_string(V.NumBins()) + "x" +
                std::to_string(V.NumFrames()) + ", W " + std::to_string(ubm.FeatDim()) + "x" +
                std::to_string(ubm.NumComponents()) + ", posteriors " +
                std::to_string(post.rows()) + "x" + std::to_string(post.cols()) + ")");
  const Matrix log_w = ubm.Values().array().log().matrix();

  SufficientStats stats;
  stats.num_frames = V.NumFrames();
  stats.n = post.rowwise().sum();
  Matrix weighted = V.Values() * post.transpose();  // d x k
  stats.F.resize(ubm.FeatDim(), ubm.NumComponents());
  for (int c = 0; c < ubm.NumComponents(); c++) {
    double n_c = stats.n(c);
    if (n_c < stat_floor)
      stats.F.col(c) = n_c * log_w.col(c);
    else
      stats.F.col(c) = n_c * (weighted.col(c) / n_c).array().log().matrix();
  }
  stats.F_centered = stats.F - log_w * stats.n.asDiagonal();
  if (!stats.F.allFinite() || !stats.F_centered.allFinite())
    throw Error("compute stats: non-finite first-order statistics");
  return stats;
}

void CovarianceBlocks::Check() const {
  if (jitter.size() != blocks.size() || defaulted.size() != blocks.size())
    throw Error("covariance blocks: metadata size mismatch");
  for (size_t c = 0; c < blocks.size(); c++) {
    const Matrix &b = blocks[c];
    if (b.rows() != b.cols() || (c > 0 && b.rows() != blocks[0].rows()))
      throw Error("covariance block " + std::to_string(c) + " has a bad shape");
    if (!b.allFinite()) throw Error("covariance block " + std::to_string(c) + " is not finite");
    if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-10)
      throw Error("covariance block " + std::to_string(c) + " is not symmetric");
    Eigen::LLT<Matrix> llt(b);
    if (llt.info() != Eigen::Success)
      throw Error("covariance block " + std::to_string(c) + " is not positive definite");
  }
}

CovarianceAccumulator::CovarianceAccumulator(const Dictionary &ubm)
    : log_means_(ubm.Values().array().log().matrix()),
      scatter_(ubm.NumComponents(), Matrix::Zero(ubm.FeatDim(), ubm.FeatDim())),
      counts_(Vector::Zero(ubm.NumComponents())) {}

void CovarianceAccumulator::Accumulate(const Spectrogram &V, const ActivationMatrix &posteriors) {
  const Matrix &post = posteriors.Values();
  if (V.NumBins() != log_means_.rows() || post.rows() != log_means_.cols() ||
      post.cols() != V.NumFrames())
    throw Error("covariance accumulation: shape mismatch");
  const Matrix log_v = V.Values().array().log().matrix();
  for (Eigen::Index c = 0; c < log_means_.cols(); c++) {
    Matrix diff = log_v.colwise() - log_means_.col(c);
    Matrix weighted = diff.array().rowwise() * post.row(c).array();
    scatter_[c].noalias() += weighted * diff.transpose();
    counts_(c) += post.row(c).sum();
  }
}

void CovarianceAccumulator::Add(const CovarianceAccumulator &other) {
  if (other.scatter_.size() != scatter_.size() || other.log_means_.rows() != log_means_.rows())
    throw Error("covariance accumulation: incompatible accumulators");
  for (size_t c = 0; c < scatter_.size(); c++) scatter_[c] += other.scatter_[c];
  counts_ += other.counts_;
}

CovarianceBlocks CovarianceAccumulator::Finish(const CovarianceOptions &opts) const {
  const auto d = log_means_.rows();
  CovarianceBlocks out;
  out.diagonal = opts.diagonal;
  for (size_t c = 0; c < scatter_.size(); c++) {
    Matrix block;
    bool defaulted = counts_(c) < kDefaultStatFloor;
    if (defaulted) {
      Log().warn("component {} has no soft counts; using identity covariance", c);
      block = Matrix::Identity(d, d);
    } else {
      block = scatter_[c] / counts_(c);
      block = 0.5 * (block + block.transpose()).eval();
      if (opts.diagonal) block = Matrix(block.diagonal().asDiagonal());
    }
    double jitter = std::max(opts.jitter_scale * block.trace() / static_cast<double>(d),
                             opts.min_jitter);
    block.diagonal().array() += jitter;
    out.blocks.push_back(std::move(block));
    out.jitter.push_back(jitter);
    out.defaulted.push_back(defaulted);
  }
  out.Check();
  return out;
}

CovarianceBlocks EstimateCovariances(std::span<const Spectrogram> spectrograms,
                                     std::span<const ActivationMatrix> posteriors,
                                     const Dictionary &ubm, const CovarianceOptions &opts) {
  if (spectrograms.size() != posteriors.size())
    throw Error("estimate covariances: spectrogram/posterior count mismatch");
  CovarianceAccumulator acc(ubm);
  for (size_t u = 0; u < spectrograms.size(); u++) acc.Accumulate(spectrograms[u], posteriors[u]);
  return acc.Finish(opts);
}

TotalVariabilityModel::TotalVariabilityModel(Dictionary ubm, std::vector<Matrix> t_blocks,
                                             CovarianceBlocks sigma, double lambda,
                                             double epsilon)
    : ubm_(std::move(ubm)), t_blocks_(std::move(t_blocks)), sigma_(std::move(sigma)),
      lambda_(lambda), epsilon_(epsilon) {
  Check();
  ComputeDerived();
}

void TotalVariabilityModel::Check() const {
  const int k = ubm_.NumComponents(), d = ubm_.FeatDim();
  if (static_cast<int>(t_blocks_.size()) != k || sigma_.NumComponents() != k)
    throw Error("total variability model: expected " + std::to_string(k) + " T and sigma blocks, got " +
                std::to_string(t_blocks_.size()) + " and " + std::to_string(sigma_.NumComponents()));
  const auto s = t_blocks_[0].cols();
  if (s < 1) throw Error("total variability model: ivector dimension must be >= 1");
  for (int c = 0; c < k; c++) {
    if (t_blocks_[c].rows() != d || t_blocks_[c].cols() != s)
      throw Error("total variability model: T block " + std::to_string(c) + " has shape " +
                  std::to_string(t_blocks_[c].rows()) + "x" + std::to_string(t_blocks_[c].cols()));
    if (!t_blocks_[c].allFinite())
      throw Error("total variability model: T block " + std::to_string(c) + " is not finite");
    if (sigma_.blocks[c].rows() != d)
      throw Error("total variability model: sigma block " + std::to_string(c) + " has wrong size");
  }
  if (!(lambda_ >= 0.0) || !(epsilon_ > 0.0))
    throw Error("total variability model: invalid lambda/epsilon");
  sigma_.Check();
}

void TotalVariabilityModel::ComputeDerived() {
  sigma_inv_t_.clear();
  precision_.clear();
  for (int c = 0; c < NumComponents(); c++) {
    Eigen::LLT<Matrix> llt(sigma_.blocks[c]);
    Matrix inv_t = llt.solve(t_blocks_[c]);
    Matrix prec = t_blocks_[c].transpose() * inv_t;
    precision_.push_back(0.5 * (prec + prec.transpose()));
    sigma_inv_t_.push_back(std::move(inv_t));
  }
}

void TotalVariabilityModel::SetTBlocks(std::vector<Matrix> t_blocks) {
  t_blocks_ = std::move(t_blocks);
  Check();
  ComputeDerived();
}

Vector TotalVariabilityModel::UbmSupervector() const {
  return Eigen::Map<const Vector>(ubm_.Values().data(), ubm_.Values().size());
}

Matrix TotalVariabilityModel::TotalVariabilityMatrix() const {
  const int d = FeatDim();
  Matrix T(static_cast<Eigen::Index>(d) * NumComponents(), IvectorDim());
  for (int c = 0; c < NumComponents(); c++) T.middleRows(c * d, d) = t_blocks_[c];
  return T;
}

IVectorPosterior EStep(const SufficientStats &stats, const TotalVariabilityModel &model) {
  const int k = model.NumComponents(), s = model.IvectorDim();
  if (stats.n.size() != k || stats.F_centered.rows() != model.FeatDim() ||
      stats.F_centered.cols() != k)
    throw Error("e-step: statistics do not match model dimensions");
  Matrix L = Matrix::Identity(s, s);
  Vector b = Vector::Zero(s);
  for (int c = 0; c < k; c++) {
    L.noalias() += stats.n(c) * model.Precision(c);
    b.noalias() += model.SigmaInvT(c).transpose() * stats.F_centered.col(c);
  }
  Eigen::LLT<Matrix> llt(L);
  if (llt.info() != Eigen::Success) throw Error("e-step: posterior precision is not positive definite");
  IVectorPosterior post;
  post.mean = llt.solve(b);
  Matrix cov = llt.solve(Matrix::Identity(s, s));
  post.covariance = 0.5 * (cov + cov.transpose());
  double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  post.objective = 0.5 * post.mean.dot(b) - 0.5 * log_det;
  if (!post.mean.allFinite() || !std::isfinite(post.objective))
    throw Error("e-step: non-finite posterior");
  return post;
}

MStepResult MStep(std::span<const SufficientStats> stats,
                  std::span<const IVectorPosterior> posteriors,
                  const std::vector<Matrix> &current_blocks, double stat_floor) {
  if (stats.size() != posteriors.size() || stats.empty())
    throw Error("m-step: need one posterior per utterance and at least one utterance");
  const auto k = static_cast<int>(current_blocks.size());
  const auto d = current_blocks[0].rows(), s = current_blocks[0].cols();
  MStepResult result;
  result.t_blocks = current_blocks;
  result.skipped.assign(k, false);
  result.loaded.assign(k, false);

  // Second-order posterior moments are shared across components.
  std::vector<Matrix> moments;
  moments.reserve(posteriors.size());
  for (const auto &p : posteriors) {
    if (p.mean.size() != s) throw Error("m-step: posterior dimension mismatch");
    moments.push_back(p.covariance + p.mean * p.mean.transpose());
  }
  for (int c = 0; c < k; c++) {
    Matrix A = Matrix::Zero(s, s), B = Matrix::Zero(d, s);
    double count = 0.0;
    for (size_t u = 0; u < stats.size(); u++) {
      double n_uc = stats[u].n(c);
      count += n_uc;
      A.noalias() += n_uc * moments[u];
      B.noalias() += stats[u].F_centered.col(c) * posteriors[u].mean.transpose();
    }
    if (count < stat_floor) {
      result.skipped[c] = true;
      continue;
    }
    A = 0.5 * (A + A.transpose()).eval();
    Eigen::LLT<Matrix> llt(A);
    bool singular = llt.info() != Eigen::Success;
    if (!singular) {
      // Reject numerically singular accumulators too.
      Vector diag = llt.matrixLLT().diagonal();
      singular = diag.minCoeff() <= 1e-8 * diag.maxCoeff();
    }
    if (singular) {
      double load = std::max(1e-6 * A.trace() / static_cast<double>(s), 1e-10);
      Log().warn("m-step: accumulator for component {} is singular; loading diagonal by {}", c, load);
      A.diagonal().array() += load;
      llt.compute(A);
      result.loaded[c] = true;
    }
    result.t_blocks[c] = llt.solve(B.transpose()).transpose();
  }
  return result;
}

void TvmTrainOptions::Check() const {
  if (ivector_dim < 1) throw Error("ivector dimension must be >= 1");
  if (em_iters < 1) throw Error("em iterations must be >= 1");
  if (num_jobs < 1) throw Error("jobs must be >= 1");
}

double TvmObjective(std::span<const SufficientStats> stats, const TotalVariabilityModel &model,
                    int num_jobs) {
  std::vector<double> parts(stats.size());
  ParallelFor(static_cast<int64_t>(stats.size()), num_jobs,
              [&](int64_t u) { parts[u] = EStep(stats[u], model).objective; });
  double total = 0.0;
  for (double p : parts) total += p;
  return total;
}

TvmTrainResult TrainTvm(std::span<const SufficientStats> stats, const Dictionary &ubm,
                        CovarianceBlocks sigma, const TvmTrainOptions &opts) {
  opts.Check();
  if (stats.empty()) throw Error("train tvm: empty statistics list");
  const int d = ubm.FeatDim(), k = ubm.NumComponents(), s = opts.ivector_dim;
  for (const auto &st : stats)
    if (st.n.size() != k || st.F_centered.rows() != d || st.F_centered.cols() != k)
      throw Error("train tvm: statistics do not match the UBM dimensions");

  double mean_var = 0.0;
  for (const auto &b : sigma.blocks) mean_var += b.diagonal().mean();
  mean_var /= static_cast<double>(sigma.blocks.size());
  const double scale = opts.init_scale * mean_var;
  std::mt19937_64 engine(opts.seed);
  std::vector<Matrix> t_blocks;
  for (int c = 0; c < k; c++) {
    Matrix block(d, s);
    for (int j = 0; j < s; j++)
      for (int i = 0; i < d; i++) {
        double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
        block(i, j) = (u - 0.5) * scale;
      }
    t_blocks.push_back(std::move(block));
  }

  TvmTrainResult result{
      TotalVariabilityModel(ubm, std::move(t_blocks), std::move(sigma), opts.lambda, opts.epsilon),
      {}};
  std::vector<IVectorPosterior> posteriors(stats.size());
  for (int iter = 0; iter < opts.em_iters; iter++) {
    ParallelFor(static_cast<int64_t>(stats.size()), opts.num_jobs,
                [&](int64_t u) { posteriors[u] = EStep(stats[u], result.model); });
    double objective = 0.0;
    for (const auto &p : posteriors) objective += p.objective;
    result.objective_trace.push_back(objective);
    Log().info("em iteration {}: objective {:.10g}", iter, objective);
    MStepResult m = MStep(stats, posteriors, result.model.TBlocks());
    result.model.SetTBlocks(std::move(m.t_blocks));
  }
  result.objective_trace.push_back(TvmObjective(stats, result.model, opts.num_jobs));
  Log().info("final objective {:.10g}", result.objective_trace.back());
  return result;
}

}  // namespace tvnmf
