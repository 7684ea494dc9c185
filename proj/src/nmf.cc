// tvnmf/nmf.cc

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

#include "tvnmf/nmf.h"

#include <cmath>
#include <limits>
#include <random>

namespace tvnmf {

namespace {

void CheckShapes(const Eigen::Ref<const Matrix> &V, const Eigen::Ref<const Matrix> &W,
                 const Eigen::Ref<const Matrix> &H) {
  if (W.rows() != V.rows() || H.cols() != V.cols() || W.cols() != H.rows())
    throw Error("nmf shape mismatch: V " + std::to_string(V.rows()) + "x" +
                std::to_string(V.cols()) + ", W " + std::to_string(W.rows()) + "x" +
                std::to_string(W.cols()) + ", H " + std::to_string(H.rows()) + "x" +
                std::to_string(H.cols()));
}

void FillRandom(std::mt19937_64 *engine, double epsilon, Matrix *m) {
  // 53-bit uniform u in [0, 1) mapped to (epsilon, 1].
  for (Eigen::Index j = 0; j < m->cols(); j++)
    for (Eigen::Index i = 0; i < m->rows(); i++) {
      double u = static_cast<double>((*engine)() >> 11) * 0x1.0p-53;
      (*m)(i, j) = 1.0 - u * (1.0 - epsilon);
    }
}

bool Converged(double prev, double cur, double rel_tol) {
  double scale = std::max(std::abs(prev), std::numeric_limits<double>::min());
  return std::abs(prev - cur) / scale < rel_tol;
}

// Ratio V ./ max(WH, epsilon).
Matrix Ratio(const Eigen::Ref<const Matrix> &V, const Eigen::Ref<const Matrix> &W,
             const Eigen::Ref<const Matrix> &H, double epsilon) {
  Matrix approx = (W * H).cwiseMax(epsilon);
  return V.cwiseQuotient(approx);
}

}  // namespace

Dictionary::Dictionary(Matrix values) : values_(std::move(values)) {
  if (values_.size() == 0) throw Error("empty dictionary");
  if (!values_.allFinite()) throw Error("dictionary has non-finite entries");
  if (!(values_.minCoeff() > 0.0)) throw Error("dictionary entries must be > 0");
}

ActivationMatrix::ActivationMatrix(Matrix values, bool normalized)
    : values_(std::move(values)), normalized_(normalized) {
  if (!values_.allFinite()) throw Error("activation matrix has non-finite entries");
  if (values_.size() > 0 && values_.minCoeff() < 0.0)
    throw Error("activation matrix has negative entries");
  if (normalized_) {
    for (Eigen::Index j = 0; j < values_.cols(); j++)
      if (std::abs(values_.col(j).sum() - 1.0) > 1e-9)
        throw Error("normalized activation column " + std::to_string(j) +
                    " does not sum to 1");
  }
}

void NmfConfig::Check() const {
  if (k < 1) throw Error("k must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("lambda must be >= 0");
  if (max_iters < 1) throw Error("max_iters must be >= 1");
  if (!(rel_tol >= 0.0)) throw Error("rel_tol must be >= 0");
  if (!(epsilon > 0.0)) throw Error("epsilon must be > 0");
}

double GklCost(const Eigen::Ref<const Matrix> &V, const Eigen::Ref<const Matrix> &W,
               const Eigen::Ref<const Matrix> &H, double lambda) {
  CheckShapes(V, W, H);
  Matrix approx = W * H;
  if (approx.size() > 0 && !(approx.minCoeff() > 0.0))
    throw Error("gkl cost: reconstruction has non-positive entries");
  double cost = 0.0;
  for (Eigen::Index j = 0; j < V.cols(); j++)
    for (Eigen::Index i = 0; i < V.rows(); i++) {
      double v = V(i, j), a = approx(i, j);
      // 0 * log 0 = 0
      double term = v > 0.0 ? v * std::log(v / a) : 0.0;
      cost += term - v + a;
    }
  cost += lambda * H.sum();
  if (!std::isfinite(cost)) throw Error("gkl cost is not finite");
  return cost;
}

Matrix UpdateDictionary(const Eigen::Ref<const Matrix> &V, const Eigen::Ref<const Matrix> &W,
                        const Eigen::Ref<const Matrix> &H, double epsilon) {
  CheckShapes(V, W, H);
  Matrix numer = Ratio(V, W, H, epsilon) * H.transpose();
  Eigen::RowVectorXd denom = H.rowwise().sum().transpose().cwiseMax(epsilon);
  Matrix out = W.cwiseProduct(numer).array().rowwise() / denom.array();
  out = out.cwiseMax(epsilon);
  if (!out.allFinite()) throw Error("dictionary update produced non-finite values");
  return out;
}

Matrix UpdateActivations(const Eigen::Ref<const Matrix> &V, const Eigen::Ref<const Matrix> &W,
                         const Eigen::Ref<const Matrix> &H, double lambda, double epsilon) {
  CheckShapes(V, W, H);
  Matrix numer = W.transpose() * Ratio(V, W, H, epsilon);
  Vector denom = (W.colwise().sum().transpose().array() + lambda).max(epsilon);
  Matrix out = H.cwiseProduct(numer).array().colwise() / denom.array();
  out = out.cwiseMax(epsilon);
  if (!out.allFinite()) throw Error("activation update produced non-finite values");
  return out;
}

Matrix RandomPositiveMatrix(int rows, int cols, uint64_t seed, double epsilon) {
  std::mt19937_64 engine(seed);
  Matrix m(rows, cols);
  FillRandom(&engine, epsilon, &m);
  return m;
}

NmfResult Factorize(std::span<const Spectrogram> corpus, const NmfConfig &config) {
  config.Check();
  if (corpus.empty()) throw Error("factorize: empty corpus");
  const int d = corpus[0].NumBins();
  std::vector<Eigen::Index> offsets{0};
  for (const auto &V : corpus) {
    if (V.NumBins() != d)
      throw Error("factorize: spectrograms disagree on bin count (" +
                  std::to_string(V.NumBins()) + " vs " + std::to_string(d) + ")");
    offsets.push_back(offsets.back() + V.NumFrames());
  }
  const Eigen::Index total_frames = offsets.back();
  const double eps = config.epsilon;

  std::mt19937_64 engine(config.seed);
  Matrix W(d, config.k), H(config.k, total_frames);
  FillRandom(&engine, eps, &W);
  FillRandom(&engine, eps, &H);

  auto block = [&](size_t b) {
    return H.middleCols(offsets[b], offsets[b + 1] - offsets[b]);
  };
  auto cost = [&] {
    double c = 0.0;
    for (size_t b = 0; b < corpus.size(); b++) c += GklCost(corpus[b].Values(), W, block(b), config.lambda);
    return c;
  };

  NmfResult result;
  result.cost_trace.push_back(cost());
  for (int iter = 1; iter <= config.max_iters; iter++) {
    // Dictionary step: numerator and denominator both sum over blocks.
    Matrix numer = Matrix::Zero(d, config.k);
    for (size_t b = 0; b < corpus.size(); b++)
      numer.noalias() += Ratio(corpus[b].Values(), W, block(b), eps) * block(b).transpose();
    Eigen::RowVectorXd denom = H.rowwise().sum().transpose().cwiseMax(eps);
    W = (W.cwiseProduct(numer).array().rowwise() / denom.array()).matrix().cwiseMax(eps);
    if (!W.allFinite()) throw Error("dictionary update produced non-finite values");

    for (size_t b = 0; b < corpus.size(); b++)
      block(b) = UpdateActivations(corpus[b].Values(), W, block(b), config.lambda, eps);

    result.cost_trace.push_back(cost());
    result.iterations = iter;
    Log().debug("nmf iter {} cost {:.10g}", iter, result.cost_trace.back());
    if (Converged(result.cost_trace[iter - 1], result.cost_trace[iter], config.rel_tol)) break;
  }
  result.dictionary = Dictionary(std::move(W));
  result.activations = ActivationMatrix(std::move(H));
  return result;
}

NmfResult Factorize(const Spectrogram &V, const NmfConfig &config) {
  return Factorize(std::span<const Spectrogram>(&V, 1), config);
}

ActivationMatrix InferActivations(const Spectrogram &V, const Dictionary &W,
                                  const NmfConfig &config,
                                  std::vector<double> *cost_trace) {
  config.Check();
  if (W.FeatDim() != V.NumBins())
    throw Error("infer activations: dictionary has " + std::to_string(W.FeatDim()) +
                " rows but spectrogram has " + std::to_string(V.NumBins()) + " bins");
  Matrix H = RandomPositiveMatrix(W.NumComponents(), V.NumFrames(), config.seed,
                                  config.epsilon);
  std::vector<double> trace{GklCost(V.Values(), W.Values(), H, config.lambda)};
  for (int iter = 1; iter <= config.max_iters; iter++) {
    H = UpdateActivations(V.Values(), W.Values(), H, config.lambda, config.epsilon);
    trace.push_back(GklCost(V.Values(), W.Values(), H, config.lambda));
    if (Converged(trace[iter - 1], trace[iter], config.rel_tol)) break;
  }
  if (cost_trace != nullptr) *cost_trace = std::move(trace);
  return ActivationMatrix(std::move(H));
}

ActivationMatrix NormalizeColumns(const ActivationMatrix &H, double epsilon) {
  Matrix out = H.Values();
  const auto k = out.rows();
  for (Eigen::Index j = 0; j < out.cols(); j++) {
    double sum = out.col(j).sum();
    if (sum < epsilon) out.col(j).setConstant(1.0 / static_cast<double>(k));
    else out.col(j) /= sum;
  }
  return ActivationMatrix(std::move(out), true);
}

}  // namespace tvnmf
