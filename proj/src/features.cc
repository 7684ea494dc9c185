// tvnmf/features.cc

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

#include "tvnmf/features.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tvnmf {

Vector StackColumns(const Matrix &m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix UnstackColumns(const Vector &v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols)
    throw Error("unstack: vector of length " + std::to_string(v.size()) + " cannot be " +
                std::to_string(rows) + "x" + std::to_string(cols));
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

AdaptedDictionary AdaptDictionary(const TotalVariabilityModel &model, const Vector &ivector) {
  if (ivector.size() != model.IvectorDim())
    throw Error("adapt dictionary: ivector has dimension " + std::to_string(ivector.size()) +
                ", model expects " + std::to_string(model.IvectorDim()));
  if (!ivector.allFinite()) throw Error("adapt dictionary: ivector is not finite");
  const int d = model.FeatDim(), k = model.NumComponents();
  Vector w = model.UbmSupervector();
  // w * exp(Tq) == exp(log w + Tq); this form keeps q = 0 exact.
  for (int c = 0; c < k; c++) {
    Vector offset = model.TBlocks()[c] * ivector;
    w.segment(c * d, d).array() *= offset.array().exp();
  }
  AdaptedDictionary out;
  const double lo = std::numeric_limits<double>::min();
  for (Eigen::Index i = 0; i < w.size(); i++) {
    if (!(w(i) >= lo && w(i) <= kMaxAdaptedValue)) {
      out.clamped = true;
      w(i) = std::isnan(w(i)) ? kMaxAdaptedValue : std::clamp(w(i), lo, kMaxAdaptedValue);
    }
  }
  if (out.clamped) Log().warn("adapted dictionary clamped to [{}, {}]", lo, kMaxAdaptedValue);
  out.dictionary = Dictionary(UnstackColumns(w, d, k));
  out.source_ivector = ivector;
  return out;
}

IVectorPosterior ExtractIvectorPosterior(const Spectrogram &V, const TotalVariabilityModel &model,
                                         const NmfConfig &config) {
  if (V.NumBins() != model.FeatDim())
    throw Error("extract ivector: spectrogram has " + std::to_string(V.NumBins()) +
                " bins, model expects " + std::to_string(model.FeatDim()));
  ActivationMatrix H = InferActivations(V, model.Ubm(), config);
  ActivationMatrix posteriors = NormalizeColumns(H, config.epsilon);
  SufficientStats stats = ComputeStats(V, model.Ubm(), posteriors);
  return EStep(stats, model);
}

Vector ExtractIvector(const Spectrogram &V, const TotalVariabilityModel &model,
                      const NmfConfig &config) {
  return ExtractIvectorPosterior(V, model, config).mean;
}

UtteranceFeatures ExtractFeatures(const Spectrogram &V, const TotalVariabilityModel &model,
                                  const NmfConfig &config, const std::string &utterance_id) {
  IVectorPosterior ivector = ExtractIvectorPosterior(V, model, config);
  AdaptedDictionary adapted = AdaptDictionary(model, ivector.mean);
  ActivationMatrix H = InferActivations(V, adapted.dictionary, config);
  Matrix log_h = H.Values().cwiseMax(config.epsilon).array().log().matrix();
  return UtteranceFeatures{FeatureMatrix{std::move(log_h), utterance_id}, std::move(ivector),
                           std::move(adapted), std::move(H)};
}

NmfConfig ModelNmfConfig(const TotalVariabilityModel &model, int max_iters, double rel_tol,
                         uint64_t seed) {
  NmfConfig config;
  config.k = model.NumComponents();
  config.lambda = model.Lambda();
  config.epsilon = model.Epsilon();
  config.max_iters = max_iters;
  config.rel_tol = rel_tol;
  config.seed = seed;
  return config;
}

}  // namespace tvnmf
