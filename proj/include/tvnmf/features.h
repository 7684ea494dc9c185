// tvnmf/features.h

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

#ifndef TVNMF_FEATURES_H_
#define TVNMF_FEATURES_H_

#include <string>

#include "tvnmf/nmf.h"
#include "tvnmf/tvm.h"

namespace tvnmf {

inline constexpr double kMaxAdaptedValue = 1e12;

/// Stacks the columns of a d x k matrix into a kd vector.
Vector StackColumns(const Matrix &m);
/// Inverse of StackColumns.
Matrix UnstackColumns(const Vector &v, int rows, int cols);

struct AdaptedDictionary {
  Dictionary dictionary;
  Vector source_ivector;
  bool clamped = false;  // some entries hit the [min double, 1e12] clamp
};

/// exp(log w_ubm + T q), reshaped to d x k.
AdaptedDictionary AdaptDictionary(const TotalVariabilityModel &model, const Vector &ivector);

/// Posterior of the utterance's ivector: activations against the UBM
/// dictionary, normalized into posteriors, statistics, then the E step.
IVectorPosterior ExtractIvectorPosterior(const Spectrogram &V, const TotalVariabilityModel &model,
                                         const NmfConfig &config);
/// Posterior mean of the above.
Vector ExtractIvector(const Spectrogram &V, const TotalVariabilityModel &model,
                      const NmfConfig &config);

struct FeatureMatrix {
  Matrix values;  // k x t, log(max(H, epsilon))
  std::string utterance_id;
};

struct UtteranceFeatures {
  FeatureMatrix features;
  IVectorPosterior ivector;
  AdaptedDictionary adapted;
  ActivationMatrix activations;  // against the adapted dictionary
};

UtteranceFeatures ExtractFeatures(const Spectrogram &V, const TotalVariabilityModel &model,
                                  const NmfConfig &config, const std::string &utterance_id = "");

/// NmfConfig carrying the model's lambda and epsilon with k from the model.
NmfConfig ModelNmfConfig(const TotalVariabilityModel &model, int max_iters = 200,
                         double rel_tol = 1e-5, uint64_t seed = 0);

}  // namespace tvnmf

#endif  // TVNMF_FEATURES_H_
