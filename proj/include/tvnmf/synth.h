// tvnmf/synth.h

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

// Synthetic corpora drawn from the log-normal total variability model, for
// checking the estimators against known ground truth.
//
// For each utterance u: q_u ~ N(0, I), W_u = exp(log W* + T* q_u) reshaped,
// and each frame t picks a component c_t uniformly and emits
//   V(:, t) = W_u(:, c_t) .* exp(noise_std * z),  z ~ N(0, I).
//
// Output directory:
//   list.txt                  one utterance file name per line
//   utt_<u>.mat               d x frames spectrogram
//   truth/manifest, w_ubm.mat UBM bundle holding W* (usable as --ubm)
//   truth/t_matrix.mat        kd x s
//   truth/ivectors.mat        U x s
//   truth/labels_<u>.mat      1 x frames generating component per frame

#ifndef TVNMF_SYNTH_H_
#define TVNMF_SYNTH_H_

#include <string>
#include <vector>

#include "tvnmf/nmf.h"
#include "tvnmf/spectrogram.h"

namespace tvnmf {

struct SynthOptions {
  int d = 4;
  int k = 3;
  int s = 2;
  int utterances = 200;
  int frames = 100;
  uint64_t seed = 0;
  double noise_std = 0.05;  // log-domain
  double t_scale = 0.3;     // std of the entries of T*

  void Check() const;
};

struct SynthCorpus {
  Dictionary ubm;        // W*
  Matrix t_matrix;       // T*, kd x s
  Matrix ivectors;       // U x s
  std::vector<Spectrogram> utterances;
  std::vector<std::vector<int>> labels;
};

SynthCorpus GenerateSynthCorpus(const SynthOptions &opts);

/// Writes the layout described above atomically into dir.
void WriteSynthCorpus(const std::string &dir, const SynthCorpus &corpus,
                      const SynthOptions &opts);

/// One-hot posteriors from per-frame component labels.
ActivationMatrix IndicatorPosteriors(const std::vector<int> &labels, int k);

/// Reads truth/labels_<u>.mat back into integer labels.
std::vector<int> ReadLabels(const std::string &path);

std::string UtteranceFileName(int u);

}  // namespace tvnmf

#endif  // TVNMF_SYNTH_H_
