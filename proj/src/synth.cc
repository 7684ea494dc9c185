// tvnmf/synth.cc

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

#include "tvnmf/synth.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "tvnmf/model-io.h"

namespace tvnmf {

void SynthOptions::Check() const {
  if (d < 1 || k < 1 || s < 1 || utterances < 1 || frames < 1)
    throw Error("synth: all dimensions must be >= 1");
  if (!(noise_std >= 0.0) || !(t_scale >= 0.0)) throw Error("synth: scales must be >= 0");
}

std::string UtteranceFileName(int u) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "utt_%04d.mat", u);
  return buf;
}

SynthCorpus GenerateSynthCorpus(const SynthOptions &opts) {
  opts.Check();
  std::mt19937_64 engine(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> component(0, opts.k - 1);
  const int d = opts.d, k = opts.k, s = opts.s;

  Matrix log_w(d, k);
  for (int c = 0; c < k; c++)
    for (int i = 0; i < d; i++) log_w(i, c) = normal(engine);
  Matrix T(static_cast<Eigen::Index>(k) * d, s);
  for (int j = 0; j < s; j++)
    for (Eigen::Index i = 0; i < T.rows(); i++) T(i, j) = opts.t_scale * normal(engine);

  SynthCorpus corpus;
  corpus.ubm = Dictionary(log_w.array().exp().matrix());
  corpus.t_matrix = T;
  corpus.ivectors.resize(opts.utterances, s);
  const Vector log_w_super = Eigen::Map<const Vector>(log_w.data(), log_w.size());
  for (int u = 0; u < opts.utterances; u++) {
    Vector q(s);
    for (int j = 0; j < s; j++) q(j) = normal(engine);
    corpus.ivectors.row(u) = q.transpose();
    Vector adapted = log_w_super + T * q;  // log domain, column-stacked

    Matrix V(d, opts.frames);
    std::vector<int> labels(opts.frames);
    for (int t = 0; t < opts.frames; t++) {
      int c = component(engine);
      labels[t] = c;
      for (int i = 0; i < d; i++)
        V(i, t) = std::exp(adapted(static_cast<Eigen::Index>(c) * d + i) +
                           opts.noise_std * normal(engine));
    }
    corpus.utterances.push_back(Spectrogram::FromMatrix(std::move(V)));
    corpus.labels.push_back(std::move(labels));
  }
  return corpus;
}

void WriteSynthCorpus(const std::string &dir, const SynthCorpus &corpus,
                      const SynthOptions &opts) {
  WriteDirectoryAtomically(dir, [&](const std::string &tmp) {
    namespace fs = std::filesystem;
    fs::create_directory(tmp + "/truth");
    std::string list;
    for (size_t u = 0; u < corpus.utterances.size(); u++) {
      const std::string name = UtteranceFileName(static_cast<int>(u));
      WriteMatrix(tmp + "/" + name, corpus.utterances[u].Values());
      Matrix labels(1, corpus.labels[u].size());
      for (size_t t = 0; t < corpus.labels[u].size(); t++) labels(0, t) = corpus.labels[u][t];
      WriteMatrix(tmp + "/truth/labels_" + name.substr(4), labels);
      list += name + "\n";
    }
    WriteFileAtomically(tmp + "/list.txt", list);
    WriteMatrix(tmp + "/truth/t_matrix.mat", corpus.t_matrix);
    WriteMatrix(tmp + "/truth/ivectors.mat", corpus.ivectors);

    // Same manifest as a UBM bundle, plus the generator settings.
    Manifest manifest;
    manifest.Set("format_version", kBundleFormatVersion);
    manifest.Set("d", opts.d);
    manifest.Set("k", opts.k);
    manifest.Set("s", opts.s);
    manifest.Set("lambda", NmfConfig{}.lambda);
    manifest.Set("epsilon", kDefaultEpsilon);
    manifest.Set("created_by", std::string("tvnmf synth"));
    manifest.Set("seed", std::to_string(opts.seed));
    manifest.Set("noise_std", opts.noise_std);
    manifest.Set("t_scale", opts.t_scale);
    WriteMatrix(tmp + "/truth/w_ubm.mat", corpus.ubm.Values());
    WriteFileAtomically(tmp + "/truth/manifest", manifest.Serialize());
  });
}

ActivationMatrix IndicatorPosteriors(const std::vector<int> &labels, int k) {
  Matrix post = Matrix::Zero(k, static_cast<Eigen::Index>(labels.size()));
  for (size_t t = 0; t < labels.size(); t++) {
    if (labels[t] < 0 || labels[t] >= k) throw Error("label out of range");
    post(labels[t], static_cast<Eigen::Index>(t)) = 1.0;
  }
  return ActivationMatrix(std::move(post), true);
}

std::vector<int> ReadLabels(const std::string &path) {
  Matrix m = ReadMatrix(path);
  if (m.rows() != 1) throw Error(path + ": labels must be a 1 x t matrix");
  std::vector<int> labels(m.cols());
  for (Eigen::Index t = 0; t < m.cols(); t++) labels[t] = static_cast<int>(m(0, t));
  return labels;
}

}  // namespace tvnmf
