// tools/tvnmf.cc

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

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tvnmf/corpus.h"
#include "tvnmf/features.h"
#include "tvnmf/model-io.h"
#include "tvnmf/nmf.h"
#include "tvnmf/synth.h"
#include "tvnmf/tvm.h"

using namespace tvnmf;

namespace {

struct TrainUbmArgs {
  std::string list, out;
  NmfConfig nmf;
  StftOptions stft;
  int sample_rate = 0;
};

struct TrainTvmArgs {
  std::string list, ubm, out;
  int s = 400;
  int em_iters = 10;
  uint64_t seed = 0;
  int jobs = 1;
  int nmf_iters = 200;
  double rel_tol = 1e-5;
  bool diagonal_cov = false;
  int sample_rate = 0;
};

struct ExtractArgs {
  std::string model, in, out, format = "mat1";
  uint64_t seed = 0;
  int nmf_iters = 200;
  double rel_tol = 1e-5;
  double lambda = -1.0;
  int sample_rate = 0;
};

std::vector<Spectrogram> LoadCorpus(const std::string &list, const StftOptions &stft,
                                    int sample_rate, int jobs) {
  std::vector<std::string> paths = ReadUtteranceList(list);
  std::vector<Spectrogram> corpus(paths.size());
  ParallelFor(static_cast<int64_t>(paths.size()), jobs,
              [&](int64_t u) { corpus[u] = LoadSpectrogram(paths[u], stft, sample_rate); });
  return corpus;
}

int RunTrainUbm(const TrainUbmArgs &args) {
  std::vector<Spectrogram> corpus = LoadCorpus(args.list, args.stft, args.sample_rate, 1);
  int64_t frames = 0;
  for (const auto &V : corpus) frames += V.NumFrames();
  Log().info("training UBM dictionary on {} utterances, {} frames, d={}, k={}", corpus.size(),
             frames, corpus[0].NumBins(), args.nmf.k);
  NmfResult result = Factorize(corpus, args.nmf);
  UbmBundle bundle{result.dictionary, args.nmf.lambda, args.nmf.epsilon, args.stft};
  SaveUbm(args.out, bundle);
  std::printf("final cost %.10g after %d iterations (d=%d, k=%d)\n", result.cost_trace.back(),
              result.iterations, result.dictionary.FeatDim(), result.dictionary.NumComponents());
  return 0;
}

int RunTrainTvm(const TrainTvmArgs &args) {
  UbmBundle ubm = LoadUbm(args.ubm);
  const StftOptions stft = ubm.stft.value_or(StftOptions{});
  std::vector<Spectrogram> corpus = LoadCorpus(args.list, stft, args.sample_rate, args.jobs);
  for (size_t u = 0; u < corpus.size(); u++)
    if (corpus[u].NumBins() != ubm.ubm.FeatDim())
      throw Error("dimension mismatch: utterance " + std::to_string(u) + " has " +
                  std::to_string(corpus[u].NumBins()) + " bins, UBM has " +
                  std::to_string(ubm.ubm.FeatDim()));

  NmfConfig nmf;
  nmf.k = ubm.ubm.NumComponents();
  nmf.lambda = ubm.lambda;
  nmf.epsilon = ubm.epsilon;
  nmf.max_iters = args.nmf_iters;
  nmf.rel_tol = args.rel_tol;
  nmf.seed = args.seed;

  std::vector<ActivationMatrix> posteriors(corpus.size());
  std::vector<SufficientStats> stats(corpus.size());
  ParallelFor(static_cast<int64_t>(corpus.size()), args.jobs, [&](int64_t u) {
    posteriors[u] = NormalizeColumns(InferActivations(corpus[u], ubm.ubm, nmf), nmf.epsilon);
    stats[u] = ComputeStats(corpus[u], ubm.ubm, posteriors[u]);
  });
  CovarianceAccumulator acc(ubm.ubm);
  for (size_t u = 0; u < corpus.size(); u++) acc.Accumulate(corpus[u], posteriors[u]);
  CovarianceOptions cov_opts;
  cov_opts.diagonal = args.diagonal_cov;
  CovarianceBlocks sigma = acc.Finish(cov_opts);

  TvmTrainOptions opts;
  opts.ivector_dim = args.s;
  opts.em_iters = args.em_iters;
  opts.seed = args.seed;
  opts.num_jobs = args.jobs;
  opts.lambda = ubm.lambda;
  opts.epsilon = ubm.epsilon;
  TvmTrainResult result = TrainTvm(stats, ubm.ubm, std::move(sigma), opts);
  SaveModel(args.out, result.model, ubm.stft);
  for (size_t i = 0; i < result.objective_trace.size(); i++)
    std::printf("iteration %zu objective %.12g\n", i, result.objective_trace[i]);
  const Matrix T = result.model.TotalVariabilityMatrix();
  std::printf("total variability matrix %ldx%ld (d=%d, k=%d, s=%d)\n", static_cast<long>(T.rows()),
              static_cast<long>(T.cols()), result.model.FeatDim(), result.model.NumComponents(),
              result.model.IvectorDim());
  return 0;
}

int RunExtract(const ExtractArgs &args) {
  std::optional<StftOptions> stft;
  TotalVariabilityModel model = LoadModel(args.model, &stft);
  Spectrogram V = LoadSpectrogram(args.in, stft.value_or(StftOptions{}), args.sample_rate);
  NmfConfig nmf = ModelNmfConfig(model, args.nmf_iters, args.rel_tol, args.seed);
  if (args.lambda >= 0.0) nmf.lambda = args.lambda;
  UtteranceFeatures result =
      ExtractFeatures(V, model, nmf, std::filesystem::path(args.in).stem().string());

  const std::string ivec_path = args.out + ".ivec";
  if (args.format == "ascii")
    WriteMatrixText(args.out, result.features.values.transpose());
  else
    WriteMatrix(args.out, result.features.values);
  try {
    WriteMatrix(ivec_path, result.ivector.mean.transpose());
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(args.out, ec);
    throw;
  }
  std::printf("wrote %d x %d features to %s and %d-dim ivector to %s\n",
              static_cast<int>(result.features.values.rows()),
              static_cast<int>(result.features.values.cols()), args.out.c_str(),
              model.IvectorDim(), ivec_path.c_str());
  return 0;
}

int RunSynth(const SynthOptions &opts, const std::string &out_dir) {
  SynthCorpus corpus = GenerateSynthCorpus(opts);
  WriteSynthCorpus(out_dir, corpus, opts);
  std::printf("wrote %d utterances of %d frames (d=%d, k=%d, s=%d) to %s\n", opts.utterances,
              opts.frames, opts.d, opts.k, opts.s, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Noise-robust NMF features with total variability dictionary adaptation"};
  app.require_subcommand(1);

  TrainUbmArgs ubm_args;
  auto *train_ubm = app.add_subcommand("train-ubm", "Learn the UBM dictionary with sparse KL-NMF");
  train_ubm->add_option("--list", ubm_args.list, "Utterance list (WAV or .mat spectrograms)")
      ->required()->check(CLI::ExistingFile);
  train_ubm->add_option("--k", ubm_args.nmf.k, "Dictionary size")->default_val(60)
      ->check(CLI::PositiveNumber);
  train_ubm->add_option("--lambda", ubm_args.nmf.lambda, "Sparsity weight on activations")
      ->default_val(0.1)->check(CLI::NonNegativeNumber);
  train_ubm->add_option("--iters", ubm_args.nmf.max_iters, "Maximum NMF iterations")
      ->default_val(200)->check(CLI::PositiveNumber);
  train_ubm->add_option("--rel-tol", ubm_args.nmf.rel_tol, "Relative cost change to stop at")
      ->default_val(1e-5)->check(CLI::NonNegativeNumber);
  train_ubm->add_option("--seed", ubm_args.nmf.seed, "Initialization seed")->default_val(0);
  train_ubm->add_option("--fft-size", ubm_args.stft.fft_size, "FFT size (power of two)")
      ->default_val(256)->check(CLI::PositiveNumber);
  train_ubm->add_option("--hop", ubm_args.stft.hop, "Frame hop in samples")->default_val(128)
      ->check(CLI::PositiveNumber);
  train_ubm->add_option("--floor", ubm_args.stft.floor, "Spectrogram magnitude floor")
      ->default_val(1e-8)->check(CLI::PositiveNumber);
  train_ubm->add_option("--sample-rate", ubm_args.sample_rate,
                        "Require WAV inputs at this rate (0 accepts any)")->default_val(0);
  train_ubm->add_option("--out", ubm_args.out, "Output UBM bundle directory")->required();

  TrainTvmArgs tvm_args;
  auto *train_tvm = app.add_subcommand("train-tvm", "Estimate the total variability model");
  train_tvm->add_option("--list", tvm_args.list, "Utterance list")->required()
      ->check(CLI::ExistingFile);
  train_tvm->add_option("--ubm", tvm_args.ubm, "UBM bundle directory")->required()
      ->check(CLI::ExistingDirectory);
  train_tvm->add_option("--s", tvm_args.s, "Ivector dimension")->default_val(400)
      ->check(CLI::PositiveNumber);
  train_tvm->add_option("--em-iters", tvm_args.em_iters, "EM iterations (>= 1)")->default_val(10)
      ->check(CLI::PositiveNumber);
  train_tvm->add_option("--seed", tvm_args.seed, "Seed for T and activation init")->default_val(0);
  train_tvm->add_option("--jobs", tvm_args.jobs, "Parallel per-utterance workers")->default_val(1)
      ->check(CLI::PositiveNumber);
  train_tvm->add_option("--nmf-iters", tvm_args.nmf_iters, "Activation inference iterations")
      ->default_val(200)->check(CLI::PositiveNumber);
  train_tvm->add_option("--rel-tol", tvm_args.rel_tol, "Activation inference stopping tolerance")
      ->default_val(1e-5)->check(CLI::NonNegativeNumber);
  train_tvm->add_flag("--diagonal-cov", tvm_args.diagonal_cov, "Keep only covariance diagonals");
  train_tvm->add_option("--sample-rate", tvm_args.sample_rate, "Required WAV rate (0 = any)")
      ->default_val(0);
  train_tvm->add_option("--out", tvm_args.out, "Output model bundle directory")->required();

  ExtractArgs ext_args;
  auto *extract = app.add_subcommand("extract", "Extract log-activation features and the ivector");
  extract->add_option("--model", ext_args.model, "Model bundle directory")->required()
      ->check(CLI::ExistingDirectory);
  extract->add_option("--in", ext_args.in, "Input WAV or .mat spectrogram")->required()
      ->check(CLI::ExistingFile);
  extract->add_option("--out", ext_args.out, "Output feature file (ivector goes to <out>.ivec)")
      ->required();
  extract->add_option("--format", ext_args.format, "Feature file format")->default_val("mat1")
      ->check(CLI::IsMember({"mat1", "ascii"}));
  extract->add_option("--seed", ext_args.seed, "Activation init seed")->default_val(0);
  extract->add_option("--nmf-iters", ext_args.nmf_iters, "Activation inference iterations")
      ->default_val(200)->check(CLI::PositiveNumber);
  extract->add_option("--rel-tol", ext_args.rel_tol, "Activation inference stopping tolerance")
      ->default_val(1e-5)->check(CLI::NonNegativeNumber);
  extract->add_option("--lambda", ext_args.lambda,
                      "Sparsity weight for inference (default: the model's)")
      ->check(CLI::NonNegativeNumber);
  extract->add_option("--sample-rate", ext_args.sample_rate, "Required WAV rate (0 = any)")
      ->default_val(0);

  SynthOptions synth_opts;
  std::string synth_out;
  auto *synth = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
  synth->add_option("--d", synth_opts.d, "Feature dimension")->default_val(4)
      ->check(CLI::PositiveNumber);
  synth->add_option("--k", synth_opts.k, "Components")->default_val(3)->check(CLI::PositiveNumber);
  synth->add_option("--s", synth_opts.s, "Ivector dimension")->default_val(2)
      ->check(CLI::PositiveNumber);
  synth->add_option("--utterances", synth_opts.utterances, "Utterance count")->default_val(200)
      ->check(CLI::PositiveNumber);
  synth->add_option("--frames", synth_opts.frames, "Frames per utterance")->default_val(100)
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_opts.seed, "Generator seed")->default_val(0);
  synth->add_option("--noise-std", synth_opts.noise_std, "Log-domain frame noise")
      ->default_val(0.05)->check(CLI::NonNegativeNumber);
  synth->add_option("--t-scale", synth_opts.t_scale, "Std of ground-truth T entries")
      ->default_val(0.3)->check(CLI::NonNegativeNumber);
  synth->add_option("--out-dir", synth_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_ubm) return RunTrainUbm(ubm_args);
    if (*train_tvm) return RunTrainTvm(tvm_args);
    if (*extract) return RunExtract(ext_args);
    if (*synth) return RunSynth(synth_opts, synth_out);
  } catch (const std::exception &e) {
    Log().error("{}", e.what());
    return 1;
  }
  return 2;
}
