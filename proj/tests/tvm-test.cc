// tests/tvm-test.cc

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

#include "doctest.h"
#include "test-util.h"
#include "tvnmf/tvm.h"

using namespace tvnmf;
using namespace tvnmf::testing;

namespace {

CovarianceBlocks MakeSigma(std::vector<Matrix> blocks) {
  CovarianceBlocks sigma;
  for (auto &b : blocks) {
    sigma.blocks.push_back(std::move(b));
    sigma.jitter.push_back(0.0);
    sigma.defaulted.push_back(false);
  }
  return sigma;
}

TotalVariabilityModel ScalarModel(double w, double t, double sigma) {
  return TotalVariabilityModel(Dictionary(Matrix::Constant(1, 1, w)), {Matrix::Constant(1, 1, t)},
                               MakeSigma({Matrix::Constant(1, 1, sigma)}), 0.1, 1e-12);
}

SufficientStats ScalarStats(double n, double f_centered) {
  SufficientStats st;
  st.n = Vector::Constant(1, n);
  st.F = Matrix::Constant(1, 1, f_centered);
  st.F_centered = Matrix::Constant(1, 1, f_centered);
  st.num_frames = static_cast<int>(n);
  return st;
}

struct RandomInstance {
  TotalVariabilityModel model;
  SufficientStats stats;
};

RandomInstance MakeRandomInstance(int d, int k, int s, std::mt19937_64 &rng) {
  std::vector<Matrix> t_blocks, sig;
  for (int c = 0; c < k; c++) {
    t_blocks.push_back(RandomNormal(d, s, rng));
    sig.push_back(RandomSpd(d, rng));
  }
  TotalVariabilityModel model(Dictionary(RandomUniform(d, k, rng, 0.1, 1.0)), t_blocks,
                              MakeSigma(sig), 0.1, 1e-12);
  SufficientStats st;
  st.n = RandomUniform(k, 1, rng, 0.0, 20.0);
  st.F_centered = RandomNormal(d, k, rng, 3.0);
  st.F = st.F_centered;
  st.num_frames = static_cast<int>(st.n.sum());
  return {std::move(model), std::move(st)};
}

// Statistics drawn from the model itself: Fbar_c = n_c (T_c q + noise mean).
std::vector<SufficientStats> GenerativeStats(const Matrix &t_true, int d, int k, int utterances,
                                             int frames_per_component, double noise,
                                             std::mt19937_64 &rng, Matrix *ivectors) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto s = t_true.cols();
  std::vector<SufficientStats> out;
  ivectors->resize(utterances, s);
  for (int u = 0; u < utterances; u++) {
    Vector q(s);
    for (Eigen::Index j = 0; j < s; j++) q(j) = normal(rng);
    ivectors->row(u) = q.transpose();
    SufficientStats st;
    st.n = Vector::Constant(k, frames_per_component);
    st.F_centered.resize(d, k);
    for (int c = 0; c < k; c++) {
      Vector mean = t_true.middleRows(c * d, d) * q;
      for (int i = 0; i < d; i++)
        st.F_centered(i, c) = frames_per_component *
                              (mean(i) + noise * normal(rng) / std::sqrt(frames_per_component));
    }
    st.F = st.F_centered;
    st.num_frames = frames_per_component * k;
    out.push_back(std::move(st));
  }
  return out;
}

}  // namespace

TEST_CASE("zeroth-order counts sum to the frame count") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; trial++) {
    const int d = 5, k = 4, t = 10 + trial;
    Spectrogram V = Spectrogram::FromMatrix(RandomUniform(d, t, rng, 0.01, 2.0));
    Dictionary W(RandomUniform(d, k, rng, 0.01, 1.0));
    ActivationMatrix post = NormalizeColumns(ActivationMatrix(RandomUniform(k, t, rng)));
    SufficientStats st = ComputeStats(V, W, post);
    CHECK(std::abs(st.n.sum() - t) < 1e-6);
    CHECK((st.n.array() >= 0).all());
    CHECK(st.F.allFinite());
    CHECK(st.num_frames == t);
  }
}

TEST_CASE("single-component statistics by hand") {
  const double v = 2.5, w = 0.7;
  const int d = 3, t = 10;
  Spectrogram V = Spectrogram::FromMatrix(Matrix::Constant(d, t, v));
  Dictionary W(Matrix::Constant(d, 1, w));
  ActivationMatrix post(Matrix::Ones(1, t), true);
  SufficientStats st = ComputeStats(V, W, post);
  CHECK(st.n(0) == doctest::Approx(10.0));
  for (int i = 0; i < d; i++) {
    CHECK(st.F(i, 0) == doctest::Approx(t * std::log(v)).epsilon(1e-13));
    CHECK(st.F_centered(i, 0) == doctest::Approx(t * (std::log(v) - std::log(w))).epsilon(1e-13));
  }
}

TEST_CASE("centered statistic vanishes when frames equal the atom") {
  std::mt19937_64 rng(2);
  const int d = 6, k = 3, t = 12, c0 = 1;
  Matrix w = RandomUniform(d, k, rng, 0.1, 1.0);
  Spectrogram V = Spectrogram::FromMatrix(w.col(c0).replicate(1, t));
  Matrix post = Matrix::Zero(k, t);
  post.row(c0).setOnes();
  SufficientStats st = ComputeStats(V, Dictionary(w), ActivationMatrix(post, true));
  CHECK(st.F_centered.col(c0).cwiseAbs().maxCoeff() < 1e-12);
  // Unused components fall under the stat floor and get exactly zero.
  CHECK(st.F_centered.col(0).isZero(0.0));
  CHECK(st.F_centered.col(2).isZero(0.0));
}

TEST_CASE("compute_stats rejects bad inputs") {
  Spectrogram V = Spectrogram::FromMatrix(Matrix::Ones(3, 4));
  Dictionary W(Matrix::Ones(3, 2));
  CHECK_THROWS_AS(ComputeStats(V, W, ActivationMatrix(Matrix::Ones(2, 4))), Error);
  CHECK_THROWS_AS(ComputeStats(V, W, NormalizeColumns(ActivationMatrix(Matrix::Ones(2, 5)))),
                  Error);
}

TEST_CASE("covariance of frames at the mean is the jitter") {
  Matrix w(2, 1);
  w << 0.5, 2.0;
  Spectrogram V = Spectrogram::FromMatrix(w.replicate(1, 5));
  CovarianceBlocks sigma =
      EstimateCovariances(std::vector<Spectrogram>{V}, std::vector<ActivationMatrix>{ActivationMatrix(Matrix::Ones(1, 5), true)},
                          Dictionary(w));
  Matrix expected = sigma.jitter[0] * Matrix::Identity(2, 2);
  CHECK((sigma.blocks[0] - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(sigma.jitter[0] > 0.0);
  CHECK(sigma.jitter[0] < 1e-9);
}

TEST_CASE("scalar covariance by hand") {
  // log-values {0, 2} around log w = 1 with equal weight: variance 1.
  Matrix v(1, 2);
  v << 1.0, std::exp(2.0);
  Spectrogram V = Spectrogram::FromMatrix(v);
  Dictionary W(Matrix::Constant(1, 1, std::exp(1.0)));
  CovarianceBlocks sigma = EstimateCovariances(
      std::vector<Spectrogram>{V}, std::vector<ActivationMatrix>{ActivationMatrix(Matrix::Ones(1, 2), true)}, W);
  CHECK(sigma.blocks[0](0, 0) - sigma.jitter[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sigma.jitter[0] == doctest::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("covariance blocks are symmetric and positive definite") {
  for (uint64_t seed = 0; seed < 10; seed++) {
    std::mt19937_64 rng(seed);
    const int d = 5, k = 3;
    Dictionary W(RandomUniform(d, k, rng, 0.1, 1.0));
    CovarianceAccumulator acc(W);
    CovarianceAccumulator second(W);
    for (int u = 0; u < 3; u++) {
      const int t = 3 + u;
      Spectrogram V = Spectrogram::FromMatrix(RandomUniform(d, t, rng, 0.01, 2.0));
      ActivationMatrix post = NormalizeColumns(ActivationMatrix(RandomUniform(k, t, rng)));
      acc.Accumulate(V, post);
      second.Accumulate(V, post);
    }
    CovarianceBlocks sigma = acc.Finish();
    for (const Matrix &b : sigma.blocks) {
      CHECK((b - b.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(Eigen::LLT<Matrix>(b).info() == Eigen::Success);
    }
    // Merging doubles every scatter and count, leaving Sigma unchanged.
    acc.Add(second);
    CovarianceBlocks merged = acc.Finish();
    for (int c = 0; c < k; c++) CHECK(RelativeError(merged.blocks[c], sigma.blocks[c]) < 1e-12);

    CovarianceOptions diag;
    diag.diagonal = true;
    CovarianceBlocks dsig = second.Finish(diag);
    CHECK(dsig.diagonal);
    for (const Matrix &b : dsig.blocks) CHECK(Matrix(b.diagonal().asDiagonal()) == b);
  }
}

TEST_CASE("component without counts falls back to identity") {
  Dictionary W(Matrix::Ones(2, 2));
  Matrix post(2, 3);
  post << 1, 1, 1,
          0, 0, 0;
  CovarianceBlocks sigma = EstimateCovariances(
      std::vector<Spectrogram>{Spectrogram::FromMatrix(Matrix::Constant(2, 3, 2.0))},
      std::vector<ActivationMatrix>{ActivationMatrix(post, true)}, W);
  CHECK(sigma.defaulted[1]);
  CHECK(!sigma.defaulted[0]);
  CHECK((sigma.blocks[1] - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("e_step with T = 0 recovers the prior") {
  std::mt19937_64 rng(3);
  RandomInstance inst = MakeRandomInstance(3, 2, 4, rng);
  std::vector<Matrix> zeros(2, Matrix::Zero(3, 4));
  inst.model.SetTBlocks(zeros);
  IVectorPosterior post = EStep(inst.stats, inst.model);
  CHECK(post.mean.isZero(0.0));
  CHECK(post.covariance.isIdentity(1e-15));
  CHECK(post.objective == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("scalar e_step by hand") {
  // L = 1 + 2 * 1 * 1 * 1 = 3, mean = 4 / 3, covariance = 1 / 3.
  IVectorPosterior post = EStep(ScalarStats(2.0, 4.0), ScalarModel(1.0, 1.0, 1.0));
  CHECK(std::abs(post.mean(0) - 4.0 / 3.0) < 1e-12);
  CHECK(std::abs(post.covariance(0, 0) - 1.0 / 3.0) < 1e-12);
}

TEST_CASE("e_step matches the dense supervector-space oracle") {
  for (uint64_t seed = 0; seed < 20; seed++) {
    std::mt19937_64 rng(1000 + seed);
    RandomInstance inst = MakeRandomInstance(3, 2, 2, rng);
    IVectorPosterior post = EStep(inst.stats, inst.model);
    std::vector<Matrix> sig(inst.model.Sigma().blocks);
    DensePosterior dense = DenseIvectorPosterior(inst.model.TotalVariabilityMatrix(), sig,
                                                 inst.stats.n, inst.stats.F_centered);
    CHECK(RelativeError(post.mean, dense.mean) < 1e-8);
    CHECK(RelativeError(post.covariance, dense.covariance) < 1e-8);
  }
}

TEST_CASE("posterior covariance inverts the precision and shrinks") {
  for (uint64_t seed = 0; seed < 20; seed++) {
    std::mt19937_64 rng(2000 + seed);
    RandomInstance inst = MakeRandomInstance(4, 3, 5, rng);
    IVectorPosterior post = EStep(inst.stats, inst.model);
    Matrix L = Matrix::Identity(5, 5);
    for (int c = 0; c < 3; c++) {
      const Matrix &T = inst.model.TBlocks()[c];
      L += inst.stats.n(c) * T.transpose() * inst.model.Sigma().blocks[c].inverse() * T;
    }
    CHECK((post.covariance * L - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((post.covariance - post.covariance.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(post.covariance);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("e_step rejects mismatched statistics") {
  std::mt19937_64 rng(4);
  RandomInstance inst = MakeRandomInstance(3, 2, 2, rng);
  SufficientStats bad = inst.stats;
  bad.n = Vector::Ones(3);
  CHECK_THROWS_AS(EStep(bad, inst.model), Error);
}

TEST_CASE("scalar m_step by hand") {
  // F = 6, mu = 2, n = 3, Cov = 0: T = 6 * 2 / (3 * 4) = 1.
  IVectorPosterior post{Vector::Constant(1, 2.0), Matrix::Zero(1, 1), 0.0};
  std::vector<SufficientStats> stats{ScalarStats(3.0, 6.0)};
  std::vector<IVectorPosterior> posts{post};
  MStepResult m = MStep(stats, posts, {Matrix::Zero(1, 1)});
  CHECK(std::abs(m.t_blocks[0](0, 0) - 1.0) < 1e-12);
  CHECK(!m.loaded[0]);
}

TEST_CASE("m_step with zero posterior means gives zero blocks") {
  std::mt19937_64 rng(5);
  std::vector<SufficientStats> stats;
  std::vector<IVectorPosterior> posts;
  for (int u = 0; u < 4; u++) {
    SufficientStats st;
    st.n = RandomUniform(2, 1, rng, 1.0, 5.0);
    st.F_centered = RandomNormal(3, 2, rng);
    st.F = st.F_centered;
    stats.push_back(st);
    posts.push_back({Vector::Zero(2), Matrix::Identity(2, 2), 0.0});
  }
  MStepResult m = MStep(stats, posts, {Matrix::Ones(3, 2), Matrix::Ones(3, 2)});
  for (const Matrix &b : m.t_blocks) CHECK(b.isZero(0.0));
}

TEST_CASE("m_step solves its normal equations") {
  for (uint64_t seed = 0; seed < 10; seed++) {
    std::mt19937_64 rng(3000 + seed);
    const int d = 4, k = 3, s = 3, U = 6;
    std::vector<SufficientStats> stats;
    std::vector<IVectorPosterior> posts;
    for (int u = 0; u < U; u++) {
      SufficientStats st;
      st.n = RandomUniform(k, 1, rng, 0.5, 10.0);
      st.F_centered = RandomNormal(d, k, rng, 2.0);
      st.F = st.F_centered;
      stats.push_back(st);
      Matrix a = RandomNormal(s, s, rng, 0.3);
      posts.push_back({RandomNormal(s, 1, rng), a * a.transpose() + 0.1 * Matrix::Identity(s, s), 0.0});
    }
    MStepResult m = MStep(stats, posts, std::vector<Matrix>(k, Matrix::Zero(d, s)));
    for (int c = 0; c < k; c++) {
      Matrix A = Matrix::Zero(s, s), B = Matrix::Zero(d, s);
      for (int u = 0; u < U; u++) {
        A += stats[u].n(c) * (posts[u].covariance + posts[u].mean * posts[u].mean.transpose());
        B += stats[u].F_centered.col(c) * posts[u].mean.transpose();
      }
      CHECK((m.t_blocks[c] * A - B).norm() / B.norm() < 1e-8);
    }
  }
}

TEST_CASE("m_step skips components without counts and loads singular accumulators") {
  SufficientStats st;
  st.n = Vector::Zero(2);
  st.n(0) = 4.0;
  st.F_centered = Matrix::Ones(2, 2);
  st.F = st.F_centered;
  // Rank-one second moment with s = 2 and a single utterance: singular.
  IVectorPosterior post{(Vector(2) << 1.0, 2.0).finished(), Matrix::Zero(2, 2), 0.0};
  Matrix keep = Matrix::Constant(2, 2, 7.0);
  MStepResult m = MStep(std::vector<SufficientStats>{st}, std::vector<IVectorPosterior>{post},
                        {Matrix::Zero(2, 2), keep});
  CHECK(m.skipped[1]);
  CHECK(m.t_blocks[1] == keep);
  CHECK(m.loaded[0]);
  CHECK(m.t_blocks[0].allFinite());
}

TEST_CASE("train_tvm recovers a generating subspace") {
  std::mt19937_64 rng(11);
  const int d = 4, k = 3, s = 2, U = 200;
  Matrix t_true = RandomNormal(k * d, s, rng, 0.5);
  Matrix ivectors;
  const double noise = 0.1;
  std::vector<SufficientStats> stats = GenerativeStats(t_true, d, k, U, 30, noise, rng, &ivectors);
  Dictionary ubm(Matrix::Ones(d, k));
  CovarianceBlocks sigma = MakeSigma(std::vector<Matrix>(k, noise * noise * Matrix::Identity(d, d)));

  TvmTrainOptions opts;
  opts.ivector_dim = s;
  opts.em_iters = 20;
  opts.seed = 3;
  TvmTrainResult r = TrainTvm(stats, ubm, sigma, opts);
  std::vector<double> angles = PrincipalAnglesDegrees(r.model.TotalVariabilityMatrix(), t_true);
  for (double a : angles) CHECK(a < 5.0);
  REQUIRE(r.objective_trace.size() == 21);
  for (size_t i = 1; i < r.objective_trace.size(); i++)
    CHECK(r.objective_trace[i] >= r.objective_trace[i - 1] - 1e-6 * std::abs(r.objective_trace[i - 1]));

  TvmTrainResult again = TrainTvm(stats, ubm, sigma, opts);
  for (int c = 0; c < k; c++) CHECK(again.model.TBlocks()[c] == r.model.TBlocks()[c]);

  opts.num_jobs = 4;
  TvmTrainResult threaded = TrainTvm(stats, ubm, sigma, opts);
  for (int c = 0; c < k; c++) CHECK(threaded.model.TBlocks()[c] == r.model.TBlocks()[c]);
  CHECK(threaded.objective_trace == r.objective_trace);
}

TEST_CASE("train_tvm shapes and argument checks") {
  const int d = 5, k = 4, s = 3;
  std::vector<SufficientStats> stats;
  std::mt19937_64 rng(13);
  for (int u = 0; u < 3; u++) {
    SufficientStats st;
    st.n = RandomUniform(k, 1, rng, 1.0, 3.0);
    st.F_centered = RandomNormal(d, k, rng);
    st.F = st.F_centered;
    stats.push_back(st);
  }
  Dictionary ubm(Matrix::Ones(d, k));
  CovarianceBlocks sigma = MakeSigma(std::vector<Matrix>(k, Matrix::Identity(d, d)));
  TvmTrainOptions opts;
  opts.ivector_dim = s;
  opts.em_iters = 1;
  TvmTrainResult r = TrainTvm(stats, ubm, sigma, opts);
  CHECK(r.model.TotalVariabilityMatrix().rows() == k * d);
  CHECK(r.model.TotalVariabilityMatrix().cols() == s);
  CHECK(r.model.UbmSupervector().size() == k * d);

  opts.em_iters = 0;
  CHECK_THROWS_AS(TrainTvm(stats, ubm, sigma, opts), Error);
  opts.em_iters = 1;
  CHECK_THROWS_AS(TrainTvm(std::vector<SufficientStats>{}, ubm, sigma, opts), Error);
}

TEST_CASE("model construction validates block counts and shapes") {
  Dictionary ubm(Matrix::Ones(2, 2));
  CovarianceBlocks sigma = MakeSigma({Matrix::Identity(2, 2), Matrix::Identity(2, 2)});
  CHECK_THROWS_AS(TotalVariabilityModel(ubm, {Matrix::Zero(2, 1)}, sigma, 0.1, 1e-12), Error);
  CHECK_THROWS_AS(TotalVariabilityModel(ubm, {Matrix::Zero(2, 1), Matrix::Zero(3, 1)}, sigma, 0.1, 1e-12),
                  Error);
  CovarianceBlocks bad = MakeSigma({Matrix::Identity(2, 2), -Matrix::Identity(2, 2)});
  CHECK_THROWS_AS(TotalVariabilityModel(ubm, {Matrix::Zero(2, 1), Matrix::Zero(2, 1)}, bad, 0.1, 1e-12),
                  Error);
}
