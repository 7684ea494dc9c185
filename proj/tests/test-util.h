// tests/test-util.h

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

// Test-only helpers and oracles. Nothing here calls into the code paths the
// oracles are used to check.

#ifndef TVNMF_TESTS_TEST_UTIL_H_
#define TVNMF_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tvnmf/tvnmf-common.h"

namespace tvnmf::testing {

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "tvnmf-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::string &Path() const { return path_; }
  std::string operator/(const std::string &name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline Matrix RandomUniform(int rows, int cols, std::mt19937_64 &rng, double lo = 0.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; j++)
    for (int i = 0; i < rows; i++) m(i, j) = dist(rng);
  return m;
}

inline Matrix RandomNormal(int rows, int cols, std::mt19937_64 &rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; j++)
    for (int i = 0; i < rows; i++) m(i, j) = dist(rng);
  return m;
}

/// Random symmetric positive definite matrix.
inline Matrix RandomSpd(int n, std::mt19937_64 &rng) {
  Matrix a = RandomNormal(n, n, rng);
  return a * a.transpose() + n * Matrix::Identity(n, n);
}

/// Direct O(N^2) DFT magnitudes of x, bins 0..num_bins-1.
inline std::vector<double> DirectDftMagnitudes(const std::vector<double> &x, int num_bins) {
  const auto n = static_cast<int>(x.size());
  std::vector<double> out(num_bins);
  for (int k = 0; k < num_bins; k++) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < n; i++)
      acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * k * i / n);
    out[k] = std::abs(acc);
  }
  return out;
}

/// Principal angles (degrees) between the column spaces of a and b.
inline std::vector<double> PrincipalAnglesDegrees(const Matrix &a, const Matrix &b) {
  Eigen::HouseholderQR<Matrix> qa(a), qb(b);
  Matrix ua = qa.householderQ() * Matrix::Identity(a.rows(), a.cols());
  Matrix ub = qb.householderQ() * Matrix::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Matrix> svd(ua.transpose() * ub);
  std::vector<double> angles;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); i++) {
    double c = std::min(1.0, svd.singularValues()(i));
    angles.push_back(std::acos(c) * 180.0 / std::numbers::pi);
  }
  return angles;
}

/// Posterior of the ivector computed densely in supervector space: builds the
/// kd x kd block-diagonal Sigma and N_u = blockdiag(n_c I_d), and inverts with
/// full-pivot LU.
struct DensePosterior {
  Vector mean;
  Matrix covariance;
};

inline DensePosterior DenseIvectorPosterior(const Matrix &T, const std::vector<Matrix> &sigma,
                                            const Vector &n, const Matrix &f_centered) {
  const auto k = static_cast<int>(sigma.size());
  const auto d = sigma[0].rows();
  const auto kd = d * k, s = T.cols();
  Matrix big_sigma = Matrix::Zero(kd, kd), big_n = Matrix::Zero(kd, kd);
  Vector f(kd);
  for (int c = 0; c < k; c++) {
    big_sigma.block(c * d, c * d, d, d) = sigma[c];
    big_n.block(c * d, c * d, d, d) = n(c) * Matrix::Identity(d, d);
    f.segment(c * d, d) = f_centered.col(c);
  }
  Matrix sigma_inv = big_sigma.fullPivLu().inverse();
  Matrix L = Matrix::Identity(s, s) + T.transpose() * sigma_inv * big_n * T;
  DensePosterior out;
  out.covariance = L.fullPivLu().inverse();
  out.mean = out.covariance * T.transpose() * sigma_inv * f;
  return out;
}

inline std::string ReadBytes(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

inline void WriteBytes(const std::string &path, const std::string &bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline double RelativeError(const Matrix &got, const Matrix &want) {
  double denom = std::max(want.norm(), 1e-300);
  return (got - want).norm() / denom;
}

}  // namespace tvnmf::testing

#endif  // TVNMF_TESTS_TEST_UTIL_H_
