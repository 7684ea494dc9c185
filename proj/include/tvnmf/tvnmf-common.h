// tvnmf/tvnmf-common.h

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

#ifndef TVNMF_TVNMF_COMMON_H_
#define TVNMF_TVNMF_COMMON_H_

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

namespace tvnmf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Shared floor for dictionary/activation entries and reconstruction
/// denominators. Also the floor applied before taking log-activations.
inline constexpr double kDefaultEpsilon = 1e-12;

/// All recoverable failures in the library are reported with this type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool AllFinite(const Eigen::Ref<const Matrix> &m);

/// Logger writing to stderr. Level comes from TVNMF_LOG (quiet|info|debug),
/// default info.
spdlog::logger &Log();

/// Runs fn(0..n-1) on up to num_jobs threads. Callers write results into
/// per-index slots and reduce afterwards in index order, so results do not
/// depend on num_jobs.
void ParallelFor(int64_t n, int num_jobs, const std::function<void(int64_t)> &fn);

}  // namespace tvnmf

#endif  // TVNMF_TVNMF_COMMON_H_
