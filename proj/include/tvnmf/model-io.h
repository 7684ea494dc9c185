// tvnmf/model-io.h

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

// MAT1 matrix files and the model bundle directory.
//
// MAT1 layout (all little-endian):
//   bytes 0-3    "MAT1"
//   bytes 4-7    rows, uint32
//   bytes 8-11   cols, uint32
//   bytes 12-    rows * cols binary64 values, row-major
//
// Bundle layout:
//   manifest               key=value lines
//   w_ubm.mat              d x k
//   t_block_<c>.mat        d x s, c = 0..k-1
//   sigma_block_<c>.mat    d x d

#ifndef TVNMF_MODEL_IO_H_
#define TVNMF_MODEL_IO_H_

#include <map>
#include <optional>
#include <string>

#include "tvnmf/nmf.h"
#include "tvnmf/spectrogram.h"
#include "tvnmf/tvm.h"

namespace tvnmf {

inline constexpr int kBundleFormatVersion = 1;

std::string EncodeMatrix(const Matrix &m);
Matrix DecodeMatrix(const std::string &bytes, const std::string &what = "matrix");

void WriteMatrix(const std::string &path, const Matrix &m);
Matrix ReadMatrix(const std::string &path);

/// Text export: one row per line, space-separated, shortest round-trip
/// decimal form.
void WriteMatrixText(const std::string &path, const Matrix &m);

/// Ordered key=value manifest.
class Manifest {
 public:
  void Set(const std::string &key, const std::string &value) { entries_[key] = value; }
  void Set(const std::string &key, double value);
  void Set(const std::string &key, int value) { Set(key, std::to_string(value)); }
  bool Has(const std::string &key) const { return entries_.count(key) != 0; }
  const std::string &Get(const std::string &key) const;
  int GetInt(const std::string &key) const;
  double GetDouble(const std::string &key) const;

  std::string Serialize() const;
  static Manifest Parse(const std::string &text, const std::string &what = "manifest");
  static Manifest Read(const std::string &path);

 private:
  std::map<std::string, std::string> entries_;
};

/// STFT settings recorded alongside the UBM so later stages featurize WAV
/// inputs the same way.
struct UbmBundle {
  Dictionary ubm;
  double lambda = 0.1;
  double epsilon = kDefaultEpsilon;
  std::optional<StftOptions> stft;
};

/// Writes manifest (without s) and w_ubm.mat.
void SaveUbm(const std::string &dir, const UbmBundle &bundle);
UbmBundle LoadUbm(const std::string &dir);

void SaveModel(const std::string &dir, const TotalVariabilityModel &model,
               const std::optional<StftOptions> &stft = std::nullopt);
TotalVariabilityModel LoadModel(const std::string &dir,
                                std::optional<StftOptions> *stft = nullptr);

/// Writes into a fresh sibling directory via fn, then renames it over dir.
/// If fn throws, nothing is left behind and dir is untouched.
void WriteDirectoryAtomically(const std::string &dir,
                              const std::function<void(const std::string &)> &fn);

/// Writes a file by renaming a completed temporary over it.
void WriteFileAtomically(const std::string &path, const std::string &bytes);

}  // namespace tvnmf

#endif  // TVNMF_MODEL_IO_H_
