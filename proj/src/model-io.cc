// tvnmf/model-io.cc

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

#include "tvnmf/model-io.h"

#include <unistd.h>

#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tvnmf {

namespace fs = std::filesystem;

namespace {

const char kCreatedBy[] = "tvnmf 1.0";

void PutU32(std::string *out, uint32_t v) {
  for (int i = 0; i < 4; i++) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t GetU32(const std::string &s, size_t pos) {
  uint32_t v = 0;
  for (int i = 0; i < 4; i++) v |= uint32_t(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  return v;
}

std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string ReadFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

std::string UniqueSuffix() {
  static std::atomic<int> counter{0};
  return ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
}

std::string BlockName(const char *prefix, int c) {
  return std::string(prefix) + std::to_string(c) + ".mat";
}

// Number of files named <prefix><integer>.mat in dir.
int CountBlockFiles(const std::string &dir, const std::string &prefix) {
  int count = 0;
  for (const auto &entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.size() <= prefix.size() + 4 || name.compare(0, prefix.size(), prefix) != 0 ||
        name.compare(name.size() - 4, 4, ".mat") != 0)
      continue;
    std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - 4);
    if (std::all_of(digits.begin(), digits.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
      count++;
  }
  return count;
}

Matrix ReadShaped(const std::string &path, Eigen::Index rows, Eigen::Index cols) {
  if (!fs::exists(path)) throw Error("missing file " + path);
  Matrix m = ReadMatrix(path);
  if (m.rows() != rows || m.cols() != cols)
    throw Error("dimension mismatch: " + path + " is " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()) + ", manifest implies " + std::to_string(rows) + "x" +
                std::to_string(cols));
  return m;
}

void SetStft(Manifest *manifest, const std::optional<StftOptions> &stft) {
  if (!stft) return;
  manifest->Set("fft_size", stft->fft_size);
  manifest->Set("hop", stft->hop);
  manifest->Set("spectrogram_floor", stft->floor);
}

std::optional<StftOptions> GetStft(const Manifest &manifest) {
  if (!manifest.Has("fft_size")) return std::nullopt;
  StftOptions opts;
  opts.fft_size = manifest.GetInt("fft_size");
  opts.hop = manifest.GetInt("hop");
  opts.floor = manifest.GetDouble("spectrogram_floor");
  opts.Check();
  return opts;
}

void CheckVersion(const Manifest &manifest, const std::string &dir) {
  int version = manifest.GetInt("format_version");
  if (version != kBundleFormatVersion)
    throw Error(dir + ": unsupported format_version " + std::to_string(version));
}

}  // namespace

std::string EncodeMatrix(const Matrix &m) {
  if (!m.allFinite()) throw Error("refusing to write a matrix with non-finite entries");
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) throw Error("matrix too large for MAT1");
  std::string out;
  out.reserve(12 + 8 * static_cast<size_t>(m.size()));
  out.append("MAT1");
  PutU32(&out, static_cast<uint32_t>(m.rows()));
  PutU32(&out, static_cast<uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); i++)
    for (Eigen::Index j = 0; j < m.cols(); j++) {
      auto bits = std::bit_cast<uint64_t>(m(i, j));
      for (int b = 0; b < 8; b++) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  return out;
}

Matrix DecodeMatrix(const std::string &bytes, const std::string &what) {
  if (bytes.size() < 12) throw Error(what + ": truncated header");
  if (bytes.compare(0, 4, "MAT1") != 0) throw Error(what + ": bad magic");
  const uint64_t rows = GetU32(bytes, 4), cols = GetU32(bytes, 8);
  const uint64_t count = rows * cols;  // < 2^64 since both < 2^32
  if (count > (UINT64_MAX - 12) / 8) throw Error(what + ": dimension overflow");
  const uint64_t expected = 12 + 8 * count;
  if (bytes.size() < expected) throw Error(what + ": truncated payload");
  if (bytes.size() > expected) throw Error(what + ": trailing bytes after payload");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  size_t pos = 12;
  for (uint64_t i = 0; i < rows; i++)
    for (uint64_t j = 0; j < cols; j++) {
      uint64_t bits = 0;
      for (int b = 0; b < 8; b++)
        bits |= uint64_t(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
      pos += 8;
      double v = std::bit_cast<double>(bits);
      if (!std::isfinite(v)) throw Error(what + ": non-finite value");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  return m;
}

void WriteFileAtomically(const std::string &path, const std::string &bytes) {
  std::string tmp = path + UniqueSuffix();
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os.write(bytes.data(), static_cast<std::streamsize>(bytes.size())) || !os.flush()) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("cannot write " + path);
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot write " + path);
  }
}

void WriteMatrix(const std::string &path, const Matrix &m) {
  WriteFileAtomically(path, EncodeMatrix(m));
}

Matrix ReadMatrix(const std::string &path) {
  return DecodeMatrix(ReadFile(path), path);
}

void WriteMatrixText(const std::string &path, const Matrix &m) {
  if (!m.allFinite()) throw Error("refusing to write a matrix with non-finite entries");
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); i++) {
    for (Eigen::Index j = 0; j < m.cols(); j++) {
      if (j > 0) out.push_back(' ');
      out += FormatDouble(m(i, j));
    }
    out.push_back('\n');
  }
  WriteFileAtomically(path, out);
}

void Manifest::Set(const std::string &key, double value) { Set(key, FormatDouble(value)); }

const std::string &Manifest::Get(const std::string &key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error("manifest is missing key '" + key + "'");
  return it->second;
}

int Manifest::GetInt(const std::string &key) const {
  const std::string &s = Get(key);
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error("manifest key '" + key + "' is not an integer: " + s);
  return v;
}

double Manifest::GetDouble(const std::string &key) const {
  const std::string &s = Get(key);
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error("manifest key '" + key + "' is not a number: " + s);
  return v;
}

std::string Manifest::Serialize() const {
  std::string out;
  for (const auto &[k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

Manifest Manifest::Parse(const std::string &text, const std::string &what) {
  Manifest m;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(what + ":" + std::to_string(line_no) + ": expected key=value");
    m.Set(line.substr(0, eq), line.substr(eq + 1));
  }
  return m;
}

Manifest Manifest::Read(const std::string &path) {
  if (!fs::exists(path)) throw Error("missing file " + path);
  return Parse(ReadFile(path), path);
}

void WriteDirectoryAtomically(const std::string &dir,
                              const std::function<void(const std::string &)> &fn) {
  fs::path target = fs::path(dir).lexically_normal();
  if (target.filename().empty()) target = target.parent_path();
  fs::path tmp = target;
  tmp += UniqueSuffix();
  std::error_code ec;
  if (!target.parent_path().empty() && !fs::exists(target.parent_path()))
    throw Error("output parent directory does not exist: " + target.parent_path().string());
  if (!fs::create_directory(tmp, ec) || ec) throw Error("cannot create directory " + tmp.string());
  try {
    fn(tmp.string());
    if (fs::exists(target)) fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (const fs::filesystem_error &e) {
    fs::remove_all(tmp, ec);
    throw Error(std::string("cannot write ") + target.string() + ": " + e.what());
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

void SaveUbm(const std::string &dir, const UbmBundle &bundle) {
  WriteDirectoryAtomically(dir, [&](const std::string &tmp) {
    Manifest manifest;
    manifest.Set("format_version", kBundleFormatVersion);
    manifest.Set("d", bundle.ubm.FeatDim());
    manifest.Set("k", bundle.ubm.NumComponents());
    manifest.Set("lambda", bundle.lambda);
    manifest.Set("epsilon", bundle.epsilon);
    manifest.Set("created_by", std::string(kCreatedBy));
    SetStft(&manifest, bundle.stft);
    WriteMatrix(tmp + "/w_ubm.mat", bundle.ubm.Values());
    WriteFileAtomically(tmp + "/manifest", manifest.Serialize());
  });
}

UbmBundle LoadUbm(const std::string &dir) {
  Manifest manifest = Manifest::Read(dir + "/manifest");
  CheckVersion(manifest, dir);
  const int d = manifest.GetInt("d"), k = manifest.GetInt("k");
  if (d < 1 || k < 1) throw Error(dir + ": invalid dimensions in manifest");
  UbmBundle bundle;
  bundle.ubm = Dictionary(ReadShaped(dir + "/w_ubm.mat", d, k));
  bundle.lambda = manifest.GetDouble("lambda");
  bundle.epsilon = manifest.GetDouble("epsilon");
  bundle.stft = GetStft(manifest);
  return bundle;
}

void SaveModel(const std::string &dir, const TotalVariabilityModel &model,
               const std::optional<StftOptions> &stft) {
  WriteDirectoryAtomically(dir, [&](const std::string &tmp) {
    Manifest manifest;
    manifest.Set("format_version", kBundleFormatVersion);
    manifest.Set("d", model.FeatDim());
    manifest.Set("k", model.NumComponents());
    manifest.Set("s", model.IvectorDim());
    manifest.Set("lambda", model.Lambda());
    manifest.Set("epsilon", model.Epsilon());
    manifest.Set("created_by", std::string(kCreatedBy));
    SetStft(&manifest, stft);
    WriteMatrix(tmp + "/w_ubm.mat", model.Ubm().Values());
    for (int c = 0; c < model.NumComponents(); c++) {
      WriteMatrix(tmp + "/" + BlockName("t_block_", c), model.TBlocks()[c]);
      WriteMatrix(tmp + "/" + BlockName("sigma_block_", c), model.Sigma().blocks[c]);
    }
    WriteFileAtomically(tmp + "/manifest", manifest.Serialize());
  });
}

TotalVariabilityModel LoadModel(const std::string &dir, std::optional<StftOptions> *stft) {
  Manifest manifest = Manifest::Read(dir + "/manifest");
  CheckVersion(manifest, dir);
  const int d = manifest.GetInt("d"), k = manifest.GetInt("k"), s = manifest.GetInt("s");
  if (d < 1 || k < 1 || s < 1) throw Error(dir + ": invalid dimensions in manifest");

  for (const char *prefix : {"t_block_", "sigma_block_"}) {
    int found = CountBlockFiles(dir, prefix);
    if (found != k) {
      std::string missing;
      for (int c = 0; c < k && missing.empty(); c++)
        if (!fs::exists(dir + "/" + BlockName(prefix, c))) missing = dir + "/" + BlockName(prefix, c);
      throw Error("dimension mismatch: manifest declares k=" + std::to_string(k) + " but " +
                  std::to_string(found) + " " + prefix + "*.mat files exist" +
                  (missing.empty() ? "" : " (missing file " + missing + ")"));
    }
  }

  Dictionary ubm(ReadShaped(dir + "/w_ubm.mat", d, k));
  std::vector<Matrix> t_blocks;
  CovarianceBlocks sigma;
  for (int c = 0; c < k; c++) {
    t_blocks.push_back(ReadShaped(dir + "/" + BlockName("t_block_", c), d, s));
    sigma.blocks.push_back(ReadShaped(dir + "/" + BlockName("sigma_block_", c), d, d));
    sigma.jitter.push_back(0.0);
    sigma.defaulted.push_back(false);
  }
  TotalVariabilityModel model(std::move(ubm), std::move(t_blocks), std::move(sigma),
                              manifest.GetDouble("lambda"), manifest.GetDouble("epsilon"));
  if (stft != nullptr) *stft = GetStft(manifest);
  return model;
}

}  // namespace tvnmf
