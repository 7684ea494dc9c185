// tvnmf/corpus.cc

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

#include "tvnmf/corpus.h"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "tvnmf/model-io.h"

namespace tvnmf {

namespace fs = std::filesystem;

std::vector<std::string> ReadUtteranceList(const std::string &list_path) {
  std::ifstream is(list_path);
  if (!is) throw Error("cannot open utterance list " + list_path);
  const fs::path base = fs::path(list_path).parent_path();
  std::vector<std::string> paths;
  std::string line;
  while (std::getline(is, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto last = line.find_last_not_of(" \t\r");
    fs::path p(line.substr(first, last - first + 1));
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) throw Error("utterance not found: " + p.string());
    paths.push_back(p.string());
  }
  if (paths.empty()) throw Error("utterance list " + list_path + " names no utterances");
  return paths;
}

Spectrogram LoadSpectrogram(const std::string &path, const StftOptions &stft, int expected_rate) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  try {
    if (ext == ".wav") return ComputeSpectrogram(LoadWav(path, expected_rate), stft);
    return Spectrogram::FromMatrix(ReadMatrix(path));
  } catch (const Error &e) {
    std::string msg = e.what();
    if (msg.find(path) == std::string::npos) msg = path + ": " + msg;
    throw Error(msg);
  }
}

}  // namespace tvnmf
