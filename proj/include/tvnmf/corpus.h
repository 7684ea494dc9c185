// tvnmf/corpus.h

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

#ifndef TVNMF_CORPUS_H_
#define TVNMF_CORPUS_H_

#include <string>
#include <vector>

#include "tvnmf/spectrogram.h"

namespace tvnmf {

/// One path per line; blank lines and lines starting with '#' are skipped.
/// Relative paths are resolved against the list file's directory. Every path
/// must exist and the list must name at least one utterance.
std::vector<std::string> ReadUtteranceList(const std::string &list_path);

/// .wav files go through LoadWav + ComputeSpectrogram; anything else is read
/// as a MAT1 spectrogram (entries must be > 0).
Spectrogram LoadSpectrogram(const std::string &path, const StftOptions &stft,
                            int expected_rate = 0);

}  // namespace tvnmf

#endif  // TVNMF_CORPUS_H_
