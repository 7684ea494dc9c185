// tvnmf/spectrogram.h

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

#ifndef TVNMF_SPECTROGRAM_H_
#define TVNMF_SPECTROGRAM_H_

#include <string>
#include <vector>

#include "tvnmf/tvnmf-common.h"

namespace tvnmf {

/// Mono audio with amplitudes in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;
};

struct StftOptions {
  int fft_size = 256;   // d = fft_size / 2 + 1 = 129 at the default
  int hop = 128;
  double floor = 1e-8;  // every magnitude is at least this

  void Check() const;
};

/// Magnitude spectrogram, d frequency bins x t frames. Every entry is finite
/// and >= Floor() > 0, so element-wise logs are always defined.
class Spectrogram {
 public:
  Spectrogram() = default;
  /// Throws unless all entries are finite and >= floor > 0.
  Spectrogram(Matrix values, double floor);
  /// For matrices read from disk: floor is taken as the smallest entry, which
  /// must be > 0.
  static Spectrogram FromMatrix(Matrix values);

  const Matrix &Values() const { return values_; }
  int NumBins() const { return static_cast<int>(values_.rows()); }
  int NumFrames() const { return static_cast<int>(values_.cols()); }
  double Floor() const { return floor_; }

 private:
  Matrix values_;
  double floor_ = 0.0;
};

/// Reads RIFF/WAVE 16-bit PCM mono. If expected_rate > 0 the header rate must
/// match it.
AudioBuffer LoadWav(const std::string &path, int expected_rate = 0);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1 - 2^-15].
void WriteWav(const std::string &path, const AudioBuffer &audio);

/// Hann-windowed STFT magnitudes, floored at opts.floor.
Spectrogram ComputeSpectrogram(const AudioBuffer &audio,
                               const StftOptions &opts);

/// Periodic Hann window of the given length.
std::vector<double> HannWindow(int length);

}  // namespace tvnmf

#endif  // TVNMF_SPECTROGRAM_H_
