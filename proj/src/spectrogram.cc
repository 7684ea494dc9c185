// tvnmf/spectrogram.cc

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

#include "tvnmf/spectrogram.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace tvnmf {

namespace {

uint32_t ReadU32(const unsigned char *p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}

uint16_t ReadU16(const unsigned char *p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

void PutU32(std::string *out, uint32_t v) {
  for (int i = 0; i < 4; i++) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU16(std::string *out, uint16_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>(v >> 8));
}

// The FFTW planner is not thread-safe; execution of an existing plan is.
std::mutex &PlannerMutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    if (in_ == nullptr || out_ == nullptr) throw Error("fftw allocation failed");
    std::lock_guard<std::mutex> lock(PlannerMutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(PlannerMutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft &) = delete;
  RealFft &operator=(const RealFft &) = delete;

  double *Input() { return in_; }
  void Execute() { fftw_execute(plan_); }
  double Magnitude(int bin) const { return std::hypot(out_[bin][0], out_[bin][1]); }

 private:
  int n_;
  double *in_ = nullptr;
  fftw_complex *out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

void StftOptions::Check() const {
  if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0)
    throw Error("fft_size must be a power of two >= 2, got " + std::to_string(fft_size));
  if (hop < 1) throw Error("hop must be >= 1");
  if (!(floor > 0.0) || !std::isfinite(floor)) throw Error("floor must be a positive finite value");
}

Spectrogram::Spectrogram(Matrix values, double floor)
    : values_(std::move(values)), floor_(floor) {
  if (!(floor_ > 0.0)) throw Error("spectrogram floor must be > 0");
  if (!values_.allFinite()) throw Error("spectrogram has non-finite entries");
  if (values_.size() > 0 && values_.minCoeff() < floor_)
    throw Error("spectrogram entry below floor");
}

Spectrogram Spectrogram::FromMatrix(Matrix values) {
  if (values.size() == 0) throw Error("empty spectrogram");
  if (!values.allFinite()) throw Error("spectrogram has non-finite entries");
  double min_value = values.minCoeff();
  if (!(min_value > 0.0)) throw Error("spectrogram entries must be strictly positive");
  return Spectrogram(std::move(values), min_value);
}

AudioBuffer LoadWav(const std::string &path, int expected_rate) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto *data = reinterpret_cast<const unsigned char *>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(data, "RIFF", 4) != 0 ||
      std::memcmp(data + 8, "WAVE", 4) != 0)
    throw Error(path + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  int channels = 0, bits = 0, rate = 0;
  const unsigned char *pcm = nullptr;
  size_t pcm_bytes = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    uint32_t chunk_size = ReadU32(data + pos + 4);
    size_t body = pos + 8;
    size_t available = bytes.size() - body;
    if (std::memcmp(data + pos, "fmt ", 4) == 0) {
      if (chunk_size < 16 || available < 16) throw Error(path + ": truncated fmt chunk");
      uint16_t format = ReadU16(data + body);
      channels = ReadU16(data + body + 2);
      rate = static_cast<int>(ReadU32(data + body + 4));
      bits = ReadU16(data + body + 14);
      bool pcm_format = format == 1;
      if (format == 0xFFFE && chunk_size >= 40 && available >= 40)
        pcm_format = ReadU16(data + body + 24) == 1;  // extensible, PCM subformat
      if (!pcm_format) throw Error(path + ": unsupported encoding (only PCM)");
      have_fmt = true;
    } else if (std::memcmp(data + pos, "data", 4) == 0) {
      pcm = data + body;
      pcm_bytes = std::min<size_t>(chunk_size, available);
      break;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }
  if (!have_fmt) throw Error(path + ": missing fmt chunk");
  if (channels != 1)
    throw Error(path + ": unsupported channel count " + std::to_string(channels));
  if (bits != 16)
    throw Error(path + ": unsupported encoding (" + std::to_string(bits) + "-bit, need 16-bit PCM)");
  if (rate <= 0) throw Error(path + ": invalid sample rate");
  if (expected_rate > 0 && rate != expected_rate)
    throw Error(path + ": sample rate " + std::to_string(rate) + " != expected " +
                std::to_string(expected_rate));
  if (pcm == nullptr || pcm_bytes < 2) throw Error(path + ": zero-length audio");

  AudioBuffer audio;
  audio.sample_rate = rate;
  audio.samples.resize(pcm_bytes / 2);
  for (size_t i = 0; i < audio.samples.size(); i++) {
    auto v = static_cast<int16_t>(ReadU16(pcm + 2 * i));
    audio.samples[i] = v / 32768.0;
  }
  return audio;
}

void WriteWav(const std::string &path, const AudioBuffer &audio) {
  if (audio.sample_rate <= 0) throw Error("invalid sample rate");
  std::string out;
  uint32_t data_bytes = static_cast<uint32_t>(audio.samples.size() * 2);
  out.append("RIFF");
  PutU32(&out, 36 + data_bytes);
  out.append("WAVEfmt ");
  PutU32(&out, 16);
  PutU16(&out, 1);
  PutU16(&out, 1);
  PutU32(&out, static_cast<uint32_t>(audio.sample_rate));
  PutU32(&out, static_cast<uint32_t>(audio.sample_rate * 2));
  PutU16(&out, 2);
  PutU16(&out, 16);
  out.append("data");
  PutU32(&out, data_bytes);
  for (double s : audio.samples) {
    double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    auto v = static_cast<int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    PutU16(&out, static_cast<uint16_t>(v));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os.write(out.data(), static_cast<std::streamsize>(out.size())))
    throw Error("cannot write " + path);
}

std::vector<double> HannWindow(int length) {
  std::vector<double> w(length);
  for (int i = 0; i < length; i++)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / length);
  return w;
}

Spectrogram ComputeSpectrogram(const AudioBuffer &audio, const StftOptions &opts) {
  opts.Check();
  const auto len = static_cast<int64_t>(audio.samples.size());
  if (len < opts.fft_size)
    throw Error("audio shorter than one frame (" + std::to_string(len) + " < " +
                std::to_string(opts.fft_size) + " samples)");
  for (double s : audio.samples)
    if (!std::isfinite(s)) throw Error("audio has non-finite samples");

  const int num_bins = opts.fft_size / 2 + 1;
  const int64_t num_frames = 1 + (len - opts.fft_size) / opts.hop;
  const std::vector<double> window = HannWindow(opts.fft_size);
  RealFft fft(opts.fft_size);
  Matrix values(num_bins, num_frames);
  for (int64_t j = 0; j < num_frames; j++) {
    const double *frame = audio.samples.data() + j * opts.hop;
    double *in = fft.Input();
    for (int i = 0; i < opts.fft_size; i++) in[i] = frame[i] * window[i];
    fft.Execute();
    for (int i = 0; i < num_bins; i++)
      values(i, j) = std::max(fft.Magnitude(i), opts.floor);
  }
  return Spectrogram(std::move(values), opts.floor);
}

}  // namespace tvnmf
