// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

#include "derev/fft.hpp"
#include "derev/types.hpp"

namespace derev {

struct StftConfig {
  int frame_len = 512;
  int hop = 256;
  int fft_len = 512;
  double sample_rate = 16000.0;

  int bins() const { return fft_len / 2 + 1; }
  double bin_frequency(int k) const { return k * sample_rate / fft_len; }
  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

// One-sided multichannel spectrogram. Storage is frame-major, then bin, then
// channel, so the M-vector y(l, k) is contiguous.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(int frames, int bins, int channels, std::size_t signal_length);

  int frames() const { return frames_; }
  int bins() const { return bins_; }
  int channels() const { return channels_; }
  // Number of time-domain samples the spectrogram was computed from.
  std::size_t signal_length() const { return signal_length_; }

  Complex& at(int frame, int bin, int channel) {
    return data_[index(frame, bin) + static_cast<std::size_t>(channel)];
  }
  const Complex& at(int frame, int bin, int channel) const {
    return data_[index(frame, bin) + static_cast<std::size_t>(channel)];
  }
  Eigen::Map<CVector> vec(int frame, int bin) {
    return {data_.data() + index(frame, bin), channels_};
  }
  Eigen::Map<const CVector> vec(int frame, int bin) const {
    return {data_.data() + index(frame, bin), channels_};
  }

  std::vector<Complex>& data() { return data_; }
  const std::vector<Complex>& data() const { return data_; }

 private:
  std::size_t index(int frame, int bin) const {
    return (static_cast<std::size_t>(frame) * bins_ + bin) * channels_;
  }

  int frames_ = 0;
  int bins_ = 0;
  int channels_ = 0;
  std::size_t signal_length_ = 0;
  std::vector<Complex> data_;
};

// Periodic square-root Hann window. Squared, it is overlap-add constant at 50% hop.
std::vector<double> sqrt_hann_window(int length);

// Number of frames produced for a signal of the given length.
int stft_frame_count(std::size_t signal_length, const StftConfig& cfg);

// Weighted overlap-add STFT with a square-root Hann window used for both
// analysis and synthesis. The input is padded with frame_len - hop zeros at the
// front, so frame l covers padded samples [l*hop, l*hop + frame_len) and every
// input sample lies under two frames.
class Stft {
 public:
  explicit Stft(const StftConfig& cfg);

  const StftConfig& config() const { return cfg_; }
  const std::vector<double>& window() const { return window_; }

  Spectrogram analyze(const Waveform& signal) const;
  Waveform synthesize(const Spectrogram& spec) const;

  // Single-frame helpers: frame is frame_len samples (unwindowed).
  void analyze_frame(const double* frame, Complex* out) const;
  // Windowed time-domain contribution of one frame (frame_len samples).
  void synthesize_frame(const Complex* spectrum, double* out) const;

 private:
  StftConfig cfg_;
  std::vector<double> window_;
  RealFft fft_;
};

Spectrogram analyze(const Waveform& signal, const StftConfig& cfg);
Waveform synthesize(const Spectrogram& spec, const StftConfig& cfg);

}  // namespace derev
