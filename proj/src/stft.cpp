// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace derev {

void StftConfig::validate() const {
  if (frame_len <= 0 || hop <= 0)
    throw std::invalid_argument("stft: frame_len and hop must be positive");
  if (hop * 2 != frame_len)
    throw std::invalid_argument("stft: hop must be half of frame_len (50% overlap)");
  if (fft_len < frame_len)
    throw std::invalid_argument("stft: fft_len must be >= frame_len");
  if (fft_len % 2 != 0) throw std::invalid_argument("stft: fft_len must be even");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("stft: sample_rate must be > 0");
}

Spectrogram::Spectrogram(int frames, int bins, int channels, std::size_t signal_length)
    : frames_(frames),
      bins_(bins),
      channels_(channels),
      signal_length_(signal_length),
      data_(static_cast<std::size_t>(frames) * bins * channels, Complex(0.0, 0.0)) {}

std::vector<double> sqrt_hann_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n)
    w[n] = std::sqrt(0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / length)));
  return w;
}

int stft_frame_count(std::size_t signal_length, const StftConfig& cfg) {
  const std::size_t padded = signal_length + static_cast<std::size_t>(cfg.frame_len - cfg.hop);
  return static_cast<int>((padded + cfg.hop - 1) / cfg.hop);
}

Stft::Stft(const StftConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      window_(sqrt_hann_window(cfg.frame_len)),
      fft_(static_cast<std::size_t>(cfg.fft_len)) {}

void Stft::analyze_frame(const double* frame, Complex* out) const {
  std::vector<double> buf(static_cast<std::size_t>(cfg_.fft_len), 0.0);
  for (int n = 0; n < cfg_.frame_len; ++n) buf[n] = frame[n] * window_[n];
  fft_.forward(buf, std::span<Complex>(out, static_cast<std::size_t>(cfg_.bins())));
}

void Stft::synthesize_frame(const Complex* spectrum, double* out) const {
  std::vector<Complex> spec(spectrum, spectrum + cfg_.bins());
  // Bins 0 and N/2 are real for a real signal.
  spec.front().imag(0.0);
  spec.back().imag(0.0);
  std::vector<double> buf(static_cast<std::size_t>(cfg_.fft_len));
  fft_.inverse(spec, buf);
  for (int n = 0; n < cfg_.frame_len; ++n) out[n] = buf[n] * window_[n];
}

Spectrogram Stft::analyze(const Waveform& signal) const {
  if (signal.rows() == 0 || signal.cols() == 0)
    throw std::invalid_argument("stft analyze: empty signal");
  const std::size_t length = static_cast<std::size_t>(signal.rows());
  const int channels = static_cast<int>(signal.cols());
  const int frames = stft_frame_count(length, cfg_);
  const int pad = cfg_.frame_len - cfg_.hop;
  Spectrogram spec(frames, cfg_.bins(), channels, length);

  std::vector<double> frame(static_cast<std::size_t>(cfg_.frame_len));
  std::vector<Complex> bins(static_cast<std::size_t>(cfg_.bins()));
  for (int m = 0; m < channels; ++m) {
    for (int l = 0; l < frames; ++l) {
      const long start = static_cast<long>(l) * cfg_.hop - pad;
      for (int n = 0; n < cfg_.frame_len; ++n) {
        const long i = start + n;
        frame[n] = (i >= 0 && i < static_cast<long>(length)) ? signal(i, m) : 0.0;
      }
      analyze_frame(frame.data(), bins.data());
      for (int k = 0; k < cfg_.bins(); ++k) spec.at(l, k, m) = bins[k];
    }
  }
  return spec;
}

Waveform Stft::synthesize(const Spectrogram& spec) const {
  if (spec.bins() != cfg_.bins())
    throw std::invalid_argument("stft synthesize: spectrogram has " +
                                std::to_string(spec.bins()) + " bins, config expects " +
                                std::to_string(cfg_.bins()));
  if (spec.frames() != stft_frame_count(spec.signal_length(), cfg_))
    throw std::invalid_argument("stft synthesize: frame count does not match config");
  const std::size_t length = spec.signal_length();
  const int pad = cfg_.frame_len - cfg_.hop;
  Waveform out = Waveform::Zero(static_cast<Eigen::Index>(length), spec.channels());

  std::vector<Complex> bins(static_cast<std::size_t>(cfg_.bins()));
  std::vector<double> frame(static_cast<std::size_t>(cfg_.frame_len));
  for (int m = 0; m < spec.channels(); ++m) {
    for (int l = 0; l < spec.frames(); ++l) {
      for (int k = 0; k < cfg_.bins(); ++k) bins[k] = spec.at(l, k, m);
      synthesize_frame(bins.data(), frame.data());
      const long start = static_cast<long>(l) * cfg_.hop - pad;
      for (int n = 0; n < cfg_.frame_len; ++n) {
        const long i = start + n;
        if (i >= 0 && i < static_cast<long>(length)) out(i, m) += frame[n];
      }
    }
  }
  return out;
}

Spectrogram analyze(const Waveform& signal, const StftConfig& cfg) {
  return Stft(cfg).analyze(signal);
}

Waveform synthesize(const Spectrogram& spec, const StftConfig& cfg) {
  return Stft(cfg).synthesize(spec);
}

}  // namespace derev
