// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "derev/stft.hpp"
#include "derev/types.hpp"

namespace derev {

// Per-frame, per-bin linear weights the pipeline actually applied:
//   s(l,k) = w_b^H y(l,k) - w_pred^H t(l,k)
// Replaying them on any signal with the same geometry reproduces the
// pipeline's linear map for that signal.
struct ShadowTrace {
  StftConfig stft;
  int channels = 0;
  int reference = 0;
  int delay = 2;
  int order = 10;
  int tap_dim = 0;  // 0 when the prediction path was disabled
  int frames = 0;
  int bins = 0;
  std::uint64_t signal_length = 0;
  std::vector<Complex> w_b;     // frames * bins * channels
  std::vector<Complex> w_pred;  // frames * bins * tap_dim

  void allocate();
  std::span<Complex> beamformer(int frame, int bin) {
    return {w_b.data() + offset(frame, bin, channels), static_cast<std::size_t>(channels)};
  }
  std::span<const Complex> beamformer(int frame, int bin) const {
    return {w_b.data() + offset(frame, bin, channels), static_cast<std::size_t>(channels)};
  }
  std::span<Complex> predictor(int frame, int bin) {
    return {w_pred.data() + offset(frame, bin, tap_dim), static_cast<std::size_t>(tap_dim)};
  }
  std::span<const Complex> predictor(int frame, int bin) const {
    return {w_pred.data() + offset(frame, bin, tap_dim), static_cast<std::size_t>(tap_dim)};
  }

  // Little-endian binary container, doubles stored bit-exactly.
  void save(const std::string& path) const;
  static ShadowTrace load(const std::string& path);

 private:
  std::size_t offset(int frame, int bin, int width) const {
    return (static_cast<std::size_t>(frame) * bins + bin) * static_cast<std::size_t>(width);
  }
};

}  // namespace derev
