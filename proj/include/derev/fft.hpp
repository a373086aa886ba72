// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "derev/types.hpp"

namespace derev {

// Real-input FFT of fixed length backed by FFTW. Plans are created with
// FFTW_ESTIMATE so the chosen algorithm, and therefore every output bit, is
// the same from run to run. forward()/inverse() may be called concurrently.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&& other) noexcept;
  RealFft& operator=(RealFft&& other) noexcept;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // in: n samples, out: n/2+1 bins. Unnormalized.
  void forward(std::span<const double> in, std::span<Complex> out) const;
  // in: n/2+1 bins, out: n samples. Scaled by 1/n so inverse(forward(x)) == x.
  void inverse(std::span<const Complex> in, std::span<double> out) const;

 private:
  void release();

  std::size_t n_ = 0;
  void* r2c_ = nullptr;
  void* c2r_ = nullptr;
};

// Linear convolution of two real sequences, output length a.size()+b.size()-1.
std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b);

std::size_t next_pow2(std::size_t n);

}  // namespace derev
