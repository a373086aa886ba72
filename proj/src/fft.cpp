// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/fft.hpp"

#include <algorithm>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace derev {

namespace {
// The FFTW planner is not re-entrant; execution on new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n == 0) throw std::invalid_argument("RealFft: length must be positive");
  std::vector<double> re(n);
  std::vector<Complex> cx(n / 2 + 1);
  auto* fc = reinterpret_cast<fftw_complex*>(cx.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard<std::mutex> lock(planner_mutex());
  r2c_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), re.data(), fc, flags);
  c2r_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), fc, re.data(), flags);
  if (!r2c_ || !c2r_) throw std::runtime_error("RealFft: FFTW planning failed");
}

RealFft::~RealFft() { release(); }

RealFft::RealFft(RealFft&& other) noexcept
    : n_(other.n_), r2c_(other.r2c_), c2r_(other.c2r_) {
  other.r2c_ = other.c2r_ = nullptr;
}

RealFft& RealFft::operator=(RealFft&& other) noexcept {
  if (this != &other) {
    release();
    n_ = other.n_;
    r2c_ = other.r2c_;
    c2r_ = other.c2r_;
    other.r2c_ = other.c2r_ = nullptr;
  }
  return *this;
}

void RealFft::release() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (r2c_) fftw_destroy_plan(static_cast<fftw_plan>(r2c_));
  if (c2r_) fftw_destroy_plan(static_cast<fftw_plan>(c2r_));
  r2c_ = c2r_ = nullptr;
}

void RealFft::forward(std::span<const double> in, std::span<Complex> out) const {
  if (in.size() != n_ || out.size() != bins())
    throw std::invalid_argument("RealFft::forward: size mismatch");
  // FFTW does not write to the input of an out-of-place r2c transform.
  fftw_execute_dft_r2c(static_cast<fftw_plan>(r2c_), const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const Complex> in, std::span<double> out) const {
  if (in.size() != bins() || out.size() != n_)
    throw std::invalid_argument("RealFft::inverse: size mismatch");
  // c2r destroys its input.
  std::vector<Complex> scratch(in.begin(), in.end());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(c2r_),
                       reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
  const double scale = 1.0 / static_cast<double>(n_);
  for (double& v : out) v *= scale;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  const std::size_t n = next_pow2(out_len);
  RealFft fft(n);
  std::vector<double> pa(n, 0.0), pb(n, 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  std::vector<Complex> fa(fft.bins()), fb(fft.bins());
  fft.forward(pa, fa);
  fft.forward(pb, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> out(n);
  fft.inverse(fa, out);
  out.resize(out_len);
  return out;
}

}  // namespace derev
