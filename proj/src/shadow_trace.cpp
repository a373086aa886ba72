// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/shadow_trace.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace derev {

namespace {

constexpr std::array<char, 8> kMagic{'D', 'R', 'V', 'T', 'R', 'A', 'C', 'E'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "trace files are written in native little-endian order");

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("trace: truncated file");
  return v;
}

}  // namespace

void ShadowTrace::allocate() {
  w_b.assign(static_cast<std::size_t>(frames) * bins * channels, Complex(0.0, 0.0));
  w_pred.assign(static_cast<std::size_t>(frames) * bins * tap_dim, Complex(0.0, 0.0));
}

void ShadowTrace::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("trace: cannot open '" + path + "' for writing");
  out.write(kMagic.data(), kMagic.size());
  put(out, kVersion);
  put<std::int32_t>(out, stft.frame_len);
  put<std::int32_t>(out, stft.hop);
  put<std::int32_t>(out, stft.fft_len);
  put<double>(out, stft.sample_rate);
  put<std::int32_t>(out, channels);
  put<std::int32_t>(out, reference);
  put<std::int32_t>(out, delay);
  put<std::int32_t>(out, order);
  put<std::int32_t>(out, tap_dim);
  put<std::int32_t>(out, frames);
  put<std::int32_t>(out, bins);
  put<std::uint64_t>(out, signal_length);
  out.write(reinterpret_cast<const char*>(w_b.data()),
            static_cast<std::streamsize>(w_b.size() * sizeof(Complex)));
  out.write(reinterpret_cast<const char*>(w_pred.data()),
            static_cast<std::streamsize>(w_pred.size() * sizeof(Complex)));
  if (!out) throw IoError("trace: write failed for '" + path + "'");
}

ShadowTrace ShadowTrace::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("trace: cannot open '" + path + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("trace: '" + path + "' is not a trace file");
  if (get<std::uint32_t>(in) != kVersion) throw IoError("trace: unsupported version");
  ShadowTrace t;
  t.stft.frame_len = get<std::int32_t>(in);
  t.stft.hop = get<std::int32_t>(in);
  t.stft.fft_len = get<std::int32_t>(in);
  t.stft.sample_rate = get<double>(in);
  t.channels = get<std::int32_t>(in);
  t.reference = get<std::int32_t>(in);
  t.delay = get<std::int32_t>(in);
  t.order = get<std::int32_t>(in);
  t.tap_dim = get<std::int32_t>(in);
  t.frames = get<std::int32_t>(in);
  t.bins = get<std::int32_t>(in);
  t.signal_length = get<std::uint64_t>(in);
  t.stft.validate();
  if (t.channels < 1 || t.reference < 0 || t.reference >= t.channels || t.frames < 0 || t.bins != t.stft.bins() || t.tap_dim < 0 ||
      (t.tap_dim != 0 && t.tap_dim != t.channels * (t.order - t.delay)))
    throw IoError("trace: inconsistent header in '" + path + "'");
  t.allocate();
  in.read(reinterpret_cast<char*>(t.w_b.data()),
          static_cast<std::streamsize>(t.w_b.size() * sizeof(Complex)));
  in.read(reinterpret_cast<char*>(t.w_pred.data()),
          static_cast<std::streamsize>(t.w_pred.size() * sizeof(Complex)));
  if (!in) throw IoError("trace: truncated file '" + path + "'");
  return t;
}

}  // namespace derev
