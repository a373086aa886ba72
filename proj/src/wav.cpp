// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/wav.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <vector>

namespace derev {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void write_le(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Audio read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("wav: cannot open '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError("wav: '" + path + "' is not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const auto size = static_cast<std::size_t>(read_le<std::uint32_t>(chunk + 4));
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw IoError("wav: short fmt chunk in '" + path + "'");
      format = read_le<std::uint16_t>(chunk + 8);
      channels = read_le<std::uint16_t>(chunk + 10);
      rate = read_le<std::uint32_t>(chunk + 12);
      bits = read_le<std::uint16_t>(chunk + 22);
      if (format == kFormatExtensible) {
        if (avail < 26) throw IoError("wav: short extensible fmt chunk");
        format = read_le<std::uint16_t>(chunk + 8 + 24);  // first two bytes of the GUID
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }
  if (!data || channels == 0 || rate == 0)
    throw IoError("wav: missing fmt or data chunk in '" + path + "'");

  Audio audio;
  audio.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    const std::size_t frames = data_size / (2u * channels);
    audio.samples.resize(static_cast<Eigen::Index>(frames), channels);
    for (std::size_t i = 0; i < frames; ++i)
      for (std::uint16_t c = 0; c < channels; ++c)
        audio.samples(i, c) = read_le<std::int16_t>(data + 2 * (i * channels + c)) / 32768.0;
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t frames = data_size / (4u * channels);
    audio.samples.resize(static_cast<Eigen::Index>(frames), channels);
    for (std::size_t i = 0; i < frames; ++i)
      for (std::uint16_t c = 0; c < channels; ++c)
        audio.samples(i, c) = read_le<float>(data + 4 * (i * channels + c));
  } else {
    throw IoError("wav: '" + path +
                             "' must be 16-bit PCM or 32-bit float (format " +
                             std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  }
  return audio;
}

void write_wav(const std::string& path, const Audio& audio) {
  const auto channels = static_cast<std::uint16_t>(audio.samples.cols());
  const auto frames = static_cast<std::uint32_t>(audio.samples.rows());
  if (channels == 0) throw std::invalid_argument("wav: nothing to write");
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  const std::uint32_t data_bytes = frames * channels * 4u;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("wav: cannot open '" + path + "' for writing");
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 4 + (8 + 16) + (8 + 4) + (8 + data_bytes));
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, kFormatFloat);
  write_le<std::uint16_t>(out, channels);
  write_le<std::uint32_t>(out, rate);
  write_le<std::uint32_t>(out, rate * channels * 4u);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 4u));
  write_le<std::uint16_t>(out, 32);
  out.write("fact", 4);
  write_le<std::uint32_t>(out, 4);
  write_le<std::uint32_t>(out, frames);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  std::vector<float> row(channels);
  for (std::uint32_t i = 0; i < frames; ++i) {
    for (std::uint16_t c = 0; c < channels; ++c) row[c] = static_cast<float>(audio.samples(i, c));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("wav: write failed for '" + path + "'");
}

}  // namespace derev
