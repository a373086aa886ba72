// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "derev/types.hpp"

namespace derev {

struct Audio {
  Waveform samples;  // frames x channels, nominal range [-1, 1]
  double sample_rate = 16000.0;
};

// Accepts 16-bit PCM and 32-bit IEEE float, plain or WAVE_FORMAT_EXTENSIBLE.
Audio read_wav(const std::string& path);
// Interleaved 32-bit IEEE float.
void write_wav(const std::string& path, const Audio& audio);

}  // namespace derev
