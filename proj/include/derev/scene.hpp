// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "derev/array_model.hpp"
#include "derev/types.hpp"

namespace derev {

struct SceneSpec {
  double t60 = 0.5;        // seconds, (0, 2]
  double snr_db = 10.0;    // +infinity disables the noise component
  Direction doa;
  double duration = 10.0;  // seconds, used when no source is supplied
  std::uint64_t seed = 1;
  int early_taps = 3;
  double early_window_ms = 40.0;  // late tail onset after the direct path
  double sample_rate = 16000.0;
  // Diffuse-field energy model: reverberant/direct energy = (r / r_c)^2 with
  // critical distance r_c = 0.057 sqrt(V / T60).
  double room_volume = 60.0;     // m^3
  double source_distance = 2.0;  // m
  ArrayGeometry geometry = ArrayGeometry::uniform_linear(8, 0.04);

  void validate() const;
  // Total reverberant energy relative to the unit-energy direct path.
  double reverberant_energy_ratio() const;
};

// Ground-truth components, y == x_e + x_r + v exactly. Every sample is a
// multiple of 2^-24 with magnitude below 1, so all components are exactly
// representable as 32-bit floats and the sum identity survives a WAV round trip.
struct Scene {
  Waveform x_e;   // direct path + early reflections
  Waveform x_r;   // late reverberation
  Waveform v;     // noise
  Waveform y;     // observation
  RVector source; // clean mono source
  double sample_rate = 16000.0;
};

// Band-limited, syllable-modulated Gaussian noise with a speech-like long-term
// spectrum. RMS is 0.1.
RVector speech_shaped_source(double duration, double sample_rate, std::uint64_t seed);

// Delays x by `delay` samples (any real value) with a 64-tap Blackman-windowed sinc.
RVector fractional_delay(const RVector& x, double delay);

// Direct path: each channel is the source delayed by the plane-wave delay of
// that mic relative to the reference (reference delay 0).
Waveform synth_direct(const RVector& source, const ArrayGeometry& geom, const Direction& doa,
                      double sample_rate);

// Adds spec.early_taps delayed, attenuated copies of the direct-path signal
// within spec.early_window_ms.
Waveform add_early_reflections(const Waveform& direct, const SceneSpec& spec);

// Late-tail impulse responses, one column per mic. Zero before the onset at
// early_window_ms; afterwards spatially diffuse (sinc-coherent) Gaussian noise
// under an exp(-3 ln(10) t / T60) envelope, with per-channel energy set by the
// diffuse-field model.
Waveform late_tail_rirs(const SceneSpec& spec);

Waveform synth_late(const RVector& source, const SceneSpec& spec);

// Scales noise to the requested SNR at the reference mic, quantizes every
// component and sums. `noise`, when given, must have the scene's channel count;
// it is tiled or truncated to length. Otherwise spatially white Gaussian noise
// is drawn from `seed`.
Scene mix(const Waveform& x_e, const Waveform& x_r, const RVector& source, double snr_db,
          std::uint64_t seed, int reference_index, double sample_rate,
          const Waveform* noise = nullptr);

// Full scene. A supplied source replaces the speech-shaped generator.
Scene simulate(const SceneSpec& spec, const RVector* source = nullptr,
               const Waveform* noise = nullptr);

inline constexpr double kQuantum = 1.0 / 16777216.0;  // 2^-24

}  // namespace derev
