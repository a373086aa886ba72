// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "derev/shadow_trace.hpp"
#include "derev/types.hpp"

namespace derev {

// Applies the frozen per-frame weights of a trace to one component:
// s_c(l,k) = w_b^H y_c(l,k) - w_pred^H t_c(l,k), then synthesizes.
RVector shadow_apply(const ShadowTrace& trace, const Waveform& component);

// Samples excluded from every metric: max(L frames, 0.5 s).
std::size_t warmup_samples(const ShadowTrace& trace);

// 10 log10(sum target^2 / sum interference^2) over samples [skip, end).
// Returns +infinity when the interference has zero power.
double sir_db(const RVector& target, const RVector& interference, std::size_t skip = 0);

// Mean over 30 ms / 50% segments; segments more than 40 dB below the loudest
// reference segment are excluded, each segment SNR is clamped to [-10, 35] dB.
double segmental_snr_db(const RVector& reference, const RVector& estimate, double sample_rate,
                        std::size_t skip = 0);

// Mean per-segment RMS difference of the log power spectra, same segmentation.
double log_spectral_distance_db(const RVector& reference, const RVector& estimate,
                                double sample_rate, std::size_t skip = 0);

struct BandSir {
  double low_hz = 0.0;
  double high_hz = 0.0;
  double sir_in = 0.0;
  double sir_out = 0.0;
};

struct MetricsReport {
  double sir_in = 0.0;
  double sir_out = 0.0;
  double delta_sir = 0.0;
  double segsnr = 0.0;
  double lsd = 0.0;
  std::vector<BandSir> bands;
  // Relative L2 gap between the summed component shadows and the shadow of y.
  double superposition_error = 0.0;
  // Relative L2 gap between the shadow of y and the supplied enhanced signal
  // (0 when none was supplied).
  double replay_error = 0.0;

  // Comma-separated, one header line and one value line.
  std::string to_csv() const;
};

struct SceneComponents {
  const Waveform* x_e = nullptr;
  const Waveform* x_r = nullptr;
  const Waveform* v = nullptr;
  const Waveform* y = nullptr;
};

// Shadow-filters every component through the trace and scores the result.
// `enhanced`, when given, is compared against the replay of y.
MetricsReport evaluate(const ShadowTrace& trace, const SceneComponents& scene,
                       const RVector* enhanced = nullptr);

inline constexpr double kSuperpositionTolerance = 1e-9;

}  // namespace derev
