// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "derev/array_model.hpp"
#include "derev/mclp_kalman.hpp"
#include "derev/mvdr.hpp"
#include "derev/psd_estimator.hpp"
#include "derev/shadow_trace.hpp"
#include "derev/stft.hpp"

namespace derev {

enum class Mode { kFull, kMvdrOnly, kMclpOnly, kPassthrough };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct PipelineConfig {
  StftConfig stft;
  ArrayGeometry geometry = ArrayGeometry::uniform_linear(8, 0.04);
  Direction doa;
  int D = 2;
  int L = 10;
  double alpha = 0.7;
  double lambda = 0.95;
  double a = 0.999;
  double diagonal_loading = kDefaultDiagonalLoading;
  Mode mode = Mode::kFull;
  ProcessNoiseModel process_noise = ProcessNoiseModel::kStationary;
  double sigma_w2 = 0.0;
  double initial_error_variance = 1e-2;
  // Permits alpha == 0 or alpha == 1 (endpoint checks of the fused target PSD).
  bool allow_alpha_endpoints = false;
  int threads = 1;
  int diagnostics_decimation = 1;

  bool prediction_enabled() const { return mode == Mode::kFull || mode == Mode::kMclpOnly; }
  bool beamformer_enabled() const { return mode == Mode::kFull || mode == Mode::kMvdrOnly; }
  int tap_dimension() const { return geometry.size() * (L - D); }
  void validate() const;
};

enum BinFlag : std::uint8_t {
  kFlagWarmUp = 1,
  kFlagPsdSingular = 2,
  kFlagMvdrFallback = 4,
  kFlagKalmanSkipped = 8,
  kFlagNonFinite = 16,
};

struct BinDiagnostics {
  double phi_r = 0.0;
  double phi_v = 0.0;
  double phi_target = 0.0;
  double phi_xc = 0.0;
  double reverb_power = 0.0;  // |r|^2
  double gain_norm = 0.0;
  std::uint8_t flags = 0;
};

// phi_xc = alpha phi + (1 - alpha) |w_b_prev^H y|^2
double fused_target_psd(double alpha, double phi, const CVector& w_b_prev, const CVector& y);

// All per-bin state of the three processing paths.
class BinProcessor {
 public:
  BinProcessor(const BinSpatialModel& model, const PipelineConfig& cfg);

  struct Output {
    Complex s;
    Complex x_b;
    BinDiagnostics diag;
  };

  // Processes y(l). When non-null, w_b_out receives the M beamformer weights and
  // w_pred_out the N predictor weights that produced s.
  Output process(const CVector& y, Complex* w_b_out = nullptr, Complex* w_pred_out = nullptr);

  const BinEstimatorState& estimator() const { return est_; }
  const BeamformerState& beamformer() const { return bf_; }
  const BinKalmanState& kalman() const { return kf_; }
  const TapBuffer& taps() const { return taps_; }

 private:
  const BinSpatialModel* model_;
  Mode mode_;
  double alpha_;
  int ref_;
  CVector e_ref_;
  BinEstimatorState est_;
  BeamformerState bf_;
  BinKalmanState kf_;
  TapBuffer taps_;
  CVector t_;
};

struct FrameResult {
  std::vector<Complex> s;    // enhanced coefficient per bin
  std::vector<Complex> x_b;  // beamformer output per bin
  std::vector<BinDiagnostics> diagnostics;
};

struct PipelineCounters {
  std::int64_t psd_singular = 0;
  std::int64_t mvdr_fallback = 0;
  std::int64_t kalman_skipped = 0;
  std::int64_t non_finite = 0;
};

// Frame-online engine: one BinProcessor per frequency bin.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);

  const PipelineConfig& config() const { return cfg_; }
  const std::vector<BinSpatialModel>& models() const { return models_; }
  const BinProcessor& bin(int k) const { return processors_[k]; }
  BinProcessor& bin(int k) { return processors_[k]; }
  int bins() const { return static_cast<int>(processors_.size()); }
  int channels() const { return cfg_.geometry.size(); }

  // Processes frame `frame` of a multichannel spectrogram. When `trace` is
  // given the applied weights are recorded at index `frame`.
  FrameResult process_frame(const Spectrogram& spec, int frame, ShadowTrace* trace = nullptr);
  // Processes one frame given as bins x channels vectors.
  FrameResult process_frame(const std::vector<CVector>& y);

  PipelineCounters counters() const;

 private:
  PipelineConfig cfg_;
  std::vector<BinSpatialModel> models_;
  std::vector<BinProcessor> processors_;
};

struct Diagnostics {
  int frames = 0;
  int bins = 0;
  std::vector<BinDiagnostics> values;  // frames * bins
  PipelineCounters counters;

  const BinDiagnostics& at(int frame, int bin) const {
    return values[static_cast<std::size_t>(frame) * bins + bin];
  }
  // Comma-separated, one row per (frame, bin) for frames divisible by decimation.
  void write_csv(const std::string& path, int decimation = 1) const;
};

struct RunResult {
  Waveform enhanced;  // samples x 1
  Spectrogram enhanced_spectrum;
  Diagnostics diagnostics;
  std::optional<ShadowTrace> trace;
};

struct RunOptions {
  bool record_trace = false;
};

// analyze -> frame loop -> synthesize. Bins are distributed over cfg.threads
// workers; each worker owns whole bins, so results do not depend on the
// worker count.
RunResult run(const PipelineConfig& cfg, const Waveform& input, const RunOptions& opts = {});

// Pipeline core on an already computed spectrogram.
RunResult run_spectrogram(const PipelineConfig& cfg, const Spectrogram& spec,
                          const RunOptions& opts = {});

}  // namespace derev
