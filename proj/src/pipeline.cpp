// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "derev/config.hpp"

namespace derev {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kFull: return "full";
    case Mode::kMvdrOnly: return "mvdr_only";
    case Mode::kMclpOnly: return "mclp_only";
    case Mode::kPassthrough: return "passthrough";
  }
  return "full";
}

Mode parse_mode(std::string_view text) {
  if (text == "full") return Mode::kFull;
  if (text == "mvdr_only") return Mode::kMvdrOnly;
  if (text == "mclp_only") return Mode::kMclpOnly;
  if (text == "passthrough") return Mode::kPassthrough;
  throw std::invalid_argument("unknown mode '" + std::string(text) +
                              "' (expected full, mvdr_only, mclp_only or passthrough)");
}

void PipelineConfig::validate() const {
  stft.validate();
  geometry.validate();
  const bool alpha_ok = allow_alpha_endpoints ? (alpha >= 0.0 && alpha <= 1.0)
                                              : (alpha > 0.0 && alpha < 1.0);
  if (!alpha_ok) throw std::invalid_argument("pipeline: alpha must lie in (0, 1)");
  if (!(lambda > 0.0 && lambda < 1.0))
    throw std::invalid_argument("pipeline: lambda must lie in (0, 1)");
  if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("pipeline: a must lie in (0, 1]");
  if (D < 1 || D >= L) throw std::invalid_argument("pipeline: need 1 <= D < L");
  if (!(diagonal_loading >= 0.0))
    throw std::invalid_argument("pipeline: diagonal_loading must be >= 0");
  if (!(initial_error_variance > 0.0))
    throw std::invalid_argument("pipeline: initial_error_variance must be > 0");
  if (!(sigma_w2 >= 0.0)) throw std::invalid_argument("pipeline: sigma_w2 must be >= 0");
  if (threads < 0) throw std::invalid_argument("pipeline: threads must be >= 0");
  if (diagnostics_decimation < 1)
    throw std::invalid_argument("pipeline: diagnostics_decimation must be >= 1");
}

double fused_target_psd(double alpha, double phi, const CVector& w_b_prev, const CVector& y) {
  return alpha * phi + (1.0 - alpha) * std::norm(w_b_prev.dot(y));
}

BinProcessor::BinProcessor(const BinSpatialModel& model, const PipelineConfig& cfg)
    : model_(&model),
      mode_(cfg.mode),
      alpha_(cfg.alpha),
      ref_(cfg.geometry.reference_index),
      e_ref_(CVector::Unit(cfg.geometry.size(), cfg.geometry.reference_index)),
      est_(BinEstimatorState::initial(cfg.geometry.size(), {cfg.lambda, 1e-10, 10})),
      bf_(BeamformerState::initial(model.d, cfg.diagonal_loading)),
      taps_(cfg.geometry.size(), cfg.D, cfg.L) {
  KalmanOptions ko;
  ko.transition = cfg.a;
  ko.process_noise = cfg.process_noise;
  ko.process_noise_variance = cfg.sigma_w2;
  ko.initial_error_variance = cfg.initial_error_variance;
  kf_ = BinKalmanState::initial(cfg.prediction_enabled() ? cfg.tap_dimension() : 0, ko);
}

BinProcessor::Output BinProcessor::process(const CVector& y, Complex* w_b_out,
                                           Complex* w_pred_out) {
  const int m = static_cast<int>(y.size());
  const int n = kf_.dimension();
  Output out;
  if (!y.allFinite()) {
    // Nothing sensible can be learned from this frame; keep every state as is.
    out.s = out.x_b = Complex(0.0, 0.0);
    out.diag.flags = kFlagNonFinite;
    taps_.push(CVector::Zero(m));
    if (w_b_out) std::fill(w_b_out, w_b_out + m, Complex(0.0, 0.0));
    if (w_pred_out) std::fill(w_pred_out, w_pred_out + n, Complex(0.0, 0.0));
    return out;
  }

  // Blocking-based PSD estimation.
  const auto singular_before = est_.singular_count;
  update_covariances(est_, block_signal(*model_, y), y);
  solve_psd(est_, *model_);
  const double phi = target_psd(est_, *model_);
  if (est_.warming_up()) out.diag.flags |= kFlagWarmUp;
  if (est_.singular_count != singular_before) out.diag.flags |= kFlagPsdSingular;

  // MVDR path.
  const auto fallback_before = bf_.fallback_count;
  bf_.update(*model_, est_.phi_r, est_.phi_v);
  if (bf_.fallback_count != fallback_before) out.diag.flags |= kFlagMvdrFallback;
  const bool use_bf = mode_ == Mode::kFull || mode_ == Mode::kMvdrOnly;
  const CVector& w_b = use_bf ? bf_.w_b : e_ref_;
  const CVector& w_b_prev = use_bf ? bf_.w_b_prev : e_ref_;
  out.x_b = mode_ == Mode::kPassthrough ? y[ref_] : beamform(w_b, y);

  const double phi_xc = fused_target_psd(alpha_, phi, w_b_prev, y);
  out.diag.phi_r = est_.phi_r;
  out.diag.phi_v = est_.phi_v;
  out.diag.phi_target = phi;
  out.diag.phi_xc = phi_xc;

  // Linear prediction path; the tap buffer still excludes y(l) here.
  bool pred_zero = true;
  if (n > 0) {
    taps_.stacked(t_);
    KalmanFrameResult kr = kalman_process_frame(kf_, t_, out.x_b, phi_xc);
    out.s = kr.s;
    out.diag.reverb_power = std::norm(kr.r);
    out.diag.gain_norm = kr.gain_norm;
    if (kr.skipped) out.diag.flags |= kFlagKalmanSkipped;
    if (w_pred_out && !kr.skipped) {
      std::copy(kr.w_used.data(), kr.w_used.data() + n, w_pred_out);
      pred_zero = false;
    }
  } else {
    out.s = out.x_b;
  }
  taps_.push(y);

  bool bf_zero = false;
  if (!std::isfinite(out.s.real()) || !std::isfinite(out.s.imag())) {
    out.diag.flags |= kFlagNonFinite;
    pred_zero = true;
    if (std::isfinite(out.x_b.real()) && std::isfinite(out.x_b.imag())) {
      out.s = out.x_b;
    } else {
      out.s = out.x_b = Complex(0.0, 0.0);
      bf_zero = true;
    }
  }
  if (w_b_out) {
    if (bf_zero)
      std::fill(w_b_out, w_b_out + m, Complex(0.0, 0.0));
    else
      std::copy(w_b.data(), w_b.data() + m, w_b_out);
  }
  if (w_pred_out && pred_zero) std::fill(w_pred_out, w_pred_out + n, Complex(0.0, 0.0));
  return out;
}

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  models_ = build_bin_models(cfg_.geometry, cfg_.doa, cfg_.stft);
  processors_.reserve(models_.size());
  for (const BinSpatialModel& model : models_) processors_.emplace_back(model, cfg_);
}

FrameResult Pipeline::process_frame(const Spectrogram& spec, int frame, ShadowTrace* trace) {
  if (spec.bins() != bins() || spec.channels() != channels())
    throw std::invalid_argument("pipeline: spectrogram shape does not match configuration");
  FrameResult r;
  r.s.resize(bins());
  r.x_b.resize(bins());
  r.diagnostics.resize(bins());
  CVector y(channels());
  for (int k = 0; k < bins(); ++k) {
    y = spec.vec(frame, k);
    Complex* wb = trace ? trace->beamformer(frame, k).data() : nullptr;
    Complex* wp = trace && trace->tap_dim > 0 ? trace->predictor(frame, k).data() : nullptr;
    BinProcessor::Output o = processors_[k].process(y, wb, wp);
    r.s[k] = o.s;
    r.x_b[k] = o.x_b;
    r.diagnostics[k] = o.diag;
  }
  return r;
}

FrameResult Pipeline::process_frame(const std::vector<CVector>& y) {
  if (static_cast<int>(y.size()) != bins())
    throw std::invalid_argument("pipeline: frame has wrong number of bins");
  FrameResult r;
  r.s.resize(bins());
  r.x_b.resize(bins());
  r.diagnostics.resize(bins());
  for (int k = 0; k < bins(); ++k) {
    if (y[k].size() != channels())
      throw std::invalid_argument("pipeline: frame has wrong number of channels");
    BinProcessor::Output o = processors_[k].process(y[k]);
    r.s[k] = o.s;
    r.x_b[k] = o.x_b;
    r.diagnostics[k] = o.diag;
  }
  return r;
}

PipelineCounters Pipeline::counters() const {
  PipelineCounters c;
  for (const BinProcessor& p : processors_) {
    c.psd_singular += p.estimator().singular_count;
    c.mvdr_fallback += p.beamformer().fallback_count;
    c.kalman_skipped += p.kalman().skipped_count;
  }
  return c;
}

void Diagnostics::write_csv(const std::string& path, int decimation) const {
  if (decimation < 1) throw std::invalid_argument("diagnostics: decimation must be >= 1");
  std::ofstream out(path);
  if (!out) throw IoError("diagnostics: cannot open '" + path + "'");
  out << "frame,bin,phi_r,phi_v,phi_target,phi_xc,reverb_power,gain_norm,flags\n";
  std::string line;
  for (int l = 0; l < frames; l += decimation) {
    for (int k = 0; k < bins; ++k) {
      const BinDiagnostics& d = at(l, k);
      line = std::to_string(l) + "," + std::to_string(k);
      for (double v : {d.phi_r, d.phi_v, d.phi_target, d.phi_xc, d.reverb_power, d.gain_norm})
        line += "," + format_double(v);
      line += "," + std::to_string(static_cast<unsigned>(d.flags)) + "\n";
      out << line;
    }
  }
  if (!out) throw IoError("diagnostics: write failed for '" + path + "'");
}

RunResult run_spectrogram(const PipelineConfig& cfg, const Spectrogram& spec,
                          const RunOptions& opts) {
  Pipeline pipe(cfg);
  if (spec.channels() != pipe.channels())
    throw std::invalid_argument("pipeline: input has " + std::to_string(spec.channels()) +
                                " channels, geometry has " + std::to_string(pipe.channels()));
  if (spec.bins() != pipe.bins())
    throw std::invalid_argument("pipeline: spectrogram bin count does not match configuration");

  const int frames = spec.frames();
  const int bins = pipe.bins();
  const int m = pipe.channels();
  RunResult result;
  result.enhanced_spectrum = Spectrogram(frames, bins, 1, spec.signal_length());
  result.diagnostics.frames = frames;
  result.diagnostics.bins = bins;
  result.diagnostics.values.resize(static_cast<std::size_t>(frames) * bins);
  ShadowTrace* trace = nullptr;
  if (opts.record_trace) {
    result.trace.emplace();
    trace = &*result.trace;
    trace->stft = cfg.stft;
    trace->channels = m;
    trace->reference = cfg.geometry.reference_index;
    trace->delay = cfg.D;
    trace->order = cfg.L;
    trace->tap_dim = cfg.prediction_enabled() ? cfg.tap_dimension() : 0;
    trace->frames = frames;
    trace->bins = bins;
    trace->signal_length = spec.signal_length();
    trace->allocate();
  }

  // Bins never exchange information, so each worker runs the full frame loop
  // over its own contiguous block of bins.
  auto work = [&](int k_begin, int k_end) {
    CVector y(m);
    for (int l = 0; l < frames; ++l) {
      for (int k = k_begin; k < k_end; ++k) {
        y = spec.vec(l, k);
        Complex* wb = trace ? trace->beamformer(l, k).data() : nullptr;
        Complex* wp = trace && trace->tap_dim > 0 ? trace->predictor(l, k).data() : nullptr;
        BinProcessor::Output o = pipe.bin(k).process(y, wb, wp);
        result.enhanced_spectrum.at(l, k, 0) = o.s;
        result.diagnostics.values[static_cast<std::size_t>(l) * bins + k] = o.diag;
      }
    }
  };

  int workers = cfg.threads == 0 ? static_cast<int>(std::thread::hardware_concurrency())
                                 : cfg.threads;
  workers = std::clamp(workers, 1, bins);
  if (workers == 1) {
    work(0, bins);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      const int begin = static_cast<int>(static_cast<long>(bins) * w / workers);
      const int end = static_cast<int>(static_cast<long>(bins) * (w + 1) / workers);
      pool.emplace_back(work, begin, end);
    }
    for (std::thread& t : pool) t.join();
  }

  result.diagnostics.counters = pipe.counters();
  for (const BinDiagnostics& d : result.diagnostics.values)
    if (d.flags & kFlagNonFinite) ++result.diagnostics.counters.non_finite;
  result.enhanced = Stft(cfg.stft).synthesize(result.enhanced_spectrum);
  return result;
}

RunResult run(const PipelineConfig& cfg, const Waveform& input, const RunOptions& opts) {
  cfg.validate();
  if (input.cols() != cfg.geometry.size())
    throw std::invalid_argument("pipeline: input has " + std::to_string(input.cols()) +
                                " channels, geometry has " +
                                std::to_string(cfg.geometry.size()));
  return run_spectrogram(cfg, Stft(cfg.stft).analyze(input), opts);
}

}  // namespace derev
