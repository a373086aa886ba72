// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "derev/config.hpp"
#include "derev/fft.hpp"
#include "derev/mclp_kalman.hpp"
#include "derev/stft.hpp"

namespace derev {

namespace {

double relative_l2(const RVector& a, const RVector& b) {
  const double denom = b.norm();
  const double diff = (a - b).norm();
  if (denom == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / denom;
}

Spectrogram shadow_spectrum(const ShadowTrace& trace, const Waveform& component) {
  if (component.cols() != trace.channels)
    throw std::invalid_argument("shadow_apply: component has " +
                                std::to_string(component.cols()) + " channels, trace has " +
                                std::to_string(trace.channels));
  if (static_cast<std::uint64_t>(component.rows()) != trace.signal_length)
    throw std::invalid_argument("shadow_apply: component length does not match the trace");
  const Spectrogram spec = Stft(trace.stft).analyze(component);
  if (spec.frames() != trace.frames || spec.bins() != trace.bins)
    throw std::invalid_argument("shadow_apply: trace shape does not match the component");

  const int m = trace.channels;
  const int n = trace.tap_dim;
  Spectrogram out(spec.frames(), spec.bins(), 1, spec.signal_length());
  CVector y(m), t;
  for (int k = 0; k < spec.bins(); ++k) {
    TapBuffer taps(m, trace.delay, trace.order);
    for (int l = 0; l < spec.frames(); ++l) {
      y = spec.vec(l, k);
      const std::span<const Complex> wb = trace.beamformer(l, k);
      Complex s = Eigen::Map<const CVector>(wb.data(), m).dot(y);
      if (n > 0) {
        taps.stacked(t);
        const std::span<const Complex> wp = trace.predictor(l, k);
        s -= Eigen::Map<const CVector>(wp.data(), n).dot(t);
        taps.push(y);
      }
      out.at(l, k, 0) = s;
    }
  }
  return out;
}

double band_energy(const Spectrogram& spec, int first_frame, int k_lo, int k_hi) {
  double e = 0.0;
  for (int l = first_frame; l < spec.frames(); ++l)
    for (int k = k_lo; k < k_hi; ++k) e += std::norm(spec.at(l, k, 0));
  return e;
}

double ratio_db(double num, double den) {
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(num / den);
}

struct Segmentation {
  std::size_t length = 0;
  std::size_t hop = 0;
  std::vector<std::size_t> starts;  // segments kept for scoring
};

Segmentation segment(const RVector& reference, double sample_rate, std::size_t skip) {
  Segmentation seg;
  seg.length = static_cast<std::size_t>(std::lround(0.03 * sample_rate));
  seg.hop = seg.length / 2;
  const auto n = static_cast<std::size_t>(reference.size());
  std::vector<std::pair<std::size_t, double>> energies;
  for (std::size_t start = skip; start + seg.length <= n; start += seg.hop)
    energies.emplace_back(start,
                          reference.segment(static_cast<Eigen::Index>(start),
                                            static_cast<Eigen::Index>(seg.length))
                              .squaredNorm());
  double top = 0.0;
  for (const auto& [s, e] : energies) top = std::max(top, e);
  if (!(top > 0.0)) throw std::invalid_argument("metrics: reference is silent");
  for (const auto& [s, e] : energies)
    if (e >= top * 1e-4) seg.starts.push_back(s);
  return seg;
}

}  // namespace

RVector shadow_apply(const ShadowTrace& trace, const Waveform& component) {
  const Waveform out = Stft(trace.stft).synthesize(shadow_spectrum(trace, component));
  return out.col(0);
}

std::size_t warmup_samples(const ShadowTrace& trace) {
  const auto frames = static_cast<std::size_t>(trace.order) * trace.stft.hop;
  const auto half_second = static_cast<std::size_t>(std::lround(0.5 * trace.stft.sample_rate));
  return std::max(frames, half_second);
}

double sir_db(const RVector& target, const RVector& interference, std::size_t skip) {
  if (target.size() != interference.size())
    throw std::invalid_argument("sir: signals differ in length");
  const auto n = static_cast<std::size_t>(target.size());
  if (skip >= n) throw std::invalid_argument("sir: warm-up covers the whole signal");
  const auto len = static_cast<Eigen::Index>(n - skip);
  const auto s = static_cast<Eigen::Index>(skip);
  return ratio_db(target.segment(s, len).squaredNorm(), interference.segment(s, len).squaredNorm());
}

double segmental_snr_db(const RVector& reference, const RVector& estimate, double sample_rate,
                        std::size_t skip) {
  if (reference.size() != estimate.size())
    throw std::invalid_argument("segsnr: signals differ in length");
  const Segmentation seg = segment(reference, sample_rate, skip);
  double total = 0.0;
  for (std::size_t start : seg.starts) {
    const auto s = static_cast<Eigen::Index>(start);
    const auto len = static_cast<Eigen::Index>(seg.length);
    const double sig = reference.segment(s, len).squaredNorm();
    const double err = (reference.segment(s, len) - estimate.segment(s, len)).squaredNorm();
    const double snr = err == 0.0 ? 35.0 : 10.0 * std::log10(sig / err);
    total += std::clamp(snr, -10.0, 35.0);
  }
  return total / static_cast<double>(seg.starts.size());
}

double log_spectral_distance_db(const RVector& reference, const RVector& estimate,
                                double sample_rate, std::size_t skip) {
  if (reference.size() != estimate.size())
    throw std::invalid_argument("lsd: signals differ in length");
  const Segmentation seg = segment(reference, sample_rate, skip);
  const std::size_t nfft = next_pow2(seg.length);
  RealFft fft(nfft);
  std::vector<double> window(seg.length);
  for (std::size_t i = 0; i < seg.length; ++i)
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / seg.length));

  std::vector<std::vector<double>> p_ref, p_est;
  std::vector<double> buf(nfft);
  std::vector<Complex> spec(fft.bins());
  double top = 0.0;
  const auto power = [&](const RVector& x, std::size_t start) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t i = 0; i < seg.length; ++i)
      buf[i] = x[static_cast<Eigen::Index>(start + i)] * window[i];
    fft.forward(buf, spec);
    std::vector<double> p(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) p[k] = std::norm(spec[k]);
    return p;
  };
  for (std::size_t start : seg.starts) {
    p_ref.push_back(power(reference, start));
    p_est.push_back(power(estimate, start));
    top = std::max(top, *std::max_element(p_ref.back().begin(), p_ref.back().end()));
  }
  const double eps = std::max(top * 1e-12, std::numeric_limits<double>::min());
  double total = 0.0;
  for (std::size_t i = 0; i < p_ref.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < p_ref[i].size(); ++k) {
      const double d = 10.0 * std::log10((p_ref[i][k] + eps) / (p_est[i][k] + eps));
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(p_ref[i].size()));
  }
  return total / static_cast<double>(p_ref.size());
}

MetricsReport evaluate(const ShadowTrace& trace, const SceneComponents& scene,
                       const RVector* enhanced) {
  if (!scene.x_e || !scene.x_r || !scene.v || !scene.y)
    throw std::invalid_argument("evaluate: all scene components are required");
  const Stft stft(trace.stft);
  const Spectrogram s_e = shadow_spectrum(trace, *scene.x_e);
  const Spectrogram s_r = shadow_spectrum(trace, *scene.x_r);
  const Spectrogram s_v = shadow_spectrum(trace, *scene.v);
  const RVector out_e = stft.synthesize(s_e).col(0);
  const RVector out_r = stft.synthesize(s_r).col(0);
  const RVector out_v = stft.synthesize(s_v).col(0);
  const RVector out_y = shadow_apply(trace, *scene.y);

  const int ref = trace.reference;
  const RVector in_e = scene.x_e->col(ref);
  const RVector in_i = scene.x_r->col(ref) + scene.v->col(ref);
  const std::size_t skip = warmup_samples(trace);

  MetricsReport r;
  r.sir_in = sir_db(in_e, in_i, skip);
  r.sir_out = sir_db(out_e, RVector(out_r + out_v), skip);
  r.delta_sir = r.sir_out - r.sir_in;
  const RVector& est = enhanced ? *enhanced : out_y;
  r.segsnr = segmental_snr_db(in_e, est, trace.stft.sample_rate, skip);
  r.lsd = log_spectral_distance_db(in_e, est, trace.stft.sample_rate, skip);
  r.superposition_error = relative_l2(RVector(out_e + out_r + out_v), out_y);
  r.replay_error = enhanced ? relative_l2(out_y, *enhanced) : 0.0;

  // Per-band SIR on the STFT grid, frames that start after the warm-up.
  const Spectrogram in_spec_e = stft.analyze(Waveform(in_e));
  const Spectrogram in_spec_i = stft.analyze(Waveform(in_i));
  Spectrogram out_spec_i = s_r;
  for (std::size_t i = 0; i < out_spec_i.data().size(); ++i) out_spec_i.data()[i] += s_v.data()[i];
  const int first = static_cast<int>((skip + trace.stft.frame_len - trace.stft.hop) /
                                     static_cast<std::size_t>(trace.stft.hop)) + 1;
  const double nyquist = trace.stft.sample_rate / 2.0;
  const double edges[] = {0.0, 500.0, 1000.0, 2000.0, 4000.0, nyquist};
  for (std::size_t b = 0; b + 1 < std::size(edges); ++b) {
    if (edges[b] >= nyquist) break;
    const double hi = std::min(edges[b + 1], nyquist);
    const auto bin_of = [&](double f) {
      return static_cast<int>(std::ceil(f * trace.stft.fft_len / trace.stft.sample_rate));
    };
    const int k_lo = bin_of(edges[b]);
    const int k_hi = hi >= nyquist ? trace.bins : bin_of(hi);
    BandSir band{edges[b], hi, 0.0, 0.0};
    band.sir_in = ratio_db(band_energy(in_spec_e, first, k_lo, k_hi),
                           band_energy(in_spec_i, first, k_lo, k_hi));
    band.sir_out = ratio_db(band_energy(s_e, first, k_lo, k_hi),
                            band_energy(out_spec_i, first, k_lo, k_hi));
    r.bands.push_back(band);
  }
  return r;
}

std::string MetricsReport::to_csv() const {
  std::string header = "sir_in,sir_out,delta_sir,segsnr,lsd,superposition_error,replay_error";
  const auto num = [](double v) { return format_double(v); };
  std::string values = num(sir_in) + "," + num(sir_out) + "," + num(delta_sir) + "," +
                       num(segsnr) + "," + num(lsd) + "," + num(superposition_error) + "," +
                       num(replay_error);
  for (const BandSir& b : bands) {
    const std::string tag = std::to_string(static_cast<int>(b.low_hz)) + "_" +
                            std::to_string(static_cast<int>(b.high_hz));
    header += ",sir_in_" + tag + ",sir_out_" + tag;
    values += "," + num(b.sir_in) + "," + num(b.sir_out);
  }
  // PESQ and STOI are not computed; segsnr and lsd stand in as distortion measures.
  header += ",perceptual_metrics";
  values += ",substituted:segsnr+lsd(pesq/stoi not computed)";
  return header + "\n" + values + "\n";
}

}  // namespace derev
