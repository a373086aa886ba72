// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "derev/fft.hpp"

namespace derev {

namespace {

constexpr double kLn1000 = 6.907755278982137;  // 3 ln(10)

enum class Stream : std::uint32_t { kSource = 1, kEarly = 2, kLate = 3, kNoise = 4 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

double peak(const Waveform& w) { return w.size() ? w.cwiseAbs().maxCoeff() : 0.0; }

void quantize(Eigen::Ref<Eigen::MatrixXd> w) {
  w = (w.array() / kQuantum).round() * kQuantum;
}

}  // namespace

void SceneSpec::validate() const {
  if (!(t60 > 0.0 && t60 <= 2.0)) throw std::invalid_argument("scene: t60 must lie in (0, 2] s");
  if (!(duration > 0.0)) throw std::invalid_argument("scene: duration must be > 0");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw std::invalid_argument("scene: snr_db must be a number or +inf");
  if (early_taps < 0) throw std::invalid_argument("scene: early_taps must be >= 0");
  if (!(early_window_ms > 0.0)) throw std::invalid_argument("scene: early_window_ms must be > 0");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("scene: sample_rate must be > 0");
  if (!(room_volume > 0.0) || !(source_distance > 0.0))
    throw std::invalid_argument("scene: room_volume and source_distance must be > 0");
  geometry.validate();
}

double SceneSpec::reverberant_energy_ratio() const {
  const double rc = 0.057 * std::sqrt(room_volume / t60);
  return (source_distance / rc) * (source_distance / rc);
}

RVector speech_shaped_source(double duration, double sample_rate, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(std::llround(duration * sample_rate));
  if (n <= 0) throw std::invalid_argument("speech_shaped_source: empty duration");
  std::mt19937_64 rng = make_rng(seed, Stream::kSource);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Long-term spectrum: one-pole high-pass near 100 Hz, then two one-pole
  // low-passes near 500 Hz and 3 kHz (roughly -6 dB/oct, steepening above 3 kHz).
  const auto pole = [&](double fc) { return std::exp(-2.0 * std::numbers::pi * fc / sample_rate); };
  const double hp = pole(100.0), lp1 = pole(500.0), lp2 = pole(3000.0);
  RVector x(n);
  double hp_x = 0.0, hp_y = 0.0, s1 = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = gauss(rng);
    hp_y = hp * (hp_y + e - hp_x);
    hp_x = e;
    s1 = lp1 * s1 + (1.0 - lp1) * hp_y;
    s2 = lp2 * s2 + (1.0 - lp2) * s1;
    x[i] = s2;
  }

  // Syllabic envelope: raised-cosine bursts separated by short gaps and
  // occasional pauses.
  RVector env = RVector::Zero(n);
  Eigen::Index pos = static_cast<Eigen::Index>(0.05 * sample_rate);
  while (pos < n) {
    const auto len = static_cast<Eigen::Index>((0.08 + 0.22 * uni(rng)) * sample_rate);
    const double level = 0.3 + 0.7 * uni(rng);
    for (Eigen::Index j = 0; j < len && pos + j < n; ++j)
      env[pos + j] = level * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * j / len));
    pos += len;
    const double gap = uni(rng) < 0.15 ? 0.2 + 0.4 * uni(rng) : 0.02 + 0.13 * uni(rng);
    pos += static_cast<Eigen::Index>(gap * sample_rate);
  }
  x = x.cwiseProduct(env);
  const double rms = std::sqrt(x.squaredNorm() / static_cast<double>(n));
  if (rms > 0.0) x *= 0.1 / rms;
  return x;
}

RVector fractional_delay(const RVector& x, double delay) {
  const Eigen::Index n = x.size();
  RVector y = RVector::Zero(n);
  const double whole = std::floor(delay);
  if (delay == whole) {
    const auto shift = static_cast<Eigen::Index>(whole);
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::Index src = t - shift;
      if (src >= 0 && src < n) y[t] = x[src];
    }
    return y;
  }
  constexpr int kTaps = 64;
  constexpr double kHalf = kTaps / 2.0;
  const auto first = static_cast<Eigen::Index>(whole) - (kTaps / 2 - 1);
  std::vector<double> h(kTaps);
  for (int j = 0; j < kTaps; ++j) {
    const double u = static_cast<double>(first + j) - delay;
    const double win = 0.42 + 0.5 * std::cos(std::numbers::pi * u / kHalf) +
                       0.08 * std::cos(2.0 * std::numbers::pi * u / kHalf);
    h[j] = sinc(std::numbers::pi * u) * win;
  }
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = 0.0;
    for (int j = 0; j < kTaps; ++j) {
      const Eigen::Index src = t - (first + j);
      if (src >= 0 && src < n) acc += h[j] * x[src];
    }
    y[t] = acc;
  }
  return y;
}

Waveform synth_direct(const RVector& source, const ArrayGeometry& geom, const Direction& doa,
                      double sample_rate) {
  geom.validate();
  const std::vector<double> tau = relative_delays(geom, doa);
  Waveform out(source.size(), geom.size());
  for (int m = 0; m < geom.size(); ++m) {
    const double delay = m == geom.reference_index ? 0.0 : tau[m] * sample_rate;
    out.col(m) = fractional_delay(source, delay);
  }
  return out;
}

Waveform add_early_reflections(const Waveform& direct, const SceneSpec& spec) {
  std::mt19937_64 rng = make_rng(spec.seed, Stream::kEarly);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Waveform out = direct;
  const double window = spec.early_window_ms * 1e-3 * spec.sample_rate;
  const double min_delay = std::min(2e-3 * spec.sample_rate, 0.5 * window);
  const Eigen::Index n = direct.rows();
  for (int i = 0; i < spec.early_taps; ++i) {
    const auto delay = static_cast<Eigen::Index>(
        std::floor(min_delay + (window - min_delay) * uni(rng)));
    const double sign = uni(rng) < 0.5 ? -1.0 : 1.0;
    const double gain = sign * (0.2 + 0.3 * uni(rng));
    if (delay <= 0 || delay >= n) continue;
    out.bottomRows(n - delay) += gain * direct.topRows(n - delay);
  }
  return out;
}

Waveform late_tail_rirs(const SceneSpec& spec) {
  spec.validate();
  const int mics = spec.geometry.size();
  const double fs = spec.sample_rate;
  const auto onset = static_cast<Eigen::Index>(std::llround(spec.early_window_ms * 1e-3 * fs));
  const auto tail_len = static_cast<Eigen::Index>(std::ceil(1.2 * spec.t60 * fs));
  const std::size_t nfft = next_pow2(static_cast<std::size_t>(tail_len));

  std::mt19937_64 rng = make_rng(spec.seed, Stream::kLate);
  std::normal_distribution<double> gauss(0.0, 1.0);
  RealFft fft(nfft);
  std::vector<std::vector<Complex>> spectra(mics, std::vector<Complex>(fft.bins()));
  std::vector<double> buf(nfft);
  for (int m = 0; m < mics; ++m) {
    for (double& v : buf) v = gauss(rng);
    fft.forward(buf, spectra[m]);
  }
  // Impose the diffuse coherence bin by bin with a real PSD square root.
  std::vector<std::vector<Complex>> mixed(mics, std::vector<Complex>(fft.bins()));
  Eigen::VectorXcd in(mics);
  for (std::size_t k = 0; k < fft.bins(); ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
    const Eigen::MatrixXd g = psd_sqrt(diffuse_coherence(spec.geometry, f).real());
    for (int m = 0; m < mics; ++m) in[m] = spectra[m][k];
    const Eigen::VectorXcd out = g.cast<Complex>() * in;
    for (int m = 0; m < mics; ++m) mixed[m][k] = out[m];
  }

  const double e_total = spec.reverberant_energy_ratio();
  const double decay = 2.0 * kLn1000 / spec.t60;  // energy decay rate, 1/s
  const double t_on = static_cast<double>(onset) / fs;
  const double t_end = static_cast<double>(onset + tail_len) / fs;
  const double e_late = e_total * (std::exp(-decay * t_on) - std::exp(-decay * t_end));

  Waveform rir = Waveform::Zero(onset + tail_len, mics);
  for (int m = 0; m < mics; ++m) {
    fft.inverse(mixed[m], buf);
    double energy = 0.0;
    for (Eigen::Index i = 0; i < tail_len; ++i) {
      const double t = static_cast<double>(onset + i) / fs;
      const double v = buf[i] * std::exp(-0.5 * decay * t);
      rir(onset + i, m) = v;
      energy += v * v;
    }
    if (energy > 0.0) rir.col(m) *= std::sqrt(e_late / energy);
  }
  return rir;
}

Waveform synth_late(const RVector& source, const SceneSpec& spec) {
  const Waveform rir = late_tail_rirs(spec);
  Waveform out(source.size(), rir.cols());
  std::vector<double> h(static_cast<std::size_t>(rir.rows()));
  for (Eigen::Index m = 0; m < rir.cols(); ++m) {
    for (Eigen::Index i = 0; i < rir.rows(); ++i) h[i] = rir(i, m);
    const std::vector<double> y =
        fft_convolve(std::span<const double>(source.data(), source.size()), h);
    for (Eigen::Index i = 0; i < source.size(); ++i) out(i, m) = y[i];
  }
  return out;
}

Scene mix(const Waveform& x_e, const Waveform& x_r, const RVector& source, double snr_db,
          std::uint64_t seed, int reference_index, double sample_rate, const Waveform* noise) {
  if (x_e.rows() != x_r.rows() || x_e.cols() != x_r.cols() || x_e.rows() != source.size())
    throw std::invalid_argument("mix: component lengths differ");
  if (reference_index < 0 || reference_index >= x_e.cols())
    throw std::invalid_argument("mix: reference index out of range");
  const Eigen::Index n = x_e.rows();
  const int mics = static_cast<int>(x_e.cols());
  const Eigen::VectorXd speech = x_e.col(reference_index) + x_r.col(reference_index);
  const double p_speech = speech.squaredNorm() / static_cast<double>(n);
  if (!(p_speech > 0.0)) throw std::invalid_argument("mix: reverberant speech has zero power");

  Scene scene;
  scene.sample_rate = sample_rate;
  scene.x_e = x_e;
  scene.x_r = x_r;
  scene.source = source;
  const bool noiseless = std::isinf(snr_db) && snr_db > 0.0;
  if (noiseless) {
    scene.v = Waveform::Zero(n, mics);
  } else {
    Waveform v(n, mics);
    if (noise) {
      if (noise->cols() != mics || noise->rows() == 0)
        throw std::invalid_argument("mix: noise file channel count does not match the array");
      for (Eigen::Index i = 0; i < n; ++i) v.row(i) = noise->row(i % noise->rows());
    } else {
      std::mt19937_64 rng = make_rng(seed, Stream::kNoise);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int m = 0; m < mics; ++m)
        for (Eigen::Index i = 0; i < n; ++i) v(i, m) = gauss(rng);
    }
    const double p_noise = v.col(reference_index).squaredNorm() / static_cast<double>(n);
    if (!(p_noise > 0.0)) throw std::invalid_argument("mix: noise has zero power at the reference mic");
    v *= std::sqrt(p_speech / (p_noise * std::pow(10.0, snr_db / 10.0)));
    scene.v = std::move(v);
  }

  // Common gain so that every component and the mixture peak at or below 0.5,
  // then snap each component to the 2^-24 grid; the sum stays on the grid.
  const Waveform sum = scene.x_e + scene.x_r + scene.v;
  const double pk = std::max({peak(sum), peak(scene.x_e), peak(scene.x_r), peak(scene.v),
                              source.size() ? source.cwiseAbs().maxCoeff() : 0.0});
  const double gain = pk > 0.0 ? 0.5 / pk : 1.0;
  scene.x_e *= gain;
  scene.x_r *= gain;
  scene.v *= gain;
  scene.source *= gain;
  quantize(scene.x_e);
  quantize(scene.x_r);
  quantize(scene.v);
  quantize(scene.source);
  scene.y = scene.x_e + scene.x_r + scene.v;
  return scene;
}

Scene simulate(const SceneSpec& spec, const RVector* source, const Waveform* noise) {
  spec.validate();
  const RVector q = source ? *source : speech_shaped_source(spec.duration, spec.sample_rate, spec.seed);
  const Waveform direct = synth_direct(q, spec.geometry, spec.doa, spec.sample_rate);
  const Waveform x_e = add_early_reflections(direct, spec);
  const Waveform x_r = synth_late(q, spec);
  return mix(x_e, x_r, q, spec.snr_db, spec.seed, spec.geometry.reference_index,
             spec.sample_rate, noise);
}

}  // namespace derev
