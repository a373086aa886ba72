// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <limits>
#include <numbers>

#include "derev/array_model.hpp"
#include "derev/scene.hpp"
#include "derev/stft.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace derev;

namespace {

double ref_snr_db(const Scene& s, int ref = 0) {
  const double p = (s.x_e.col(ref) + s.x_r.col(ref)).squaredNorm();
  return 10.0 * std::log10(p / s.v.col(ref).squaredNorm());
}

SceneSpec short_spec(double t60 = 0.5, std::uint64_t seed = 1) {
  SceneSpec spec;
  spec.t60 = t60;
  spec.seed = seed;
  spec.duration = 3.0;
  spec.doa = Direction{std::numbers::pi / 3, 0.0};
  return spec;
}

}  // namespace

TEST_CASE("spec validation") {
  CHECK_NOTHROW(short_spec().validate());
  SceneSpec s = short_spec();
  s.t60 = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.t60 = 2.5;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = short_spec();
  s.duration = -1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("components add up exactly on the float grid") {
  const Scene s = simulate(short_spec());
  CHECK(s.y.cols() == 8);
  CHECK(s.y.rows() == 48000);
  CHECK((s.y - (s.x_e + s.x_r + s.v)).cwiseAbs().maxCoeff() == 0.0);
  for (const Waveform* w : {&s.x_e, &s.x_r, &s.v, &s.y}) {
    const Waveform scaled = *w / kQuantum;
    CHECK((scaled - scaled.array().round().matrix()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(w->cwiseAbs().maxCoeff() < 1.0);
    // exactly representable as 32-bit floats
    const Eigen::MatrixXf f = w->cast<float>();
    CHECK((f.cast<double>() - *w).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("snr at the reference mic") {
  for (double snr : {0.0, 5.0, 10.0, 20.0}) {
    SceneSpec spec = short_spec();
    spec.snr_db = snr;
    CHECK(std::abs(ref_snr_db(simulate(spec)) - snr) < 0.1);
  }
  SceneSpec spec = short_spec();
  spec.snr_db = std::numeric_limits<double>::infinity();
  const Scene s = simulate(spec);
  CHECK(s.v.isZero(0.0));
  CHECK((s.y - s.x_e - s.x_r).isZero(0.0));
}

TEST_CASE("seeded determinism") {
  const Scene a = simulate(short_spec(0.6, 7));
  const Scene b = simulate(short_spec(0.6, 7));
  const Scene c = simulate(short_spec(0.6, 8));
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.source - b.source).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.y - c.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("mix errors and supplied noise") {
  const Waveform x = Waveform::Constant(100, 2, 0.1);
  const RVector q = RVector::Constant(100, 0.1);
  CHECK_THROWS_AS(mix(Waveform::Zero(100, 2), Waveform::Zero(100, 2), q, 10.0, 1, 0, 16000.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(mix(x, Waveform::Zero(90, 2), q, 10.0, 1, 0, 16000.0), std::invalid_argument);
  const Waveform noise = Waveform::Constant(30, 3, 1.0);
  CHECK_THROWS_AS(mix(x, x, q, 10.0, 1, 0, 16000.0, &noise), std::invalid_argument);
  auto g = test::rng(3);
  const Waveform n2 = test::random_waveform(g, 37, 2);
  const Scene s = mix(x, x, q, 0.0, 1, 0, 16000.0, &n2);
  CHECK(std::abs(ref_snr_db(s) - 0.0) < 0.1);
}

TEST_CASE("direct path") {
  auto g = test::rng(11);
  const RVector src = test::random_waveform(g, 16000, 1).col(0);
  const ArrayGeometry geom = ArrayGeometry::uniform_linear(8, 0.04);

  SUBCASE("broadside channels are identical") {
    const Waveform w = synth_direct(src, geom, Direction{std::numbers::pi / 2, 0.0}, 16000.0);
    for (int m = 1; m < 8; ++m) CHECK((w.col(m) - w.col(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("endfire cross-correlation lag") {
    const Direction endfire{std::numbers::pi, 0.0};
    const Waveform w = synth_direct(src, geom, endfire, 16000.0);
    for (int m = 1; m < 8; ++m) {
      const double tau = m * 0.04 / geom.speed_of_sound;  // away from the source
      int best = 0;
      double best_val = -1e300;
      for (int lag = -30; lag <= 30; ++lag) {
        double acc = 0.0;
        for (int i = 100; i < 15900; ++i) acc += w(i, m) * w(i - lag, 0);
        if (acc > best_val) {
          best_val = acc;
          best = lag;
        }
      }
      CHECK(best == static_cast<int>(std::lround(tau * 16000.0)));
    }
  }
  SUBCASE("stft matches the steering model") {
    const Direction doa{std::numbers::pi / 3, 0.0};
    StftConfig cfg;
    const Spectrogram s = analyze(synth_direct(src, geom, doa, 16000.0), cfg);
    double worst = 0.0;
    // Interior bins: the 64-tap delay filter rolls off in the last 500 Hz.
    for (int k = 4; cfg.bin_frequency(k) <= 7500.0; ++k) {
      const CVector d = steering_vector(geom, doa, cfg.bin_frequency(k));
      double err = 0.0, ref = 0.0;
      for (int l = 2; l < s.frames() - 2; ++l) {
        const CVector y = s.vec(l, k);
        err += (y - y[0] * d).squaredNorm();
        ref += (y[0] * d).squaredNorm();
      }
      worst = std::max(worst, std::sqrt(err / ref));
    }
    MESSAGE("worst interior-bin steering model error " << worst);
    CHECK(worst < 0.05);
  }
}

TEST_CASE("late tail") {
  const SceneSpec spec = short_spec(0.6, 5);
  const Waveform rir = late_tail_rirs(spec);
  const auto onset = static_cast<Eigen::Index>(std::llround(spec.early_window_ms * 16.0));
  CHECK(rir.topRows(onset).isZero(0.0));
  CHECK(rir.row(onset).cwiseAbs().maxCoeff() > 0.0);

  const auto tail_energy = [](double t60) {
    const Waveform r = late_tail_rirs(short_spec(t60, 5));
    return r.bottomRows(r.rows() - 1600).squaredNorm();  // beyond 100 ms
  };
  double prev = 0.0;
  for (double t60 : {0.4, 0.5, 0.6, 0.7, 0.8}) {
    const double e = tail_energy(t60);
    CHECK(e > prev);
    prev = e;
  }

  // Adjacent-mic coherence of the reverberant component, Welch estimate.
  SceneSpec longer = short_spec(0.6, 5);
  longer.duration = 10.0;
  const Scene s = simulate(longer);
  StftConfig cfg;
  const Spectrogram x = analyze(s.x_r, cfg);
  double dev = 0.0;
  int count = 0;
  for (int pair = 0; pair + 1 < 8; ++pair) {
    for (int k = 0; k < cfg.bins(); ++k) {
      const double f = cfg.bin_frequency(k);
      if (f < 500.0 || f > 3000.0) continue;
      Complex cross(0.0, 0.0);
      double pa = 0.0, pb = 0.0;
      for (int l = 0; l < x.frames(); ++l) {
        cross += x.at(l, k, pair) * std::conj(x.at(l, k, pair + 1));
        pa += std::norm(x.at(l, k, pair));
        pb += std::norm(x.at(l, k, pair + 1));
      }
      const double coh = cross.real() / std::sqrt(pa * pb);
      const double model = sinc(2.0 * std::numbers::pi * f * 0.04 / 343.0);
      dev += coh - model;
      ++count;
    }
  }
  MESSAGE("mean coherence deviation " << dev / count);
  CHECK(std::abs(dev / count) < 0.1);
}

TEST_CASE("speech-shaped source") {
  const RVector a = speech_shaped_source(2.0, 16000.0, 3);
  CHECK(a.size() == 32000);
  CHECK(std::sqrt(a.squaredNorm() / a.size()) == doctest::Approx(0.1).epsilon(1e-9));
  CHECK((a - speech_shaped_source(2.0, 16000.0, 3)).isZero(0.0));
}

TEST_CASE("fractional delay") {
  auto g = test::rng(2);
  const RVector x = test::random_waveform(g, 400, 1).col(0);
  const RVector y = fractional_delay(x, 3.0);
  for (int i = 3; i < 400; ++i) CHECK(y[i] == x[i - 3]);
  // Half-sample delays of a slow sinusoid.
  RVector s(2000);
  for (int i = 0; i < 2000; ++i) s[i] = std::sin(0.05 * i);
  const RVector h = fractional_delay(s, 2.5);
  for (int i = 100; i < 1900; ++i) CHECK(h[i] == doctest::Approx(std::sin(0.05 * (i - 2.5))).epsilon(1e-3));
}
