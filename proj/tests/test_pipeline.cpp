// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <limits>

#include "derev/metrics.hpp"
#include "derev/pipeline.hpp"
#include "derev/scene.hpp"
#include "doctest.h"
#include "scenes.hpp"
#include "test_util.hpp"

using namespace derev;

namespace {

PipelineConfig small_config(Mode mode = Mode::kFull) {
  PipelineConfig cfg;
  cfg.geometry = ArrayGeometry::uniform_linear(4, 0.04);
  cfg.doa = Direction{1.0, 0.0};
  cfg.mode = mode;
  return cfg;
}

Waveform short_scene(int mics, std::uint64_t seed) {
  SceneSpec spec;
  spec.duration = 1.5;
  spec.seed = seed;
  spec.geometry = ArrayGeometry::uniform_linear(mics, 0.04);
  spec.doa = Direction{1.0, 0.0};
  return simulate(spec).y;
}

}  // namespace

TEST_CASE("config validation") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.tap_dimension() == 64);
  auto bad = [](auto edit) {
    PipelineConfig c;
    edit(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  bad([](PipelineConfig& c) { c.alpha = 1.0; });
  bad([](PipelineConfig& c) { c.alpha = 0.0; });
  bad([](PipelineConfig& c) { c.lambda = 1.0; });
  bad([](PipelineConfig& c) { c.a = 0.0; });
  bad([](PipelineConfig& c) { c.a = 1.5; });
  bad([](PipelineConfig& c) { c.D = 10; });
  bad([](PipelineConfig& c) { c.D = 0; });
  bad([](PipelineConfig& c) { c.threads = -1; });
  PipelineConfig ends;
  ends.allow_alpha_endpoints = true;
  ends.alpha = 0.0;
  CHECK_NOTHROW(ends.validate());
  ends.alpha = 1.0;
  CHECK_NOTHROW(ends.validate());
  CHECK(parse_mode("mvdr_only") == Mode::kMvdrOnly);
  CHECK(to_string(Mode::kMclpOnly) == "mclp_only");
  CHECK_THROWS_AS(parse_mode("gsc"), std::invalid_argument);
}

TEST_CASE("fused target psd") {
  CVector w(2), y(2);
  w << 1.0, 0.0;
  y << 1.0, 5.0;
  CHECK(fused_target_psd(0.7, 2.0, w, y) == doctest::Approx(1.7).epsilon(1e-15));
  CHECK(fused_target_psd(1.0, 2.0, w, y) == 2.0);
  y << Complex(0.6, 0.8), 0.0;
  CHECK(fused_target_psd(0.0, 2.0, w, y) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(fused_target_psd(0.3, 0.0, w, y) >= 0.0);
}

TEST_CASE("mode lattice") {
  const Waveform y = short_scene(4, 3);
  const Spectrogram spec = analyze(y, small_config().stft);

  Pipeline full(small_config(Mode::kFull));
  Pipeline mvdr(small_config(Mode::kMvdrOnly));
  Pipeline mclp(small_config(Mode::kMclpOnly));
  Pipeline pass(small_config(Mode::kPassthrough));
  int differs = 0;
  for (int l = 0; l < spec.frames(); ++l) {
    const FrameResult f = full.process_frame(spec, l);
    const FrameResult b = mvdr.process_frame(spec, l);
    const FrameResult c = mclp.process_frame(spec, l);
    const FrameResult p = pass.process_frame(spec, l);
    for (int k = 0; k < spec.bins(); ++k) {
      CHECK(b.s[k] == f.x_b[k]);
      CHECK(p.s[k] == spec.at(l, k, 0));
      CHECK(c.x_b[k] == spec.at(l, k, 0));
      if (f.s[k] != f.x_b[k]) ++differs;
    }
  }
  CHECK(differs > 0);  // the prediction path is active in full mode
  // Disabling the Kalman path leaves the beamformer states identical.
  for (int k = 0; k < spec.bins(); ++k) {
    CHECK((full.bin(k).beamformer().w_b - mvdr.bin(k).beamformer().w_b).norm() == 0.0);
    CHECK(full.bin(k).estimator().phi_r == mclp.bin(k).estimator().phi_r);
  }
}

TEST_CASE("alpha endpoints feed the Kalman filter exactly") {
  const Waveform y = short_scene(4, 4);
  for (double alpha : {0.0, 1.0}) {
    PipelineConfig cfg = small_config();
    cfg.allow_alpha_endpoints = true;
    cfg.alpha = alpha;
    const Spectrogram spec = analyze(y, cfg.stft);
    ShadowTrace trace;
    trace.stft = cfg.stft;
    trace.channels = 4;
    trace.tap_dim = cfg.tap_dimension();
    trace.frames = spec.frames();
    trace.bins = spec.bins();
    trace.allocate();
    Pipeline p(cfg);
    for (int l = 0; l < spec.frames(); ++l) {
      const FrameResult f = p.process_frame(spec, l, &trace);
      for (int k = 0; k < spec.bins(); ++k) {
        const BinDiagnostics& d = f.diagnostics[k];
        if (alpha == 1.0) {
          CHECK(d.phi_xc == d.phi_target);
        } else {
          const CVector prev =
              l == 0 ? delay_and_sum(p.models()[k].d)
                     : CVector(Eigen::Map<const CVector>(trace.beamformer(l - 1, k).data(), 4));
          const CVector yk = spec.vec(l, k);
          CHECK(d.phi_xc == std::norm(prev.dot(yk)));
          Complex naive(0.0, 0.0);
          for (int i = 0; i < 4; ++i) naive += std::conj(prev[i]) * yk[i];
          CHECK(std::abs(d.phi_xc - std::norm(naive)) <= 1e-12 * std::norm(naive) + 1e-300);
        }
      }
    }
  }
}

TEST_CASE("zero input gives zero output") {
  const RunResult r = run(small_config(), Waveform::Zero(8000, 4));
  CHECK(r.enhanced.rows() == 8000);
  CHECK(r.enhanced.isZero(0.0));
}

TEST_CASE("determinism across runs and worker counts") {
  const Waveform y = short_scene(4, 5);
  PipelineConfig cfg = small_config();
  const RunResult a = run(cfg, y, {true});
  const RunResult b = run(cfg, y, {true});
  cfg.threads = 4;
  const RunResult c = run(cfg, y, {true});
  CHECK((a.enhanced - b.enhanced).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.enhanced - c.enhanced).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(a.trace);
  REQUIRE(c.trace);
  CHECK(a.trace->w_b == c.trace->w_b);
  CHECK(a.trace->w_pred == c.trace->w_pred);
  bool same_diag = true;
  for (std::size_t i = 0; i < a.diagnostics.values.size(); ++i) {
    const BinDiagnostics& u = a.diagnostics.values[i];
    const BinDiagnostics& v = c.diagnostics.values[i];
    same_diag = same_diag && u.phi_xc == v.phi_xc && u.phi_r == v.phi_r &&
                u.gain_norm == v.gain_norm && u.flags == v.flags;
  }
  CHECK(same_diag);
}

TEST_CASE("non-finite input never reaches the output") {
  Waveform y = short_scene(4, 6);
  y(4000, 2) = std::numeric_limits<double>::quiet_NaN();
  y(9000, 0) = std::numeric_limits<double>::infinity();
  const RunResult r = run(small_config(), y);
  CHECK(r.enhanced.allFinite());
  CHECK(r.diagnostics.counters.non_finite > 0);
}

TEST_CASE("input errors") {
  CHECK_THROWS_AS(run(small_config(), Waveform::Zero(8000, 3)), std::invalid_argument);
  Pipeline p(small_config());
  CHECK_THROWS_AS(p.process_frame(std::vector<CVector>(10, CVector::Zero(4))),
                  std::invalid_argument);
}

TEST_CASE("distortionless on an anechoic noiseless scene") {
  PipelineConfig cfg;
  cfg.doa = Direction{1.2, 0.0};
  const auto scene = test::anechoic_scene(cfg, 200, cfg.L + 1, 9);
  const RunResult r = run_spectrogram(cfg, scene.y);
  const int warm = 31;
  double err = 0.0, ref = 0.0;
  for (int l = warm; l < scene.q.frames(); ++l)
    for (int k = 0; k < scene.q.bins(); ++k) {
      err += std::norm(r.enhanced_spectrum.at(l, k, 0) - scene.q.at(l, k, 0));
      ref += std::norm(scene.q.at(l, k, 0));
    }
  CHECK(std::sqrt(err / ref) < 1e-6);
}

TEST_CASE("trace replay reproduces the output") {
  const Waveform y = short_scene(4, 8);
  for (Mode mode : {Mode::kFull, Mode::kMvdrOnly, Mode::kMclpOnly, Mode::kPassthrough}) {
    const RunResult r = run(small_config(mode), y, {true});
    REQUIRE(r.trace);
    const RVector replay = shadow_apply(*r.trace, y);
    CHECK(test::rel_err(replay, r.enhanced.col(0)) < 1e-10);
    if (mode == Mode::kPassthrough) CHECK(test::rel_err(replay, y.col(0)) < 1e-12);
  }
}
