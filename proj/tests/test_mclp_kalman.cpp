// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <limits>

#include "derev/mclp_kalman.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace derev;

namespace {

KalmanOptions rls_options(double p0 = 1e-2) {
  KalmanOptions o;
  o.transition = 1.0;
  o.initial_error_variance = p0;
  return o;
}

// Reference recursion built from the unfused steps.
KalmanFrameResult reference_frame(BinKalmanState& s, const CVector& t, Complex x_b, double q) {
  KalmanPrior prior = predict(s);
  Innovation inn = innovate(s, prior, t, x_b, q);
  KalmanFrameResult r;
  r.s = inn.s;
  r.r = prior.w.dot(t);
  r.w_used = prior.w;
  correct(s, prior, inn, t);
  return r;
}

}  // namespace

TEST_CASE("tap buffer stacking") {
  TapBuffer buf(2, 2, 5);  // N = 2 * 3
  CHECK(buf.dimension() == 6);
  CHECK(buf.stacked().isZero(0.0));
  for (int l = 1; l <= 6; ++l) {
    CVector y(2);
    y << Complex(l, 0), Complex(0, l);
    buf.push(y);
  }
  // Last push was frame 6; t = [y(5), y(4), y(3)] relative to l = 7.
  const CVector t = buf.stacked();
  CHECK(t[0] == Complex(5, 0));
  CHECK(t[1] == Complex(0, 5));
  CHECK(t[2] == Complex(4, 0));
  CHECK(t[4] == Complex(3, 0));
  CHECK(buf.past(1)[0] == Complex(6, 0));
  CHECK(buf.past(4)[0] == Complex(3, 0));
  CHECK_THROWS_AS(TapBuffer(2, 3, 3), std::invalid_argument);
}

TEST_CASE("predict") {
  auto g = test::rng(31);
  SUBCASE("a = 1 is the identity") {
    BinKalmanState s = BinKalmanState::initial(4, rls_options());
    s.w_hat = test::random_cvector(g, 4);
    const KalmanPrior p = predict(s);
    CHECK((p.w - s.w_hat).norm() == 0.0);
    CHECK((p.Phi - s.Phi_e).norm() == 0.0);
  }
  SUBCASE("stationarity with zero weights") {
    KalmanOptions o;
    o.initial_error_variance = 0.3;
    BinKalmanState s = BinKalmanState::initial(5, o);
    const KalmanPrior p = predict(s);
    CHECK((p.Phi - 0.3 * CMatrix::Identity(5, 5)).norm() < 1e-15);
  }
  SUBCASE("term by term, a = 0.9") {
    KalmanOptions o;
    o.transition = 0.9;
    BinKalmanState s = BinKalmanState::initial(3, o);
    s.w_hat = test::random_cvector(g, 3);
    s.Phi_e = test::random_hpd(g, 3);
    const KalmanPrior p = predict(s);
    const CMatrix phi_v = (1 - 0.81) * (s.w_hat * s.w_hat.adjoint() + s.Phi_e);
    CHECK(test::rel_err(p.w, CVector(0.9 * s.w_hat)) < 1e-15);
    CHECK(test::rel_err(p.Phi, CMatrix(0.81 * s.Phi_e + phi_v)) < 1e-14);
  }
  SUBCASE("fixed process noise") {
    KalmanOptions o;
    o.transition = 0.5;
    o.process_noise = ProcessNoiseModel::kFixed;
    o.process_noise_variance = 0.2;
    BinKalmanState s = BinKalmanState::initial(2, o);
    const KalmanPrior p = predict(s);
    CHECK(p.Phi(0, 0).real() == doctest::Approx(0.25 * 1e-2 + 0.2));
  }
}

TEST_CASE("scalar closed form") {
  BinKalmanState s = BinKalmanState::initial(1, rls_options(0.7));
  CVector t(1);
  t << Complex(0.4, -1.1);
  const double q = 0.3;
  const Complex x(1.5, 0.25);
  KalmanPrior prior = predict(s);
  Innovation inn = innovate(s, prior, t, x, q);
  const double p = 0.7, tau2 = std::norm(t[0]);
  CHECK(std::abs(inn.gain[0] - p * t[0] / (p * tau2 + q)) < 1e-15);
  CHECK(inn.phi_s == doctest::Approx(p * tau2 + q));
  CHECK(inn.s == x);  // zero prior weights
  correct(s, prior, inn, t);
  CHECK(s.Phi_e(0, 0).real() == doctest::Approx(p * q / (p * tau2 + q)).epsilon(1e-14));
  CHECK(s.Phi_e(0, 0).real() <= p);
  CHECK(std::abs(s.w_hat[0] - inn.gain[0] * std::conj(x)) < 1e-15);
}

TEST_CASE("zero regressor and dominant target psd") {
  BinKalmanState s = BinKalmanState::initial(6);
  const Complex x(0.2, 0.1);
  KalmanFrameResult r = kalman_process_frame(s, CVector::Zero(6), x, 1.0);
  CHECK(r.s == x);
  CHECK(r.gain_norm == 0.0);
  CHECK(s.w_hat.isZero(0.0));

  auto g = test::rng(5);
  BinKalmanState s2 = BinKalmanState::initial(6);
  const CVector t = test::random_cvector(g, 6);
  r = kalman_process_frame(s2, t, x, 1e12);
  CHECK(r.gain_norm < 1e-12);
  CHECK(std::abs(r.s - x) < 1e-12);
}

TEST_CASE("non-finite inputs skip the frame") {
  auto g = test::rng(6);
  BinKalmanState s = BinKalmanState::initial(4);
  const BinKalmanState before = s;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  KalmanFrameResult r = kalman_process_frame(s, test::random_cvector(g, 4), Complex(nan, 0), 1.0);
  CHECK(r.skipped);
  CHECK(s.skipped_count == 1);
  CHECK((s.Phi_e - before.Phi_e).norm() == 0.0);
  r = kalman_process_frame(s, test::random_cvector(g, 4), Complex(1, 0), nan);
  CHECK(r.skipped);
  CHECK(s.skipped_count == 2);
}

TEST_CASE("fused frame matches the step-by-step recursion") {
  for (auto model : {ProcessNoiseModel::kStationary, ProcessNoiseModel::kFixed}) {
    auto g = test::rng(40);
    KalmanOptions o;
    o.transition = 0.98;
    o.process_noise = model;
    o.process_noise_variance = 1e-3;
    BinKalmanState fused = BinKalmanState::initial(16, o);
    BinKalmanState ref = fused;
    for (int l = 0; l < 100; ++l) {
      const CVector t = test::random_cvector(g, 16);
      const Complex x(test::gauss(g), test::gauss(g));
      const double q = test::uniform(g, 0.1, 2.0);
      const KalmanFrameResult a = kalman_process_frame(fused, t, x, q);
      const KalmanFrameResult b = reference_frame(ref, t, x, q);
      CHECK(std::abs(a.s - b.s) < 1e-10 * (1 + std::abs(b.s)));
      CHECK(test::rel_err(a.w_used, b.w_used) < 1e-10);
    }
    CHECK(test::rel_err(fused.w_hat, ref.w_hat) < 1e-10);
    CHECK(test::rel_err(fused.Phi_e, ref.Phi_e) < 1e-10);
  }
}

TEST_CASE("covariance invariants every frame") {
  auto g = test::rng(41);
  BinKalmanState s = BinKalmanState::initial(12);
  for (int l = 0; l < 200; ++l) {
    const CVector t = test::random_cvector(g, 12);
    const Complex x(test::gauss(g), test::gauss(g));
    KalmanPrior prior = predict(s);
    Innovation inn = innovate(s, prior, t, x, 0.5);
    CHECK((inn.gain * inn.phi_s - prior.Phi * t).norm() <= 1e-10 * (prior.Phi * t).norm());
    correct(s, prior, inn, t);
    CHECK(s.Phi_e.trace().real() <= prior.Phi.trace().real());
    CHECK((s.Phi_e - s.Phi_e.adjoint()).norm() <= 1e-10 * s.Phi_e.norm());
    CHECK(s.Phi_e.diagonal().real().minCoeff() >= 0.0);
    CHECK(s.Phi_e.diagonal().imag().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("recursion equals the regularized normal equations") {
  auto g = test::rng(50);
  const int n = 6, frames = 200;
  const double p0 = 1e-2, q = 0.8;
  BinKalmanState s = BinKalmanState::initial(n, rls_options(p0));
  CMatrix A = CMatrix::Identity(n, n) / p0;
  CVector b = CVector::Zero(n);
  for (int l = 0; l < frames; ++l) {
    const CVector t = test::random_cvector(g, n);
    const Complex x(test::gauss(g), test::gauss(g));
    kalman_process_frame(s, t, x, q);
    A += t * t.adjoint() / q;
    b += t * std::conj(x) / q;
  }
  const CVector w_ls = A.ldlt().solve(b);
  CHECK(test::rel_err(s.w_hat, w_ls) < 1e-6);
}

TEST_CASE("converges on a stationary regression") {
  auto g = test::rng(51);
  for (int n : {1, 2, 4, 8}) {
    const int frames = 200;
    const double p0 = 1.0;
    const CVector w_true = test::random_cvector(g, n);
    std::vector<CVector> ts;
    std::vector<Complex> clean;
    double sig = 0.0;
    for (int l = 0; l < frames; ++l) {
      ts.push_back(test::random_cvector(g, n));
      clean.push_back(w_true.dot(ts.back()));  // x = w^H t
      sig += std::norm(clean.back());
    }
    const double q = 1e-4 * sig / frames;  // 40 dB
    BinKalmanState s = BinKalmanState::initial(n, rls_options(p0));
    CMatrix A = CMatrix::Identity(n, n) / p0;
    CVector b = CVector::Zero(n);
    for (int l = 0; l < frames; ++l) {
      const Complex x = clean[l] + std::sqrt(q / 2.0) * Complex(test::gauss(g), test::gauss(g));
      kalman_process_frame(s, ts[l], x, q);
      A += ts[l] * ts[l].adjoint() / q;
      b += ts[l] * std::conj(x) / q;
    }
    const CVector w_ls = A.ldlt().solve(b);
    CHECK(test::rel_err(s.w_hat, w_ls) < 1e-6);
    // The remaining error against w* is the estimation noise of the batch
    // solution, roughly sqrt(N * 1e-4 / frames).
    const double err = test::rel_err(s.w_hat, w_true);
    MESSAGE("N = " << n << " relative weight error " << err);
    CHECK(err < 3.0 * std::sqrt(n * 1e-4 / frames));
    CHECK(err < 3e-3);
  }
}

TEST_CASE("no spurious adaptation on uncorrelated data") {
  auto g = test::rng(52);
  BinKalmanState s = BinKalmanState::initial(64);
  double warm = 0.0, peak = 0.0;
  for (int l = 0; l < 600; ++l) {
    const CVector t = test::random_cvector(g, 64);
    const Complex x(test::gauss(g), test::gauss(g));
    kalman_process_frame(s, t, x, 2.0);
    if (l == 20) warm = s.w_hat.norm();
    if (l > 20) peak = std::max(peak, s.w_hat.norm());
  }
  CHECK(peak < 10.0 * warm);
}
