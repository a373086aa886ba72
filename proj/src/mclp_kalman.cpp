// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/mclp_kalman.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace derev {

TapBuffer::TapBuffer(int channels, int delay, int order)
    : channels_(channels), delay_(delay), order_(order) {
  if (channels < 1) throw std::invalid_argument("tap buffer: channels must be >= 1");
  if (delay < 1 || delay >= order)
    throw std::invalid_argument("tap buffer: need 1 <= D < L");
  ring_.assign(static_cast<std::size_t>(order - 1) * channels, Complex(0.0, 0.0));
}

void TapBuffer::push(const CVector& y) {
  if (y.size() != channels_) throw std::invalid_argument("tap buffer: wrong frame size");
  std::copy(y.data(), y.data() + channels_,
            ring_.begin() + static_cast<std::ptrdiff_t>(head_) * channels_);
  head_ = (head_ + 1) % (order_ - 1);
}

Eigen::Map<const CVector> TapBuffer::past(int lag) const {
  // The most recent push (lag 1) sits just before head_.
  const int slots = order_ - 1;
  const int slot = ((head_ - lag) % slots + slots) % slots;
  return {ring_.data() + static_cast<std::ptrdiff_t>(slot) * channels_, channels_};
}

void TapBuffer::stacked(CVector& out) const {
  out.resize(dimension());
  for (int lag = delay_, row = 0; lag <= order_ - 1; ++lag, row += channels_)
    out.segment(row, channels_) = past(lag);
}

CVector TapBuffer::stacked() const {
  CVector t;
  stacked(t);
  return t;
}

BinKalmanState BinKalmanState::initial(int dimension, const KalmanOptions& opts) {
  if (!(opts.transition > 0.0 && opts.transition <= 1.0))
    throw std::invalid_argument("kalman: transition factor must lie in (0, 1]");
  if (!(opts.initial_error_variance > 0.0))
    throw std::invalid_argument("kalman: initial error variance must be > 0");
  BinKalmanState s;
  s.w_hat = CVector::Zero(dimension);
  s.Phi_e = opts.initial_error_variance * CMatrix::Identity(dimension, dimension);
  s.a = opts.transition;
  s.process_noise = opts.process_noise;
  s.process_noise_variance = opts.process_noise_variance;
  s.innovation_floor_relative = opts.innovation_floor_relative;
  return s;
}

double BinKalmanState::innovation_floor() const {
  return std::max(innovation_floor_relative * running_max_power, kAbsoluteInnovationFloor);
}

KalmanPrior predict(const BinKalmanState& state) {
  const double a = state.a;
  KalmanPrior p;
  p.w = a * state.w_hat;
  if (state.process_noise == ProcessNoiseModel::kStationary) {
    // Phi_v = (1 - a^2)(w w^H + Phi_e), so a^2 Phi_e + Phi_v = Phi_e + (1 - a^2) w w^H.
    const double c = 1.0 - a * a;
    p.Phi = state.Phi_e;
    if (c != 0.0) p.Phi.noalias() += c * (state.w_hat * state.w_hat.adjoint());
  } else {
    p.Phi = (a * a) * state.Phi_e;
    p.Phi.diagonal().array() += state.process_noise_variance;
  }
  return p;
}

Innovation innovate(BinKalmanState& state, const KalmanPrior& prior, const CVector& t,
                    Complex x_b, double phi_xc) {
  Innovation inn;
  // s^* = x_b^* - t^H w  <=>  s = x_b - w^H t
  inn.s = x_b - prior.w.dot(t);
  inn.phi_t.noalias() = prior.Phi * t;
  const CVector& pt = inn.phi_t;
  const double quad = t.dot(pt).real();
  const double power = std::norm(x_b);
  if (!std::isfinite(power) || !std::isfinite(phi_xc) || !std::isfinite(quad) ||
      !std::isfinite(inn.s.real()) || !std::isfinite(inn.s.imag())) {
    inn.valid = false;
    inn.gain = CVector::Zero(t.size());
    return inn;
  }
  state.running_max_power = std::max(state.running_max_power, power);
  inn.phi_s = std::max(quad + phi_xc, state.innovation_floor());
  inn.gain = pt / inn.phi_s;
  return inn;
}

void correct(BinKalmanState& state, const KalmanPrior& prior, const Innovation& inn,
             const CVector& t) {
  const CVector pt = inn.phi_t.size() == t.size() ? inn.phi_t : CVector(prior.Phi * t);
  state.w_hat = prior.w + inn.gain * std::conj(inn.s);
  // Phi_prior - k t^H Phi_prior, with t^H Phi_prior = (Phi_prior t)^H.
  state.Phi_e = prior.Phi;
  state.Phi_e.noalias() -= inn.gain * pt.adjoint();
  state.Phi_e = 0.5 * (state.Phi_e + state.Phi_e.adjoint()).eval();
  for (Eigen::Index i = 0; i < state.Phi_e.rows(); ++i)
    state.Phi_e(i, i) = Complex(std::max(state.Phi_e(i, i).real(), 0.0), 0.0);
}

KalmanFrameResult kalman_process_frame(BinKalmanState& state, const CVector& t, Complex x_b,
                                       double phi_xc) {
  if (t.size() != state.dimension())
    throw std::invalid_argument("kalman: regressor dimension mismatch");
  KalmanFrameResult out;
  const double a = state.a;
  const Complex r = a * state.w_hat.dot(t);
  const Complex s = x_b - r;
  const double power = std::norm(x_b);
  if (!std::isfinite(power) || !std::isfinite(phi_xc) || !std::isfinite(s.real()) ||
      !std::isfinite(s.imag())) {
    ++state.skipped_count;
    out.s = x_b;
    out.skipped = true;
    out.w_used = CVector::Zero(t.size());
    return out;
  }

  // Same recursion as predict/innovate/correct, working on the lower triangle
  // in place and mirroring once at the end.
  CMatrix& P = state.Phi_e;
  auto lower = P.selfadjointView<Eigen::Lower>();
  if (state.process_noise == ProcessNoiseModel::kStationary) {
    const double c = 1.0 - a * a;
    if (c != 0.0) lower.rankUpdate(state.w_hat, c);
  } else {
    P.triangularView<Eigen::Lower>() *= a * a;
    P.diagonal().array() += state.process_noise_variance;
  }
  state.w_hat *= a;
  out.w_used = state.w_hat;

  const CVector pt = lower * t;
  const double quad = t.dot(pt).real();
  if (!std::isfinite(quad)) {
    // Roll back is impossible cheaply, so treat a blown-up covariance like a
    // skipped frame and restart from the prior.
    ++state.skipped_count;
    P.triangularView<Eigen::StrictlyUpper>() = P.adjoint();
    out.s = x_b;
    out.skipped = true;
    out.w_used = CVector::Zero(t.size());
    return out;
  }
  state.running_max_power = std::max(state.running_max_power, power);
  const double phi_s = std::max(quad + phi_xc, state.innovation_floor());

  state.w_hat += pt * (std::conj(s) / phi_s);
  lower.rankUpdate(pt, -1.0 / phi_s);
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    P(i, i) = Complex(std::max(P(i, i).real(), 0.0), 0.0);
  P.triangularView<Eigen::StrictlyUpper>() = P.adjoint();

  out.s = s;
  out.r = r;
  out.gain_norm = pt.norm() / phi_s;
  return out;
}

}  // namespace derev
