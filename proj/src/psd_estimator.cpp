// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/psd_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace derev {

BinEstimatorState BinEstimatorState::initial(int channels, const PsdEstimatorOptions& opts) {
  if (!(opts.lambda > 0.0 && opts.lambda < 1.0))
    throw std::invalid_argument("psd estimator: lambda must lie in (0, 1)");
  BinEstimatorState s;
  s.lambda = opts.lambda;
  s.floor_relative = opts.floor_relative;
  s.warmup_frames = opts.warmup_frames;
  const double floor = s.psd_floor();
  s.Phi_n = floor * CMatrix::Identity(channels - 1, channels - 1);
  s.Phi_y = floor * CMatrix::Identity(channels, channels);
  s.phi_r = s.phi_v = s.phi_target = floor;
  return s;
}

double BinEstimatorState::psd_floor() const {
  return std::max(floor_relative * running_max_power, kAbsolutePsdFloor);
}

CVector block_signal(const BinSpatialModel& model, const CVector& y) {
  if (y.size() != model.B.rows())
    throw std::invalid_argument("block_signal: observation has wrong dimension");
  return model.B.adjoint() * y;
}

namespace {
void hermitize(CMatrix& a) { a = 0.5 * (a + a.adjoint()).eval(); }
}  // namespace

void update_covariances(BinEstimatorState& state, const CVector& n, const CVector& y) {
  const double lam = state.lambda;
  state.Phi_n = lam * state.Phi_n + (1.0 - lam) * (n * n.adjoint());
  state.Phi_y = lam * state.Phi_y + (1.0 - lam) * (y * y.adjoint());
  hermitize(state.Phi_n);
  hermitize(state.Phi_y);
  const double power = state.Phi_y.trace().real() / static_cast<double>(state.Phi_y.rows());
  if (std::isfinite(power)) state.running_max_power = std::max(state.running_max_power, power);
  ++state.frames;
}

GramSystem gram_system(const BinEstimatorState& state, const BinSpatialModel& model) {
  GramSystem g;
  g.matrix = model.gram;
  // tr{A^H B} = sum_ij conj(A_ij) B_ij
  g.rhs[0] = state.Phi_n.conjugate().cwiseProduct(model.Gamma_tilde).sum().real();
  g.rhs[1] = state.Phi_n.conjugate().cwiseProduct(model.Psi_tilde).sum().real();
  return g;
}

namespace {

// Re tr{A^H B}, accumulated in extended precision. Near frequencies where the
// diffuse coherence approaches the identity, Gamma_tilde and Psi_tilde are
// nearly parallel and the 2x2 solve cancels most leading digits.
long double trace_inner(const CMatrix& a, const CMatrix& b) {
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Complex x = a.data()[i], y = b.data()[i];
    acc += static_cast<long double>(x.real()) * y.real() +
           static_cast<long double>(x.imag()) * y.imag();
  }
  return acc;
}

}  // namespace

std::array<double, 2> solve_psd(BinEstimatorState& state, const BinSpatialModel& model) {
  const CMatrix& gt = model.Gamma_tilde;
  const CMatrix& pt = model.Psi_tilde;
  if (state.Phi_n.rows() != gt.rows() || state.Phi_n.cols() != gt.cols())
    throw std::invalid_argument("solve_psd: covariance has wrong dimension");
  const long double a00 = trace_inner(gt, gt);
  const long double a01 = trace_inner(gt, pt);
  const long double a11 = trace_inner(pt, pt);
  const long double b0 = trace_inner(gt, state.Phi_n);
  const long double b1 = trace_inner(pt, state.Phi_n);
  const long double det = a00 * a11 - a01 * a01;
  const long double scale = a00 * a11;
  const double floor = state.psd_floor();
  // At DC the blocked diffuse coherence is rounding noise: its diagonal Gram
  // entry is ~1e-31 against M-1, yet its direction is as random as the noise.
  const bool vanished = !(a00 > 1e-20L * a11) || !(a11 > 1e-20L * a00);
  if (!(std::abs(det) >= 1e-12L * scale) || !(scale > 0.0L) || vanished) {
    ++state.singular_count;
    return {state.phi_r, state.phi_v};
  }
  // Cramer's rule on the 2x2 system.
  const auto phi_r = static_cast<double>((b0 * a11 - a01 * b1) / det);
  const auto phi_v = static_cast<double>((a00 * b1 - a01 * b0) / det);
  if (!std::isfinite(phi_r) || !std::isfinite(phi_v)) {
    ++state.singular_count;
    return {state.phi_r, state.phi_v};
  }
  state.phi_r = std::max(phi_r, floor);
  state.phi_v = std::max(phi_v, floor);
  return {state.phi_r, state.phi_v};
}

double target_psd(BinEstimatorState& state, const BinSpatialModel& model) {
  const double num = state.Phi_y.trace().real() - state.phi_r * model.Gamma.trace().real() -
                     state.phi_v * model.Psi.trace().real();
  const double phi = num / model.d.squaredNorm();
  state.phi_target = std::isfinite(phi) ? std::max(phi, state.psd_floor()) : state.psd_floor();
  return state.phi_target;
}

}  // namespace derev
