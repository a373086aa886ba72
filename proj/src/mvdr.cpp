// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/mvdr.hpp"

#include <cmath>
#include <stdexcept>

namespace derev {

MvdrResult mvdr_solve(const CMatrix& interference, const CVector& d, double loading) {
  if (interference.rows() != d.size() || interference.cols() != d.size())
    throw std::invalid_argument("mvdr: covariance / steering dimension mismatch");
  const Eigen::Index m = d.size();
  if (!interference.allFinite()) return {delay_and_sum(d), true};
  CMatrix phi = 0.5 * (interference + interference.adjoint());
  const double load = loading * phi.trace().real() / static_cast<double>(m);
  if (load > 0.0) phi.diagonal().array() += load;

  Eigen::LDLT<CMatrix> ldlt(phi);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const CVector x = ldlt.solve(d);
    const Complex denom = d.dot(x);  // d^H x, real and positive in exact arithmetic
    if (x.allFinite() && std::isfinite(denom.real()) && denom.real() > 0.0 &&
        std::abs(denom) > 1e-300) {
      // Dividing by the complex d^H x keeps w^H d == 1 to rounding.
      return {x / denom, false};
    }
  }
  return {delay_and_sum(d), true};
}

MvdrResult mvdr_weights(const BinSpatialModel& model, double phi_r, double phi_v,
                        double loading) {
  const CMatrix phi_i = phi_r * model.Gamma + phi_v * model.Psi;
  return mvdr_solve(phi_i, model.d, loading);
}

BeamformerState BeamformerState::initial(const CVector& d, double loading) {
  BeamformerState s;
  s.w_b = delay_and_sum(d);
  s.w_b_prev = s.w_b;
  s.diagonal_loading = loading;
  return s;
}

const CVector& BeamformerState::update(const BinSpatialModel& model, double phi_r,
                                       double phi_v) {
  MvdrResult r = mvdr_weights(model, phi_r, phi_v, diagonal_loading);
  if (r.fallback) ++fallback_count;
  w_b_prev = std::move(w_b);
  w_b = std::move(r.w);
  return w_b;
}

}  // namespace derev
