// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>

#include "derev/array_model.hpp"
#include "derev/types.hpp"

namespace derev {

// Relative diagonal loading. Estimated noise PSDs collapse towards zero in
// reverberation-dominated frames, where phi_r Gamma alone is close to rank one
// at low frequencies; smaller values then yield superdirective weights.
inline constexpr double kDefaultDiagonalLoading = 1e-2;

struct MvdrResult {
  CVector w;
  bool fallback = false;  // delay-and-sum used because the solve failed
};

// w = Phi_i^{-1} d / (d^H Phi_i^{-1} d) for a given interference covariance.
// Phi_i is loaded by loading * tr(Phi_i)/M on the diagonal before an LDL^T solve.
MvdrResult mvdr_solve(const CMatrix& interference, const CVector& d, double loading);

// Interference covariance phi_r Gamma + phi_v Psi from the bin model.
MvdrResult mvdr_weights(const BinSpatialModel& model, double phi_r, double phi_v,
                        double loading = kDefaultDiagonalLoading);

inline CVector delay_and_sum(const CVector& d) { return d / d.squaredNorm(); }

// x_b = w^H y
inline Complex beamform(const CVector& w, const CVector& y) { return w.dot(y); }

struct BeamformerState {
  CVector w_b;
  CVector w_b_prev;
  double diagonal_loading = kDefaultDiagonalLoading;
  std::int64_t fallback_count = 0;

  // Both weight vectors start as delay-and-sum.
  static BeamformerState initial(const CVector& d, double loading);
  // Computes this frame's weights; the previous ones move to w_b_prev.
  const CVector& update(const BinSpatialModel& model, double phi_r, double phi_v);
};

}  // namespace derev
