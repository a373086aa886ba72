// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>

#include "derev/array_model.hpp"
#include "derev/types.hpp"

namespace derev {

struct PsdEstimatorOptions {
  double lambda = 0.95;           // recursive smoothing factor
  double floor_relative = 1e-10;  // psd floor relative to running max of tr(Phi_y)/M
  int warmup_frames = 10;
};

// Smallest floor ever used; keeps cold-start matrices nonzero.
inline constexpr double kAbsolutePsdFloor = 1e-30;

// Joint late-reverberation / noise / target PSD state of one frequency bin.
struct BinEstimatorState {
  CMatrix Phi_n;  // blocked-signal covariance, (M-1) x (M-1)
  CMatrix Phi_y;  // observation covariance, M x M
  double phi_r = 0.0;
  double phi_v = 0.0;
  double phi_target = 0.0;
  double lambda = 0.95;
  double floor_relative = 1e-10;
  double running_max_power = 0.0;  // running max of tr(Phi_y)/M
  std::int64_t frames = 0;
  int warmup_frames = 10;
  std::int64_t singular_count = 0;

  static BinEstimatorState initial(int channels, const PsdEstimatorOptions& opts = {});
  double psd_floor() const;
  bool warming_up() const { return frames <= warmup_frames; }
};

// 2x2 real system of trace inner products.
struct GramSystem {
  std::array<double, 4> matrix{};  // row-major
  std::array<double, 2> rhs{};

  double determinant() const { return matrix[0] * matrix[3] - matrix[1] * matrix[2]; }
};

// n = B^H y
CVector block_signal(const BinSpatialModel& model, const CVector& y);

void update_covariances(BinEstimatorState& state, const CVector& n, const CVector& y);

GramSystem gram_system(const BinEstimatorState& state, const BinSpatialModel& model);

// Solves the Gram system for (phi_r, phi_v), floors both, and stores them in the
// state. A near-singular system keeps the previous estimate and bumps
// state.singular_count. Returns {phi_r, phi_v}.
std::array<double, 2> solve_psd(BinEstimatorState& state, const BinSpatialModel& model);

// phi = tr{Phi_y - phi_r Gamma - phi_v Psi} / (d^H d), floored and stored.
double target_psd(BinEstimatorState& state, const BinSpatialModel& model);

}  // namespace derev
