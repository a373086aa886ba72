// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "derev/types.hpp"

namespace derev {

// Delay line of past multichannel observations feeding the linear predictor.
// Holds y(l-1) ... y(l-L+1); stacked() returns
// t(l) = [y(l-D)^T, ..., y(l-L+1)^T]^T of dimension M (L - D).
class TapBuffer {
 public:
  TapBuffer() = default;
  TapBuffer(int channels, int delay, int order);

  int channels() const { return channels_; }
  int delay() const { return delay_; }
  int order() const { return order_; }
  int dimension() const { return channels_ * (order_ - delay_); }

  // Appends y(l); call after the frame has been processed.
  void push(const CVector& y);
  CVector stacked() const;
  void stacked(CVector& out) const;
  // Frame y(l - lag), lag in [1, L-1]; zero before enough frames were pushed.
  Eigen::Map<const CVector> past(int lag) const;

 private:
  int channels_ = 0;
  int delay_ = 2;
  int order_ = 10;
  int head_ = 0;  // slot that receives the next push
  std::vector<Complex> ring_;  // (L-1) frames of M channels
};

enum class ProcessNoiseModel { kStationary, kFixed };

struct KalmanOptions {
  double transition = 0.999;  // A(l) = a I
  ProcessNoiseModel process_noise = ProcessNoiseModel::kStationary;
  double process_noise_variance = 0.0;  // sigma_w^2 for kFixed
  double initial_error_variance = 1e-2;
  double innovation_floor_relative = 1e-12;
};

inline constexpr double kAbsoluteInnovationFloor = 1e-30;

struct BinKalmanState {
  CVector w_hat;   // a-posteriori prediction weights, dimension N
  CMatrix Phi_e;   // a-posteriori error covariance, N x N
  double a = 0.999;
  ProcessNoiseModel process_noise = ProcessNoiseModel::kStationary;
  double process_noise_variance = 0.0;
  double innovation_floor_relative = 1e-12;
  double running_max_power = 0.0;  // running max of |x_b|^2
  std::int64_t skipped_count = 0;

  static BinKalmanState initial(int dimension, const KalmanOptions& opts = {});
  int dimension() const { return static_cast<int>(w_hat.size()); }
  double innovation_floor() const;
};

struct KalmanPrior {
  CVector w;    // a w_hat
  CMatrix Phi;  // a^2 Phi_e + Phi_v
};

struct Innovation {
  Complex s;       // enhanced sample, s = x_b - w_prior^H t
  CVector gain;    // k = Phi_prior t / phi_s
  CVector phi_t;   // Phi_prior t
  double phi_s = 0.0;
  bool valid = true;
};

// Time update.
KalmanPrior predict(const BinKalmanState& state);
// Innovation, its PSD and the Kalman gain.
Innovation innovate(BinKalmanState& state, const KalmanPrior& prior, const CVector& t,
                    Complex x_b, double phi_xc);
// Measurement update; symmetrizes Phi_e and clips negative diagonal entries.
void correct(BinKalmanState& state, const KalmanPrior& prior, const Innovation& inn,
             const CVector& t);

struct KalmanFrameResult {
  Complex s;
  Complex r;             // predicted late reverberation w_prior^H t
  double gain_norm = 0.0;
  bool skipped = false;  // non-finite inputs: state held, s = x_b
  CVector w_used;        // weights applied to t for this frame's output
};

// predict -> innovate -> correct for one frame.
KalmanFrameResult kalman_process_frame(BinKalmanState& state, const CVector& t, Complex x_b,
                                       double phi_xc);

}  // namespace derev
