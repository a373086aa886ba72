// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <vector>

#include "derev/stft.hpp"
#include "derev/types.hpp"

namespace derev {

using Position = std::array<double, 3>;

struct ArrayGeometry {
  std::vector<Position> mic_positions;
  int reference_index = 0;
  double speed_of_sound = 343.0;

  int size() const { return static_cast<int>(mic_positions.size()); }
  double distance(int i, int j) const;
  void validate() const;

  // Uniform linear array along the x axis, first mic at the origin.
  static ArrayGeometry uniform_linear(int mics, double spacing);
};

// Source direction. Azimuth is measured in the xy-plane from the +x axis,
// elevation from the xy-plane. For an array along x, azimuth pi/2 is broadside.
struct Direction {
  double azimuth = 1.5707963267948966;
  double elevation = 0.0;
};

// Relative delay (seconds) of mic m with respect to the reference mic for a
// far-field plane wave arriving from `doa`. Positive means later arrival.
std::vector<double> relative_delays(const ArrayGeometry& geom, const Direction& doa);

// Per-bin spatial quantities. Immutable once built.
struct BinSpatialModel {
  double frequency = 0.0;
  CVector d;            // steering vector, d[reference] == 1
  CMatrix Gamma;        // diffuse coherence
  CMatrix Psi;          // noise coherence
  CMatrix B;            // M x (M-1) orthonormal blocking matrix, B^H d == 0
  CMatrix Gamma_tilde;  // B^H Gamma B
  CMatrix Psi_tilde;    // B^H Psi B
  // Trace inner products of {Gamma_tilde, Psi_tilde}; row-major 2x2.
  std::array<double, 4> gram{};
};

CVector steering_vector(const ArrayGeometry& geom, const Direction& doa, double frequency);
CMatrix diffuse_coherence(const ArrayGeometry& geom, double frequency);
// Orthonormal basis of the orthogonal complement of d, via a Householder
// reflection that maps d onto the first coordinate axis.
CMatrix blocking_matrix(const CVector& d);

BinSpatialModel build_bin_model(const ArrayGeometry& geom, const Direction& doa,
                                double frequency);
std::vector<BinSpatialModel> build_bin_models(const ArrayGeometry& geom, const Direction& doa,
                                              const StftConfig& cfg);

// Symmetric positive semidefinite square root after clipping negative
// eigenvalues of a real symmetric matrix.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym);

double sinc(double x);

}  // namespace derev
