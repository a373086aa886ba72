// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/array_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace derev {

double ArrayGeometry::distance(int i, int j) const {
  const Position& a = mic_positions[i];
  const Position& b = mic_positions[j];
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

void ArrayGeometry::validate() const {
  if (size() < 2) throw std::invalid_argument("array geometry: need at least 2 microphones");
  if (reference_index < 0 || reference_index >= size())
    throw std::invalid_argument("array geometry: reference_index out of range");
  if (!(speed_of_sound > 0.0))
    throw std::invalid_argument("array geometry: speed_of_sound must be > 0");
  for (int i = 0; i < size(); ++i)
    for (int j = i + 1; j < size(); ++j)
      if (distance(i, j) <= 0.0)
        throw std::invalid_argument("array geometry: microphone positions must be distinct");
}

ArrayGeometry ArrayGeometry::uniform_linear(int mics, double spacing) {
  ArrayGeometry g;
  for (int m = 0; m < mics; ++m) g.mic_positions.push_back({m * spacing, 0.0, 0.0});
  return g;
}

std::vector<double> relative_delays(const ArrayGeometry& geom, const Direction& doa) {
  const double ce = std::cos(doa.elevation);
  const Position u{ce * std::cos(doa.azimuth), ce * std::sin(doa.azimuth),
                   std::sin(doa.elevation)};
  const Position& ref = geom.mic_positions[geom.reference_index];
  std::vector<double> tau(geom.mic_positions.size());
  for (std::size_t m = 0; m < tau.size(); ++m) {
    const Position& p = geom.mic_positions[m];
    const double proj = (p[0] - ref[0]) * u[0] + (p[1] - ref[1]) * u[1] + (p[2] - ref[2]) * u[2];
    // A mic displaced towards the source hears the wavefront earlier.
    tau[m] = -proj / geom.speed_of_sound;
  }
  return tau;
}

CVector steering_vector(const ArrayGeometry& geom, const Direction& doa, double frequency) {
  geom.validate();
  const std::vector<double> tau = relative_delays(geom, doa);
  CVector d(geom.size());
  for (int m = 0; m < geom.size(); ++m) {
    const double phase = -2.0 * std::numbers::pi * frequency * tau[m];
    d[m] = std::polar(1.0, phase);
  }
  d[geom.reference_index] = Complex(1.0, 0.0);
  return d;
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

CMatrix diffuse_coherence(const ArrayGeometry& geom, double frequency) {
  geom.validate();
  const int m = geom.size();
  CMatrix gamma(m, m);
  for (int i = 0; i < m; ++i) {
    gamma(i, i) = 1.0;
    for (int j = i + 1; j < m; ++j) {
      const double v =
          sinc(2.0 * std::numbers::pi * frequency * geom.distance(i, j) / geom.speed_of_sound);
      gamma(i, j) = gamma(j, i) = v;
    }
  }
  return gamma;
}

CMatrix blocking_matrix(const CVector& d) {
  const Eigen::Index m = d.size();
  const double norm = d.norm();
  if (m < 2) throw std::invalid_argument("blocking_matrix: need at least 2 channels");
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw std::invalid_argument("blocking_matrix: steering vector must be nonzero");
  const CVector u = d / norm;
  // v = u + e^{j arg u0} e_0 avoids cancellation; H = I - 2 v v^H / (v^H v) is
  // unitary and Hermitian with H u proportional to e_0, so u spans column 0 of
  // H and columns 1..M-1 span its orthogonal complement.
  const double mag0 = std::abs(u[0]);
  const Complex phase = mag0 > 0.0 ? u[0] / mag0 : Complex(1.0, 0.0);
  CVector v = u;
  v[0] += phase;
  const double vv = v.squaredNorm();
  CMatrix h = CMatrix::Identity(m, m) - (2.0 / vv) * (v * v.adjoint());
  return h.rightCols(m - 1);
}

BinSpatialModel build_bin_model(const ArrayGeometry& geom, const Direction& doa,
                                double frequency) {
  BinSpatialModel model;
  model.frequency = frequency;
  model.d = steering_vector(geom, doa, frequency);
  model.Gamma = diffuse_coherence(geom, frequency);
  model.Psi = CMatrix::Identity(geom.size(), geom.size());
  model.B = blocking_matrix(model.d);
  model.Gamma_tilde = model.B.adjoint() * model.Gamma * model.B;
  model.Psi_tilde = model.B.adjoint() * model.Psi * model.B;
  // tr{A^H B} is the Frobenius inner product; Hermitian arguments make it real.
  const auto inner = [](const CMatrix& a, const CMatrix& b) {
    return (a.adjoint() * b).trace().real();
  };
  const double gg = inner(model.Gamma_tilde, model.Gamma_tilde);
  const double gp = inner(model.Gamma_tilde, model.Psi_tilde);
  const double pg = inner(model.Psi_tilde, model.Gamma_tilde);
  const double pp = inner(model.Psi_tilde, model.Psi_tilde);
  model.gram = {gg, gp, pg, pp};
  return model;
}

std::vector<BinSpatialModel> build_bin_models(const ArrayGeometry& geom, const Direction& doa,
                                              const StftConfig& cfg) {
  cfg.validate();
  geom.validate();
  std::vector<BinSpatialModel> models;
  models.reserve(static_cast<std::size_t>(cfg.bins()));
  for (int k = 0; k < cfg.bins(); ++k)
    models.push_back(build_bin_model(geom, doa, cfg.bin_frequency(k)));
  return models;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym) {
  const Eigen::MatrixXd s = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace derev
