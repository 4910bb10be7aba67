#pragma once

#include <memory>

#include <Eigen/SparseCholesky>

#include "rmap/mesh.hpp"
#include "rmap/rng.hpp"
#include "rmap/types.hpp"

namespace rmap {

// Gaussian measure N(mean, C) on the discretized parameter space. The space
// carries the mass-weighted inner product <a,b> = a' M b (M = identity for
// the dense construction), and C is self-adjoint positive definite in it.
//
// All covariance applications go through the stored spectral factor
// C = V diag(var_i) V' M with V'MV = I, so apply_c / apply_cinv /
// apply_csqrt commute exactly and C^{1/2}C^{1/2} = C to roundoff.
class GaussianMeasure {
 public:
  // Euclidean-space measure from an explicit SPD covariance matrix.
  static GaussianMeasure from_dense(Vector mean, const Matrix& covariance);

  // Matrix transfer discretization of N(mean, alpha^{-1} (I - Lap)^{-s}) with
  // Neumann boundary: generalized eigensolve of the pencil (K + M, M) gives
  // A = M^{-1}K + I = V diag(sigma_i) V^{-1} and mode variances
  // alpha^{-1} sigma_i^{-s}. Requires s > dim/2 for a trace-class limit.
  static GaussianMeasure matrix_transfer(const Mesh& mesh, Vector mean,
                                         double alpha, double s,
                                         bool lumped_mass = false,
                                         int truncate = -1);

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  double alpha() const { return alpha_; }
  double exponent() const { return s_; }
  int retained_modes() const { return retained_; }

  double inner(const Vector& a, const Vector& b) const;
  double norm(const Vector& a) const;
  Vector apply_mass(const Vector& v) const;
  Vector apply_mass_inverse(const Vector& v) const;
  bool has_mass() const { return mass_.nonZeros() > 0; }
  const SpMat& mass() const { return mass_; }

  Vector apply_c(const Vector& v) const;
  Vector apply_cinv(const Vector& v) const;  // pseudo-inverse under truncation
  Vector apply_csqrt(const Vector& v) const;
  Vector apply_cinvsqrt(const Vector& v) const;

  Vector sample_zero_mean(Rng& rng) const;  // eps ~ N(0, C)
  Vector sample(Rng& rng) const { return mean_ + sample_zero_mean(rng); }
  // Deterministic draw from given standard-normal coefficients (tests).
  Vector from_standard_normal(const Vector& a) const;

  Matrix dense_covariance() const;  // E[(x-mean)(x-mean)'], Euclidean

  // Spectral access: KL modes (columns, M-orthonormal, variance-descending)
  // and per-mode variances.
  const Matrix& kl_modes() const { return modes_; }
  const Vector& mode_variances() const { return mode_var_; }
  const Vector& operator_eigenvalues() const { return op_eig_; }
  Vector to_spectral(const Vector& x) const;    // b = V' M x
  Vector from_spectral(const Vector& b) const;  // x = V b

 private:
  GaussianMeasure() = default;
  Vector spectral_scale(const Vector& v, const Vector& diag) const;

  Vector mean_;
  Matrix modes_;     // V
  Vector mode_var_;  // var_i, descending
  Vector op_eig_;    // sigma_i of the pencil (empty for dense construction)
  SpMat mass_;       // empty => identity
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> mass_solver_;
  double alpha_ = 1.0;
  double s_ = 0.0;
  int retained_ = 0;
};

}  // namespace rmap
