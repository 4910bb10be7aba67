#pragma once

#include <Eigen/Cholesky>

#include "rmap/problem.hpp"

namespace rmap {

// Linear forward map G(u) = B u with Euclidean parameter space (no mass
// weighting). The Gaussian posterior is available in closed form, which makes
// this the exactness oracle for rMAP/RTO/SN.
class LinearProblem : public InverseProblem {
 public:
  LinearProblem(Matrix b, Vector observations, double sigma, GaussianMeasure prior);

  Eigen::Index obs_dim() const override { return b_.rows(); }
  double noise_sigma() const override { return sigma_; }
  const Vector& observations() const override { return d_; }
  const GaussianMeasure& prior() const override { return prior_; }
  std::unique_ptr<InverseProblem> clone() const override;

  const Matrix& forward_matrix() const { return b_; }

  // Posterior N(mean, cov): mean = u0 + C B'(Lam + B C B')^{-1}(d - B u0),
  // cov = C - C B'(Lam + B C B')^{-1} B C.
  Vector posterior_mean() const;
  Matrix posterior_covariance() const;

  // MAP of J(.; u0, d) through the normal equations L = B'Lam^{-1}B + Cinv.
  Vector map_point(const Vector& u0, const Vector& d) const;
  Vector map_point() const { return map_point(prior_.mean(), d_); }

  // Closed-form rMAP sample for a randomization pair (Lemma 3.2 oracle).
  Vector rmap_sample_closed_form(const Randomization& r) const;

 protected:
  Vector forward_impl(const Vector& u) override { return b_ * u; }
  Vector jvp_impl(const Vector&, const Vector& v) override { return b_ * v; }
  Vector vjp_impl(const Vector&, const Vector& y) override { return b_.transpose() * y; }

 private:
  Matrix b_;
  Vector d_;
  double sigma_;
  GaussianMeasure prior_;
  Eigen::LDLT<Matrix> normal_;  // factorization of L
};

// Deterministic dense test fixtures built from a seeded stream.
Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);
Matrix random_spd_matrix(Eigen::Index n, Rng& rng);

}  // namespace rmap
