#include "rmap/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "rmap/fem.hpp"

namespace rmap {

GaussianMeasure GaussianMeasure::from_dense(Vector mean, const Matrix& covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size())
    throw std::invalid_argument("GaussianMeasure: covariance/mean shape mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("GaussianMeasure: covariance eigensolve failed");
  if (eig.eigenvalues().minCoeff() <= 0)
    throw std::invalid_argument("GaussianMeasure: covariance not positive definite");

  GaussianMeasure g;
  g.mean_ = std::move(mean);
  const Eigen::Index n = g.mean_.size();
  // reverse to variance-descending order
  g.mode_var_ = eig.eigenvalues().reverse();
  g.modes_ = eig.eigenvectors().rowwise().reverse();
  g.retained_ = static_cast<int>(n);
  return g;
}

GaussianMeasure GaussianMeasure::matrix_transfer(const Mesh& mesh, Vector mean,
                                                 double alpha, double s,
                                                 bool lumped_mass, int truncate) {
  const Eigen::Index n = mesh.num_nodes();
  if (mean.size() != n) throw std::invalid_argument("matrix_transfer: mean/mesh mismatch");
  if (alpha <= 0) throw std::invalid_argument("matrix_transfer: alpha must be positive");
  if (s <= 0.5 * mesh.dim)
    throw std::invalid_argument("matrix_transfer: need s > dim/2");

  SpMat mass = lumped_mass ? assemble_lumped_mass(mesh) : assemble_mass(mesh);
  SpMat stiffness = assemble_stiffness(mesh);

  auto solver = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
  solver->compute(mass);
  if (solver->info() != Eigen::Success || solver->vectorD().minCoeff() <= 0)
    throw std::runtime_error("matrix_transfer: mass matrix is not SPD");

  // Pencil (K + M) v = sigma M v; eigenvectors come back M-orthonormal.
  Matrix a_dense = Matrix(stiffness) + Matrix(mass);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(a_dense, Matrix(mass));
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("matrix_transfer: generalized eigensolve failed");
  if (eig.eigenvalues().minCoeff() <= 0)
    throw std::runtime_error("matrix_transfer: operator pencil not positive definite");

  GaussianMeasure g;
  g.mean_ = std::move(mean);
  g.op_eig_ = eig.eigenvalues();  // ascending => variances descending
  g.modes_ = eig.eigenvectors();
  g.mode_var_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    g.mode_var_[i] = std::pow(g.op_eig_[i], -s) / alpha;
  g.mass_ = std::move(mass);
  g.mass_solver_ = std::move(solver);
  g.alpha_ = alpha;
  g.s_ = s;
  g.retained_ = (truncate > 0 && truncate < n) ? truncate : static_cast<int>(n);
  return g;
}

double GaussianMeasure::inner(const Vector& a, const Vector& b) const {
  return has_mass() ? a.dot(mass_ * b) : a.dot(b);
}

double GaussianMeasure::norm(const Vector& a) const { return std::sqrt(inner(a, a)); }

Vector GaussianMeasure::apply_mass(const Vector& v) const {
  return has_mass() ? mass_ * v : v;
}

Vector GaussianMeasure::apply_mass_inverse(const Vector& v) const {
  return has_mass() ? Vector(mass_solver_->solve(v)) : v;
}

Vector GaussianMeasure::to_spectral(const Vector& x) const {
  return modes_.transpose() * apply_mass(x);
}

Vector GaussianMeasure::from_spectral(const Vector& b) const { return modes_ * b; }

Vector GaussianMeasure::spectral_scale(const Vector& v, const Vector& diag) const {
  return from_spectral(diag.cwiseProduct(to_spectral(v)));
}

Vector GaussianMeasure::apply_c(const Vector& v) const {
  Vector d = mode_var_;
  d.tail(dim() - retained_).setZero();
  return spectral_scale(v, d);
}

Vector GaussianMeasure::apply_cinv(const Vector& v) const {
  Vector d = Vector::Zero(dim());
  d.head(retained_) = mode_var_.head(retained_).cwiseInverse();
  return spectral_scale(v, d);
}

Vector GaussianMeasure::apply_csqrt(const Vector& v) const {
  Vector d = mode_var_.cwiseSqrt();
  d.tail(dim() - retained_).setZero();
  return spectral_scale(v, d);
}

Vector GaussianMeasure::apply_cinvsqrt(const Vector& v) const {
  Vector d = Vector::Zero(dim());
  d.head(retained_) = mode_var_.head(retained_).cwiseSqrt().cwiseInverse();
  return spectral_scale(v, d);
}

Vector GaussianMeasure::sample_zero_mean(Rng& rng) const {
  return from_standard_normal(rng.normal_vector(dim()));
}

Vector GaussianMeasure::from_standard_normal(const Vector& a) const {
  if (a.size() != dim()) throw std::invalid_argument("from_standard_normal: size mismatch");
  Vector scaled = mode_var_.cwiseSqrt().cwiseProduct(a);
  scaled.tail(dim() - retained_).setZero();
  return from_spectral(scaled);
}

Matrix GaussianMeasure::dense_covariance() const {
  Vector d = mode_var_;
  d.tail(dim() - retained_).setZero();
  return modes_ * d.asDiagonal() * modes_.transpose();
}

}  // namespace rmap
