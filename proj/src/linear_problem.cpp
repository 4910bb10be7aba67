#include "rmap/linear_problem.hpp"

namespace rmap {

LinearProblem::LinearProblem(Matrix b, Vector observations, double sigma,
                             GaussianMeasure prior)
    : b_(std::move(b)),
      d_(std::move(observations)),
      sigma_(sigma),
      prior_(std::move(prior)) {
  if (sigma_ <= 0) throw std::invalid_argument("LinearProblem: sigma must be positive");
  if (d_.size() != b_.rows() || prior_.dim() != b_.cols())
    throw std::invalid_argument("LinearProblem: shape mismatch");
  if (prior_.has_mass())
    throw std::invalid_argument("LinearProblem: Euclidean prior required");
  Matrix l = b_.transpose() * b_ / (sigma_ * sigma_);
  Matrix cinv(prior_.dim(), prior_.dim());
  for (Eigen::Index j = 0; j < prior_.dim(); ++j)
    cinv.col(j) = prior_.apply_cinv(Vector::Unit(prior_.dim(), j));
  normal_.compute(l + cinv);
}

std::unique_ptr<InverseProblem> LinearProblem::clone() const {
  auto copy = std::make_unique<LinearProblem>(*this);
  copy->counters() = Counters{};
  copy->invalidate_cache();
  return copy;
}

Vector LinearProblem::posterior_mean() const {
  Matrix c = prior_.dense_covariance();
  Matrix gram = b_ * c * b_.transpose() +
                sigma_ * sigma_ * Matrix::Identity(b_.rows(), b_.rows());
  return prior_.mean() +
         c * b_.transpose() * gram.ldlt().solve(d_ - b_ * prior_.mean());
}

Matrix LinearProblem::posterior_covariance() const {
  Matrix c = prior_.dense_covariance();
  Matrix gram = b_ * c * b_.transpose() +
                sigma_ * sigma_ * Matrix::Identity(b_.rows(), b_.rows());
  return c - c * b_.transpose() * gram.ldlt().solve(b_ * c);
}

Vector LinearProblem::map_point(const Vector& u0, const Vector& d) const {
  Vector rhs = b_.transpose() * d / (sigma_ * sigma_) + prior_.apply_cinv(u0);
  return normal_.solve(rhs);
}

Vector LinearProblem::rmap_sample_closed_form(const Randomization& r) const {
  return map_point(prior_.mean() + r.eps, d_ + r.theta);
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

Matrix random_spd_matrix(Eigen::Index n, Rng& rng) {
  Matrix a = random_matrix(n, n, rng);
  return a * a.transpose() / static_cast<double>(n) +
         Matrix::Identity(n, n) * 0.5;
}

}  // namespace rmap
