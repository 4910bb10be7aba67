#pragma once

#include <vector>

#include "rmap/problem.hpp"

namespace rmap {

// The two scalar benchmark posteriors:
//   J1(u) = 1/2 (u - 0.8)^2 + (u^2 - 1)^2 / (2 * 0.2^2)   (bimodal)
//   J2(u) = 1/2 (u - 1)^2   + (u^3 - 0.8)^2 / (2 * 0.2^2) (one true mode; the
//           randomized objective develops a spurious one near u ~ 0)
// Unit prior variance, noise sigma = 0.2 in both.
enum class AnalyticKind { J1, J2 };

class AnalyticalPosterior : public InverseProblem {
 public:
  explicit AnalyticalPosterior(AnalyticKind kind);

  AnalyticKind kind() const { return kind_; }
  double g(double u) const;
  double dg(double u) const;
  double d2g(double u) const;
  double prior_mean_value() const { return prior_.mean()[0]; }
  double data_value() const { return d_[0]; }

  // Counter-free scalar evaluations of the (randomized) negative log
  // posterior and its u-derivatives.
  double jr(double u, double theta = 0, double eps = 0) const;
  double djr(double u, double theta = 0, double eps = 0) const;
  double d2jr(double u, double theta = 0, double eps = 0) const;

  // Normalized posterior density exp(-J)/Z on the fixed bracket; Z by
  // adaptive quadrature at construction.
  double exact_density(double u) const;
  double log_normalization() const { return log_z_; }
  double exact_mass(double a, double b) const;  // integral of exact_density

  // Posterior modes (minima of J), ascending.
  const std::vector<double>& modes() const { return modes_; }
  int nearest_mode(double u) const;

  // Global minimizer of J^r(.; theta, eps): multi-start safeguarded Newton on
  // the stationarity equation, winner by objective value. Throws if no start
  // converges to a local minimum.
  double minimize_randomized(double theta, double eps, double tol = 1e-12) const;

  static constexpr double bracket_lo = -10.0;
  static constexpr double bracket_hi = 10.0;

  // InverseProblem interface.
  Eigen::Index obs_dim() const override { return 1; }
  double noise_sigma() const override { return 0.2; }
  const Vector& observations() const override { return d_; }
  const GaussianMeasure& prior() const override { return prior_; }
  std::unique_ptr<InverseProblem> clone() const override;

 protected:
  Vector forward_impl(const Vector& u) override;
  Vector jvp_impl(const Vector& u, const Vector& v) override;
  Vector vjp_impl(const Vector& u, const Vector& y) override;
  Vector curvature_impl(const Vector& u, const Vector& y, const Vector& v) override;

 private:
  std::vector<double> critical_starts(double theta, double eps) const;
  bool polish_to_minimum(double start, double theta, double eps, double tol,
                         double* out) const;

  AnalyticKind kind_;
  Vector d_;
  GaussianMeasure prior_;
  double log_z_ = 0;
  std::vector<double> modes_;
};

// Tensor Gauss-Hermite expectation of the optimizer operator S(theta, eps)
// over theta ~ N(0, sigma^2), eps ~ N(0, 1); every node solved globally to
// tolerance 1e-10. Throws naming the node if a solve fails.
double quadrature_expectation_of_optimizer(const AnalyticalPosterior& problem, int order);

}  // namespace rmap
