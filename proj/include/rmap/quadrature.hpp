#pragma once

#include <functional>
#include <utility>

#include <Eigen/Core>

namespace rmap {

struct GaussHermiteRule {
  Eigen::VectorXd nodes;    // roots of H_n, ascending
  Eigen::VectorXd weights;  // sum to sqrt(pi)
};

// Physicists' Gauss-Hermite rule (weight exp(-x^2)) by Golub-Welsch.
GaussHermiteRule gauss_hermite(int order);

struct GaussLegendreRule {
  Eigen::VectorXd nodes;    // in (-1, 1), ascending
  Eigen::VectorXd weights;  // sum to 2
};

GaussLegendreRule gauss_legendre(int order);

// Adaptive Simpson on [a, b] to absolute tolerance tol.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10);

}  // namespace rmap
