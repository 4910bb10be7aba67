#include "rmap/warmstart.hpp"

#include <Eigen/Eigenvalues>
#include <iostream>
#include <stdexcept>
#include <utility>

#include "rmap/optimizer.hpp"

namespace rmap {

WarmStartContext::WarmStartContext(InverseProblem& problem, Vector anchor,
                                   int surrogate_rank)
    : anchor_(std::move(anchor)), rank_(surrogate_rank) {
  if (anchor_.size() != problem.param_dim())
    throw std::invalid_argument("WarmStartContext: anchor dimension mismatch");
  if (rank_ < 0)
    throw std::invalid_argument("WarmStartContext: surrogate rank negative");
  if (rank_ == 0) return;

  const GaussianMeasure& prior = problem.prior();
  const Eigen::Index k = prior.mode_variances().size();
  if (rank_ > k)
    throw std::invalid_argument(
        "WarmStartContext: surrogate rank exceeds retained prior modes");

  // Prior-preconditioned misfit Hessian in KL coordinates:
  //   Phat = S V'M (H_gn - Cinv) V S,  S = diag(sqrt(var_i)).
  // Symmetric PSD, so (I + Phat)^-1 = I - W diag(l/(1+l)) W'.
  const Vector sd = prior.mode_variances().cwiseSqrt();
  Matrix phat(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Vector ej = Vector::Zero(k);
    ej(j) = sd(j);
    Vector xj = prior.from_spectral(ej);
    Vector mis = problem.gn_hessian_action(anchor_, xj) - prior.apply_cinv(xj);
    phat.col(j) = sd.cwiseProduct(prior.to_spectral(mis));
  }
  phat = 0.5 * (phat + phat.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> es(phat);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("WarmStartContext: surrogate eigensolve failed");
  surrogate_modes_.resize(k, rank_);
  surrogate_shrink_.resize(rank_);
  for (int i = 0; i < rank_; ++i) {
    double lam = es.eigenvalues()(k - 1 - i);
    surrogate_modes_.col(i) = es.eigenvectors().col(k - 1 - i);
    surrogate_shrink_(i) = lam / (1.0 + lam);
  }
}

void WarmStartContext::advance(const Randomization& r, const Vector& u_map) {
  prev_ = r;
  prev_u_ = u_map;
  has_prev_ = true;
}

Vector WarmStartContext::apply_inverse_hessian(InverseProblem& problem,
                                               const Vector& rhs,
                                               bool* converged) const {
  if (rank_ > 0) {
    const GaussianMeasure& prior = problem.prior();
    const Vector sd = prior.mode_variances().cwiseSqrt();
    Vector y = sd.cwiseProduct(prior.to_spectral(rhs));
    Vector w = surrogate_modes_.transpose() * y;
    y -= surrogate_modes_ * surrogate_shrink_.cwiseProduct(w);
    if (converged) *converged = true;
    return prior.from_spectral(sd.cwiseProduct(y));
  }

  auto action = [&](const Vector& v) { return problem.gn_hessian_action(anchor_, v); };
  auto dot = [&](const Vector& a, const Vector& b) { return problem.inner(a, b); };
  double target = cg_tol * problem.norm(rhs);
  SteihaugResult cg = steihaug_cg(action, Vector(-rhs), 1e100, target, cg_cap, dot);
  if (converged) *converged = cg.exit == SteihaugResult::Exit::Converged;
  return cg.step;
}

Vector sensitivity_guess(InverseProblem& problem, const WarmStartContext& ctx,
                         const Randomization& next, bool* used_sensitivity) {
  if (next.theta.size() != problem.obs_dim() ||
      next.eps.size() != problem.param_dim())
    throw std::invalid_argument("sensitivity_guess: randomization dimension mismatch");
  if (!ctx.has_previous()) {
    if (used_sensitivity) *used_sensitivity = false;
    return guess_from_eps(problem, next.eps);
  }

  Vector dtilde = next.theta - ctx.previous_randomization().theta;
  Vector utilde = next.eps - ctx.previous_randomization().eps;
  if (dtilde.isZero(0.0) && utilde.isZero(0.0)) {
    if (used_sensitivity) *used_sensitivity = true;
    return ctx.previous_solution();
  }

  const double s2 = problem.noise_sigma() * problem.noise_sigma();
  Vector rhs = problem.apply_jacobian_adjoint(ctx.anchor(), Vector(dtilde / s2)) +
               problem.prior().apply_cinv(utilde);
  bool ok = false;
  Vector t = ctx.apply_inverse_hessian(problem, rhs, &ok);
  if (!ok) {
    std::cerr << "warmstart: anchor Hessian CG missed tolerance, "
                 "falling back to the prior-shift start\n";
    if (used_sensitivity) *used_sensitivity = false;
    return guess_from_eps(problem, next.eps);
  }
  if (used_sensitivity) *used_sensitivity = true;
  return ctx.previous_solution() + t;
}

Vector random_guess(const InverseProblem& problem, Rng& rng) {
  return problem.prior().sample(rng);
}

Vector guess_from_eps(const InverseProblem& problem, const Vector& eps) {
  if (eps.size() != problem.param_dim())
    throw std::invalid_argument("guess_from_eps: eps dimension mismatch");
  return problem.prior().mean() + eps;
}

}  // namespace rmap
