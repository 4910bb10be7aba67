#pragma once

#include <memory>
#include <utility>

#include "rmap/prior.hpp"
#include "rmap/rng.hpp"
#include "rmap/types.hpp"

namespace rmap {

// Perturbation pair of one rMAP draw: theta ~ N(0, sigma^2 I) on the data,
// eps ~ N(0, C) on the prior mean.
struct Randomization {
  Vector theta;
  Vector eps;
};

// Bayesian inverse problem d = G(u) + noise with Gaussian prior N(u0, C).
//
//   J(u; u0, d)  = 1/(2 sigma^2) |d - G(u)|^2 + 1/2 <u - u0, Cinv (u - u0)>
//   J^r          = J(u; u0 + eps, d + theta)
//
// The parameter space carries the prior's mass-weighted inner product, and
// gradients/Hessian actions are returned as representers in that space.
// Derivative bookkeeping: objective = 1 forward; gradient = 1 forward (if the
// state at u is not cached) + 1 adjoint; Hessian actions = 1 incremental
// forward + 1 incremental adjoint given cached state/adjoint at u.
class InverseProblem {
 public:
  virtual ~InverseProblem() = default;

  Eigen::Index param_dim() const { return prior().dim(); }
  virtual Eigen::Index obs_dim() const = 0;
  virtual double noise_sigma() const = 0;
  virtual const Vector& observations() const = 0;
  virtual const GaussianMeasure& prior() const = 0;

  // Deep copy with counters reset; workers own clones (the solve cache makes
  // an instance single-threaded).
  virtual std::unique_ptr<InverseProblem> clone() const = 0;

  double inner(const Vector& a, const Vector& b) const { return prior().inner(a, b); }
  double norm(const Vector& a) const { return prior().norm(a); }

  Randomization draw_randomization(Rng& rng) const;
  Randomization zero_randomization() const;

  double objective(const Vector& u, const Vector& u0, const Vector& d);
  double objective(const Vector& u) { return objective(u, prior().mean(), observations()); }
  double randomized_objective(const Vector& u, const Randomization& r);

  // Forward map value G(u); one forward solve when u is not the cached state.
  const Vector& forward(const Vector& u) { return forward_cached(u); }

  virtual Vector gradient(const Vector& u, const Vector& u0, const Vector& d);
  Vector gradient(const Vector& u) { return gradient(u, prior().mean(), observations()); }
  Vector gradient(const Vector& u, const Randomization& r);

  // Full Hessian of J at (u, u0, d) applied to v.
  virtual Vector hessian_action(const Vector& u, const Vector& u0, const Vector& d,
                                const Vector& v);
  Vector hessian_action(const Vector& u, const Vector& v) {
    return hessian_action(u, prior().mean(), observations(), v);
  }
  Vector hessian_action(const Vector& u, const Randomization& r, const Vector& v);

  // Gauss-Newton Hessian action; SPD and independent of u0, d.
  virtual Vector gn_hessian_action(const Vector& u, const Vector& v);

  // Raw linearization access (RTO factor, Jacobian determinants, warm-start
  // right-hand sides). apply_jacobian counts an incremental forward solve,
  // apply_jacobian_adjoint an adjoint solve.
  Vector apply_jacobian(const Vector& u, const Vector& v);
  Vector apply_jacobian_adjoint(const Vector& u, const Vector& y);

  Counters& counters() { return counters_; }
  const Counters& counters() const { return counters_; }

  std::pair<Vector, Vector> randomized_args(const Randomization& r) const;

 protected:
  // Model primitives; no counter side effects.
  virtual Vector forward_impl(const Vector& u) = 0;
  virtual Vector jvp_impl(const Vector& u, const Vector& v) = 0;  // dG(u) v
  virtual Vector vjp_impl(const Vector& u, const Vector& y) = 0;  // dG(u)* y
  // (d/du dG(u)* y) v at fixed y; zero for linear forward maps.
  virtual Vector curvature_impl(const Vector& u, const Vector& y, const Vector& v);

  // Cached forward state at the latest u (+1 forward on a miss).
  const Vector& forward_cached(const Vector& u);
  void invalidate_cache();

  Counters counters_;

 private:
  double misfit_plus_prior(const Vector& gu, const Vector& u, const Vector& u0,
                           const Vector& d) const;
  Vector cache_u_;
  Vector cache_g_;
  bool cache_valid_ = false;
};

}  // namespace rmap
