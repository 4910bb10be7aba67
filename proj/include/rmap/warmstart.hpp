#pragma once

#include "rmap/problem.hpp"
#include "rmap/rng.hpp"
#include "rmap/types.hpp"

namespace rmap {

// Sensitivity warm starts for consecutive randomized MAP solves. The next
// minimizer is predicted from the previous one by first-order expansion of
// the optimality system around a fixed anchor point:
//
//   H(ua) T = dG(ua)* Lam^-1 (theta' - theta) + Cinv (eps' - eps)
//   guess   = u_prev + T
//
// with H the Gauss-Newton Hessian at the anchor, so the system is SPD and
// independent of the randomization. The anchor defaults to the unrandomized
// MAP. The solve runs CG in the mass-weighted inner product; an optional
// rank-r spectral surrogate of the prior-preconditioned misfit Hessian
// replaces CG with a Woodbury-style closed form built once at setup.
//
// The anchor and surrogate are immutable after construction; workers keep
// their own copies for the (theta_i, eps_i, u_i) bookkeeping.
class WarmStartContext {
 public:
  // surrogate_rank 0 keeps the CG path; r in [1, retained modes] builds the
  // surrogate with one Gauss-Newton action per retained prior mode.
  WarmStartContext(InverseProblem& problem, Vector anchor, int surrogate_rank = 0);

  const Vector& anchor() const { return anchor_; }
  bool has_surrogate() const { return rank_ > 0; }
  bool has_previous() const { return has_prev_; }
  const Randomization& previous_randomization() const { return prev_; }
  const Vector& previous_solution() const { return prev_u_; }

  // Records the accepted pair (theta_i, eps_i) -> u_i for the next guess.
  void advance(const Randomization& r, const Vector& u_map);

  // Solves H(anchor) x = rhs; converged reports whether CG met its target
  // (the surrogate path always does).
  Vector apply_inverse_hessian(InverseProblem& problem, const Vector& rhs,
                               bool* converged = nullptr) const;

  double cg_tol = 1e-6;
  int cg_cap = 200;

 private:
  Vector anchor_;
  int rank_ = 0;
  Matrix surrogate_modes_;   // spectral coordinates, orthonormal columns
  Vector surrogate_shrink_;  // lambda_i / (1 + lambda_i)
  Randomization prev_;
  Vector prev_u_;
  bool has_prev_ = false;
};

// u_prev + T. Falls back to u0 + eps when there is no previous sample yet,
// or (with a stderr warning) when CG misses its tolerance within the cap.
// used_sensitivity reports which branch produced the guess.
Vector sensitivity_guess(InverseProblem& problem, const WarmStartContext& ctx,
                         const Randomization& next,
                         bool* used_sensitivity = nullptr);

// Start drawn fresh from the prior.
Vector random_guess(const InverseProblem& problem, Rng& rng);

// u0 + eps for a given prior perturbation.
Vector guess_from_eps(const InverseProblem& problem, const Vector& eps);

}  // namespace rmap
