#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "rmap/problem.hpp"

namespace rmap {

enum class StopReason { CostChange, StepSize, GradientNorm, IterationCap };
const char* to_string(StopReason reason);

enum class HessianMode { Full, GaussNewton };

struct SolverConfig {
  double eps_f = 1e-8;   // |dJ| <= eps_f (1 + J)
  double eps_x = 1e-8;   // ||step|| <= eps_x
  double eps_g = 1e-8;   // ||grad|| <= eps_g
  int max_iters = 100;
  double delta0 = 0.0;     // <= 0: max(1, ||u_init||)
  double delta_max = 0.0;  // <= 0: 1e3 * initial radius
  double eta_max = 0.5;    // forcing-term cap; residual target min(eta_max, |g|)|g|
  int cg_max_iters = 0;    // <= 0: N for trincg, max(1, N/2) for lm
  HessianMode hessian_mode = HessianMode::GaussNewton;

  void validate() const;
};

struct OptReport {
  int iterations = 0;
  Counters solves;  // problem counter delta over the run
  StopReason reason = StopReason::IterationCap;
  double final_cost = 0;
  double final_gradnorm = 0;
  std::vector<double> cost_history;      // accepted iterates, including start
  std::vector<double> gradnorm_history;  // gradient norm at accepted iterates
};

// Steihaug truncated CG on  H s = -g  within ||s|| <= delta, in the inner
// product given by `inner`. pred_reduction is -(g's + s'Hs/2), tracked
// incrementally (no extra Hessian action).
struct SteihaugResult {
  enum class Exit { Converged, NegativeCurvature, Boundary, IterationCap };
  Vector step;
  Exit exit = Exit::Converged;
  int iterations = 0;
  double pred_reduction = 0;
};

SteihaugResult steihaug_cg(
    const std::function<Vector(const Vector&)>& hessian_action, const Vector& g,
    double delta, double residual_target, int max_iters,
    const std::function<double(const Vector&, const Vector&)>& inner);

// Trust-region inexact Newton-CG on the (randomized) MAP objective.
// Throws std::invalid_argument for a non-finite start, SolveFailure (with the
// best iterate attached) when the radius collapses without progress.
std::pair<Vector, OptReport> trincg_minimize(InverseProblem& problem,
                                             const Vector& u_init,
                                             const SolverConfig& cfg,
                                             const Randomization& r);
std::pair<Vector, OptReport> trincg_minimize(InverseProblem& problem,
                                             const Vector& u_init,
                                             const SolverConfig& cfg);

// Levenberg-Marquardt baseline with Gauss-Newton curvature and multiplicative
// damping; same stopping rules and error contract as trincg_minimize.
std::pair<Vector, OptReport> lm_minimize(InverseProblem& problem,
                                         const Vector& u_init,
                                         const SolverConfig& cfg,
                                         const Randomization& r);
std::pair<Vector, OptReport> lm_minimize(InverseProblem& problem,
                                         const Vector& u_init,
                                         const SolverConfig& cfg);

}  // namespace rmap
