#include "rmap/optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rmap {

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::CostChange: return "cost-change";
    case StopReason::StepSize: return "step-size";
    case StopReason::GradientNorm: return "gradient-norm";
    case StopReason::IterationCap: return "iteration-cap";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (!(eps_f > 0) || !(eps_x > 0) || !(eps_g > 0))
    throw std::invalid_argument("SolverConfig: tolerances must be positive");
  if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
  if (!(eta_max > 0) || eta_max >= 1)
    throw std::invalid_argument("SolverConfig: eta_max must lie in (0, 1)");
}

SteihaugResult steihaug_cg(
    const std::function<Vector(const Vector&)>& hessian_action, const Vector& g,
    double delta, double residual_target, int max_iters,
    const std::function<double(const Vector&, const Vector&)>& inner) {
  SteihaugResult out;
  out.step = Vector::Zero(g.size());

  Vector r = -g;  // residual of H s + g at s = 0
  Vector d = r;
  double rr = inner(r, r);
  if (std::sqrt(rr) <= residual_target) return out;

  // Model bookkeeping m(s) = g's + s'Hs/2, updated alongside s.
  double gs = 0, sHs = 0;
  double gd = inner(g, d);
  double ss = 0, sd = 0, dd = rr;  // <s,s>, <s,d>, <d,d>

  auto advance = [&](double tau, const Vector& hd, double dhd) {
    gs += tau * gd;
    sHs += 2.0 * tau * inner(out.step, hd) + tau * tau * dhd;
    out.step += tau * d;
  };
  auto boundary_tau = [&]() {
    // positive root of ||s + tau d||^2 = delta^2
    double disc = sd * sd + dd * (delta * delta - ss);
    return (-sd + std::sqrt(std::max(0.0, disc))) / dd;
  };

  for (int k = 0; k < max_iters; ++k) {
    Vector hd = hessian_action(d);
    double dhd = inner(d, hd);
    ++out.iterations;
    if (dhd <= 0) {
      advance(boundary_tau(), hd, dhd);
      out.exit = SteihaugResult::Exit::NegativeCurvature;
      out.pred_reduction = -(gs + 0.5 * sHs);
      return out;
    }
    double alpha = rr / dhd;
    double ss_next = ss + 2.0 * alpha * sd + alpha * alpha * dd;
    if (ss_next >= delta * delta) {
      advance(boundary_tau(), hd, dhd);
      out.exit = SteihaugResult::Exit::Boundary;
      out.pred_reduction = -(gs + 0.5 * sHs);
      return out;
    }
    advance(alpha, hd, dhd);
    ss = ss_next;
    r -= alpha * hd;
    double rr_next = inner(r, r);
    if (std::sqrt(rr_next) <= residual_target) {
      out.exit = SteihaugResult::Exit::Converged;
      out.pred_reduction = -(gs + 0.5 * sHs);
      return out;
    }
    double beta = rr_next / rr;
    rr = rr_next;
    d = r + beta * d;
    gd = inner(g, r) + beta * gd;
    sd = inner(out.step, d);
    dd = inner(d, d);
  }
  out.exit = SteihaugResult::Exit::IterationCap;
  out.pred_reduction = -(gs + 0.5 * sHs);
  return out;
}

namespace {

std::pair<Vector, OptReport> run_trincg(InverseProblem& problem, const Vector& u_init,
                                        const SolverConfig& cfg, const Randomization& r) {
  cfg.validate();
  Counters before = problem.counters();
  auto inner = [&](const Vector& a, const Vector& b) { return problem.inner(a, b); };

  Vector u = u_init;
  double cost = problem.randomized_objective(u, r);
  if (!std::isfinite(cost))
    throw std::invalid_argument("trincg_minimize: objective not finite at start");

  const double delta_init = cfg.delta0 > 0 ? cfg.delta0 : std::max(1.0, problem.norm(u_init));
  const double delta_max = cfg.delta_max > 0 ? cfg.delta_max : 1e3 * delta_init;
  const int cg_cap =
      cfg.cg_max_iters > 0 ? cfg.cg_max_iters : static_cast<int>(problem.param_dim());
  double delta = delta_init;

  Vector g = problem.gradient(u, r);
  double gnorm = problem.norm(g);

  OptReport report;
  report.cost_history.push_back(cost);
  report.gradnorm_history.push_back(gnorm);
  report.reason = StopReason::IterationCap;

  auto hess = [&](const Vector& v) {
    return cfg.hessian_mode == HessianMode::Full ? problem.hessian_action(u, r, v)
                                                 : problem.gn_hessian_action(u, v);
  };

  bool done = false;
  while (!done && report.iterations < cfg.max_iters) {
    if (gnorm <= cfg.eps_g) {
      report.reason = StopReason::GradientNorm;
      break;
    }
    double target = std::min(cfg.eta_max, gnorm) * gnorm;
    SteihaugResult cg = steihaug_cg(hess, g, delta, target, cg_cap, inner);

    // Once even the model's predicted decrease falls under the roundoff
    // resolution of the cost, the ratio test is noise and rejections would
    // collapse the radius at a perfectly good minimizer.
    if (cg.pred_reduction <=
        4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(cost))) {
      report.reason = StopReason::CostChange;
      break;
    }
    ++report.iterations;

    double trial_cost = problem.randomized_objective(u + cg.step, r);
    double pred = cg.pred_reduction;
    double rho = (pred > 0 && std::isfinite(trial_cost)) ? (cost - trial_cost) / pred
                                                         : -1.0;
    bool on_boundary = cg.exit == SteihaugResult::Exit::Boundary ||
                       cg.exit == SteihaugResult::Exit::NegativeCurvature;

    if (rho > 0.1) {
      double drop = cost - trial_cost;
      double step_norm = problem.norm(cg.step);
      u += cg.step;
      cost = trial_cost;
      g = problem.gradient(u, r);
      gnorm = problem.norm(g);
      report.cost_history.push_back(cost);
      report.gradnorm_history.push_back(gnorm);
      if (std::abs(drop) <= cfg.eps_f * (1.0 + std::abs(cost))) {
        report.reason = StopReason::CostChange;
        done = true;
      } else if (step_norm <= cfg.eps_x) {
        report.reason = StopReason::StepSize;
        done = true;
      }
    }
    if (rho <= 0.25) {
      delta *= 0.5;
    } else if (rho >= 0.75 && on_boundary) {
      delta = std::min(2.0 * delta, delta_max);
    }
    if (delta < 1e-13 * delta_init) {
      report.solves = problem.counters() - before;
      throw SolveFailure("trincg_minimize: trust region collapsed without progress", u);
    }
  }

  report.final_cost = cost;
  report.final_gradnorm = gnorm;
  report.solves = problem.counters() - before;
  return {u, report};
}

std::pair<Vector, OptReport> run_lm(InverseProblem& problem, const Vector& u_init,
                                    const SolverConfig& cfg, const Randomization& r) {
  cfg.validate();
  Counters before = problem.counters();
  auto inner = [&](const Vector& a, const Vector& b) { return problem.inner(a, b); };
  const auto n = problem.param_dim();
  const int cg_cap =
      cfg.cg_max_iters > 0 ? cfg.cg_max_iters : std::max<int>(1, static_cast<int>(n / 2));

  Vector u = u_init;
  double cost = problem.randomized_objective(u, r);
  if (!std::isfinite(cost))
    throw std::invalid_argument("lm_minimize: objective not finite at start");

  double jn = cost / static_cast<double>(n);
  double lambda = std::max(0.5 * (std::sqrt(jn) + jn), 1e-12);
  const double lambda_init = lambda;

  Vector g = problem.gradient(u, r);
  double gnorm = problem.norm(g);

  OptReport report;
  report.cost_history.push_back(cost);
  report.gradnorm_history.push_back(gnorm);
  report.reason = StopReason::IterationCap;

  bool done = false;
  while (!done && report.iterations < cfg.max_iters) {
    if (gnorm <= cfg.eps_g) {
      report.reason = StopReason::GradientNorm;
      break;
    }
    auto damped = [&](const Vector& v) -> Vector {
      return problem.gn_hessian_action(u, v) + lambda * v;
    };
    // Damped systems only need a loose solve; large radius so CG never
    // truncates on the boundary.
    SteihaugResult cg = steihaug_cg(damped, g, 1e100, 1e-2 * gnorm, cg_cap, inner);
    ++report.iterations;

    double trial_cost = problem.randomized_objective(u + cg.step, r);
    if (std::isfinite(trial_cost) && trial_cost < cost) {
      double drop = cost - trial_cost;
      double step_norm = problem.norm(cg.step);
      u += cg.step;
      cost = trial_cost;
      g = problem.gradient(u, r);
      gnorm = problem.norm(g);
      lambda *= 0.1;
      report.cost_history.push_back(cost);
      report.gradnorm_history.push_back(gnorm);
      if (std::abs(drop) <= cfg.eps_f * (1.0 + std::abs(cost))) {
        report.reason = StopReason::CostChange;
        done = true;
      } else if (step_norm <= cfg.eps_x) {
        report.reason = StopReason::StepSize;
        done = true;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e16 * std::max(lambda_init, 1.0)) {
        report.solves = problem.counters() - before;
        throw SolveFailure("lm_minimize: damping diverged without progress", u);
      }
    }
  }

  report.final_cost = cost;
  report.final_gradnorm = gnorm;
  report.solves = problem.counters() - before;
  return {u, report};
}

}  // namespace

std::pair<Vector, OptReport> trincg_minimize(InverseProblem& problem, const Vector& u_init,
                                             const SolverConfig& cfg, const Randomization& r) {
  return run_trincg(problem, u_init, cfg, r);
}

std::pair<Vector, OptReport> trincg_minimize(InverseProblem& problem, const Vector& u_init,
                                             const SolverConfig& cfg) {
  return run_trincg(problem, u_init, cfg, problem.zero_randomization());
}

std::pair<Vector, OptReport> lm_minimize(InverseProblem& problem, const Vector& u_init,
                                         const SolverConfig& cfg, const Randomization& r) {
  return run_lm(problem, u_init, cfg, r);
}

std::pair<Vector, OptReport> lm_minimize(InverseProblem& problem, const Vector& u_init,
                                         const SolverConfig& cfg) {
  return run_lm(problem, u_init, cfg, problem.zero_randomization());
}

}  // namespace rmap
