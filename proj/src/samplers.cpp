#include "rmap/samplers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <thread>

#include "rmap/analytical.hpp"
#include "rmap/helmholtz.hpp"
#include "rmap/warmstart.hpp"

namespace rmap {

namespace {

void fill_report(SampleMeta& meta, const OptReport& rep) {
  meta.iterations = rep.iterations;
  meta.stop = rep.reason;
  meta.final_cost = rep.final_cost;
  meta.final_gradnorm = rep.final_gradnorm;
}

std::string u64_str(std::uint64_t v) { return std::to_string(v); }

// Runs body(j) for j in [0, n) over `workers` threads, sample j always on
// thread j % workers. Per-sample failures are the body's business; anything
// it throws is rethrown here.
template <typename Body>
void parallel_samples(int n, int workers, const Body& body) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int j = 0; j < n; ++j) body(0, j);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int j = w; j < n; j += workers) body(w, j);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

const char* to_string(StartStrategy s) {
  switch (s) {
    case StartStrategy::PriorPoint: return "prior-point";
    case StartStrategy::RandomDraw: return "random-draw";
    case StartStrategy::Global1d: return "global-1d";
    case StartStrategy::Warm: return "warm";
  }
  return "?";
}

const char* to_string(SolverKind s) {
  return s == SolverKind::Trincg ? "trincg" : "lm";
}

Vector whiten(const GaussianMeasure& prior, const Vector& u) {
  Vector y = prior.to_spectral(u - prior.mean());
  return y.cwiseQuotient(prior.mode_variances().cwiseSqrt());
}

Vector unwhiten(const GaussianMeasure& prior, const Vector& y) {
  return prior.mean() +
         prior.from_spectral(prior.mode_variances().cwiseSqrt().cwiseProduct(y));
}

JacobianInfo jacobian_info(InverseProblem& problem, const Vector& u, int rank) {
  const GaussianMeasure& prior = problem.prior();
  const Vector sd = prior.mode_variances().cwiseSqrt();
  const Eigen::Index k = problem.obs_dim();

  // Rows of the whitened Jacobian R = Lam^{-1/2} dG C^{1/2}; Sylvester turns
  // det(I_N + R'R) into the K x K det(I_K + R R').
  Matrix rows(k, sd.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    Vector e = Vector::Zero(k);
    e[i] = 1.0;
    Vector rep = problem.apply_jacobian_adjoint(u, e);
    rows.row(i) = sd.cwiseProduct(prior.to_spectral(rep)).transpose();
  }
  const double inv_var = 1.0 / (problem.noise_sigma() * problem.noise_sigma());
  Matrix gram = inv_var * (rows * rows.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("jacobian_info: eigensolve failed");

  JacobianInfo info;
  const Vector& eig = es.eigenvalues();  // ascending
  Eigen::Index keep = (rank > 0 && rank < k) ? rank : k;
  info.method = keep < k ? "low-rank" : "dense-eig";
  for (Eigen::Index i = 0; i < keep; ++i) {
    double lambda = std::max(0.0, eig[eig.size() - 1 - i]);
    info.log_absdet += std::log1p(lambda);
  }
  return info;
}

Chain rmap_chain(InverseProblem& problem, int n, const RmapOptions& opt,
                 std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("rmap_chain: n must be positive");
  const bool need_jacobian = opt.compute_jacobian || opt.metropolize;
  if (opt.start == StartStrategy::Global1d &&
      dynamic_cast<AnalyticalPosterior*>(&problem) == nullptr)
    throw std::invalid_argument("rmap_chain: global-1d starts need a scalar analytical posterior");

  Vector map;
  if (opt.start == StartStrategy::Warm) {
    auto [map_u, rep] = opt.solver == SolverKind::Trincg
                            ? trincg_minimize(problem, problem.prior().mean(), opt.solver_cfg)
                            : lm_minimize(problem, problem.prior().mean(), opt.solver_cfg);
    map = map_u;
    (void)rep;
  }

  std::vector<Vector> samples(n);
  std::vector<SampleMeta> metas(n);
  std::vector<char> ok(n, 0);

  const int workers = std::max(1, std::min(opt.workers, n));
  std::vector<std::unique_ptr<InverseProblem>> clones;
  clones.reserve(workers);
  std::vector<std::optional<WarmStartContext>> contexts(workers);
  for (int w = 0; w < workers; ++w) {
    clones.push_back(problem.clone());
    if (opt.start == StartStrategy::Warm)
      contexts[w].emplace(*clones[w], map, opt.warm_surrogate_rank);
  }

  parallel_samples(n, workers, [&](int w, int j) {
    InverseProblem& local = *clones[w];
    auto* analytic = dynamic_cast<AnalyticalPosterior*>(&local);
    SampleMeta& meta = metas[j];

    Rng sub(seed, static_cast<std::uint64_t>(j) + 1);
    meta.randomization = local.draw_randomization(sub);
    const Randomization& r = meta.randomization;

    Vector u_init;
    switch (opt.start) {
      case StartStrategy::PriorPoint:
        u_init = guess_from_eps(local, r.eps);
        break;
      case StartStrategy::RandomDraw:
        u_init = local.prior().sample(sub);
        break;
      case StartStrategy::Global1d:
        u_init = Vector::Constant(1, analytic->minimize_randomized(r.theta[0], r.eps[0]));
        break;
      case StartStrategy::Warm:
        u_init = sensitivity_guess(local, *contexts[w], r, &meta.used_warm_start);
        break;
    }

    Counters before = local.counters();
    try {
      auto [u, rep] = opt.solver == SolverKind::Trincg
                          ? trincg_minimize(local, u_init, opt.solver_cfg, r)
                          : lm_minimize(local, u_init, opt.solver_cfg, r);
      fill_report(meta, rep);
      if (need_jacobian) {
        meta.log_absdet = jacobian_info(local, u).log_absdet;
        meta.log_weight = -0.5 * meta.log_absdet;
      }
      if (analytic) meta.basin = analytic->nearest_mode(u[0]);
      if (contexts[w]) contexts[w]->advance(r, u);
      samples[j] = std::move(u);
      ok[j] = 1;
    } catch (const SolveFailure&) {
      meta.failed = true;
    } catch (const PdeSolveError&) {
      meta.failed = true;
    }
    meta.solves = local.counters() - before;
  });

  Chain chain;
  chain.method = "rmap";
  chain.seed = seed;
  chain.map_point = map;
  chain.config = {{"n", std::to_string(n)},
                  {"start", to_string(opt.start)},
                  {"solver", to_string(opt.solver)},
                  {"metropolize", opt.metropolize ? "1" : "0"},
                  {"workers", std::to_string(opt.workers)},
                  {"seed", u64_str(seed)}};
  for (int j = 0; j < n; ++j) {
    if (ok[j]) {
      chain.samples.push_back(std::move(samples[j]));
      chain.meta.push_back(std::move(metas[j]));
    } else {
      chain.failures.push_back(std::move(metas[j]));
    }
  }
  if (!chain.failures.empty())
    std::cerr << "rmap_chain: excluded " << chain.failures.size()
              << " failed optimizations of " << n << "\n";
  validate(chain);

  if (opt.metropolize) {
    Rng mh(seed, 0);
    return metropolize_rmap(chain, mh);
  }
  return chain;
}

namespace {

// -K'HK/2 of the Metropolization density ratio, scalar parameter space.
double full1d_correction(InverseProblem& p, const Vector& u) {
  if (p.param_dim() != 1 || p.obs_dim() != 1)
    throw std::invalid_argument("metropolize: the full factor needs a scalar problem");
  const double var = p.noise_sigma() * p.noise_sigma();
  const Vector e1 = Vector::Ones(1);
  const double gu = p.forward(u)[0];
  const double gp = p.apply_jacobian(u, e1)[0];
  const double c = p.prior().apply_c(e1)[0];
  const double k = (gu - p.observations()[0] + gp * (u[0] - p.prior().mean()[0])) / var;
  const double h = 1.0 / (1.0 / var + gp * c * gp / (var * var));
  return -0.5 * k * k * h;
}

std::vector<double> log_theta_values(InverseProblem* problem, const Chain& chain,
                                     MetropolizeMode mode) {
  std::vector<double> logs(chain.samples.size());
  for (std::size_t j = 0; j < chain.samples.size(); ++j) {
    const double la = chain.meta[j].log_absdet;
    if (!std::isfinite(la))
      throw std::runtime_error("metropolize_rmap: sample missing jacobian metadata");
    logs[j] = -0.5 * la;
    if (mode == MetropolizeMode::Full1d)
      logs[j] += full1d_correction(*problem, chain.samples[j]);
  }
  return logs;
}

Chain metropolis_pass(const Chain& proposals, Rng& rng,
                      const std::vector<double>& log_theta, const char* suffix) {
  validate(proposals);
  if (proposals.samples.empty())
    throw std::invalid_argument("metropolize_rmap: empty proposal stream");

  Chain out = proposals;
  out.method += suffix;
  // The Metropolized stream is equally weighted; importance weights belong
  // to the plain proposal chain.
  for (SampleMeta& m : out.meta) m.log_weight = 0.0;
  std::size_t state = 0;
  long accepted = 1;
  out.meta[0].accepted = true;
  for (std::size_t j = 1; j < out.samples.size(); ++j) {
    const double log_alpha = log_theta[j] - log_theta[state];
    // One uniform per step keeps the stream layout fixed.
    const bool accept = std::log(rng.uniform()) < log_alpha;
    if (accept) {
      state = j;
      ++accepted;
      out.meta[j].accepted = true;
    } else {
      out.samples[j] = out.samples[state];
      out.meta[j].accepted = false;
      out.meta[j].basin = out.meta[state].basin;
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(out.samples.size());
  return out;
}

}  // namespace

std::vector<double> rmap_log_weights(InverseProblem& problem, const Chain& chain,
                                     MetropolizeMode mode) {
  std::vector<double> logs = log_theta_values(&problem, chain, mode);
  const double top = *std::max_element(logs.begin(), logs.end());
  for (double& l : logs) l -= top;
  return logs;
}

Chain metropolize_rmap(const Chain& proposals, Rng& rng) {
  return metropolis_pass(proposals, rng,
                         log_theta_values(nullptr, proposals, MetropolizeMode::Simplified),
                         "+metropolized");
}

Chain metropolize_rmap(InverseProblem& problem, const Chain& proposals, Rng& rng,
                       MetropolizeMode mode) {
  return metropolis_pass(proposals, rng, log_theta_values(&problem, proposals, mode),
                         mode == MetropolizeMode::Full1d ? "+metropolized-full"
                                                         : "+metropolized");
}

namespace {

// Stacked whitened Jacobian [Lam^{-1/2} dG; C^{-1/2}] at u, one column per
// Euclidean parameter direction.
Matrix stacked_jacobian(InverseProblem& p, const Vector& u) {
  const Eigen::Index n = p.param_dim(), k = p.obs_dim();
  Matrix g(k + n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector e = Vector::Zero(n);
    e[j] = 1.0;
    g.col(j).head(k) = p.apply_jacobian(u, e) / p.noise_sigma();
    g.col(j).tail(n) = p.prior().apply_cinvsqrt(e);
  }
  return g;
}

Matrix rto_row_factor(InverseProblem& p, const Vector& map, RtoVariant variant) {
  Matrix gbar = stacked_jacobian(p, map);
  if (variant == RtoVariant::Modified) return gbar.transpose();

  Eigen::HouseholderQR<Matrix> qr(gbar);
  Matrix r = qr.matrixQR().topRows(gbar.cols()).triangularView<Eigen::Upper>();
  double dmax = r.diagonal().cwiseAbs().maxCoeff();
  if (r.diagonal().cwiseAbs().minCoeff() <= 1e-12 * dmax)
    throw std::logic_error("rto_chain: rank-deficient stacked factor");
  Matrix thin_q = qr.householderQ() * Matrix::Identity(gbar.rows(), gbar.cols());
  return thin_q.transpose();
}

// Stacked residual [ (G(u) - d - theta)/sigma ; C^{-1/2}(u - u0 - eps) ].
Vector stacked_residual(InverseProblem& p, const Vector& u, const Randomization& r) {
  const Eigen::Index n = p.param_dim(), k = p.obs_dim();
  Vector v(k + n);
  v.head(k) = (p.forward(u) - p.observations() - r.theta) / p.noise_sigma();
  v.tail(n) = p.prior().apply_cinvsqrt(u - p.prior().mean() - r.eps);
  return v;
}

struct RootSolve {
  bool found = false;
  double root = 0;
  int polish_iters = 0;
};

// All roots of the scalar stationarity map on the bracket, winner closest to
// the MAP point.
RootSolve rto_roots_1d(InverseProblem& p, const Matrix& w, const Randomization& r,
                       double map, double lo, double hi, double tol) {
  const double sigma = p.noise_sigma();
  const Vector e1 = Vector::Ones(1);
  const double cinv_sqrt = p.prior().apply_cinvsqrt(e1)[0];
  auto f = [&](double u) {
    Vector uu = Vector::Constant(1, u);
    return w(0, 0) * (p.forward(uu)[0] - p.observations()[0] - r.theta[0]) / sigma +
           w(0, 1) * cinv_sqrt * (u - p.prior().mean()[0] - r.eps[0]);
  };
  auto df = [&](double u) {
    Vector uu = Vector::Constant(1, u);
    return w(0, 0) * p.apply_jacobian(uu, e1)[0] / sigma + w(0, 1) * cinv_sqrt;
  };

  RootSolve out;
  const int grid = 200;
  double best_dist = std::numeric_limits<double>::infinity();
  double prev_u = lo, prev_f = f(lo);
  for (int i = 1; i <= grid; ++i) {
    double u = lo + (hi - lo) * i / grid;
    double fu = f(u);
    if (prev_f == 0.0 || prev_f * fu < 0.0) {
      double a = prev_u, b = u, fa = prev_f;
      for (int it = 0; it < 60 && b - a > 1e-14 * (1 + std::abs(a)); ++it) {
        double m = 0.5 * (a + b), fm = f(m);
        ++out.polish_iters;
        if (fa * fm <= 0)
          b = m;
        else {
          a = m;
          fa = fm;
        }
      }
      double root = 0.5 * (a + b);
      for (int it = 0; it < 4; ++it) {
        double d = df(root);
        if (d == 0) break;
        root -= f(root) / d;
        ++out.polish_iters;
      }
      if (std::abs(f(root)) <= tol * (1.0 + std::abs(root))) {
        double dist = std::abs(root - map);
        if (!out.found || dist < best_dist) {
          out.found = true;
          out.root = root;
          best_dist = dist;
        }
      }
    }
    prev_u = u;
    prev_f = fu;
  }
  return out;
}

}  // namespace

Chain rto_chain(InverseProblem& problem, int n, const RtoOptions& opt,
                std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("rto_chain: n must be positive");
  if (problem.prior().has_mass())
    throw std::invalid_argument("rto_chain: mass-weighted parameter spaces unsupported");

  auto [map, map_rep] = trincg_minimize(problem, problem.prior().mean(), opt.map_solver);
  (void)map_rep;
  const Matrix w = rto_row_factor(problem, map, opt.variant);
  const Eigen::Index dim = problem.param_dim();

  auto* analytic = dynamic_cast<AnalyticalPosterior*>(&problem);
  double lo = 0, hi = 0;
  if (dim == 1) {
    if (analytic) {
      lo = AnalyticalPosterior::bracket_lo;
      hi = AnalyticalPosterior::bracket_hi;
    } else {
      double sd = std::sqrt(problem.prior().mode_variances()[0]);
      lo = problem.prior().mean()[0] - 15 * sd;
      hi = problem.prior().mean()[0] + 15 * sd;
    }
  }

  std::vector<Vector> samples(n);
  std::vector<SampleMeta> metas(n);
  std::vector<char> ok(n, 0);

  const int workers = std::max(1, std::min(opt.workers, n));
  std::vector<std::unique_ptr<InverseProblem>> clones;
  for (int wk = 0; wk < workers; ++wk) clones.push_back(problem.clone());

  parallel_samples(n, workers, [&](int wk, int j) {
    InverseProblem& local = *clones[wk];
    auto* local_analytic = dynamic_cast<AnalyticalPosterior*>(&local);
    SampleMeta& meta = metas[j];
    Rng sub(seed, static_cast<std::uint64_t>(j) + 1);
    meta.randomization = local.draw_randomization(sub);

    Counters before = local.counters();
    if (dim == 1) {
      RootSolve rs = rto_roots_1d(local, w, meta.randomization, map[0], lo, hi, opt.tol);
      meta.iterations = rs.polish_iters;
      if (rs.found) {
        meta.stop = StopReason::GradientNorm;
        samples[j] = Vector::Constant(1, rs.root);
        if (local_analytic) meta.basin = local_analytic->nearest_mode(rs.root);
        ok[j] = 1;
      } else {
        meta.failed = true;
      }
    } else {
      Vector u = map;
      bool converged = false;
      for (int it = 0; it < opt.newton_cap; ++it) {
        Vector res = w * stacked_residual(local, u, meta.randomization);
        meta.iterations = it;
        if (res.norm() <= opt.tol * (1.0 + u.norm())) {
          converged = true;
          break;
        }
        Matrix jac = w * stacked_jacobian(local, u);
        Vector step = jac.partialPivLu().solve(res);
        u -= step;
        if (!u.allFinite()) break;
      }
      if (converged) {
        meta.stop = StopReason::GradientNorm;
        samples[j] = u;
        ok[j] = 1;
      } else {
        meta.failed = true;
      }
    }
    meta.solves = local.counters() - before;
  });

  Chain chain;
  chain.method = opt.variant == RtoVariant::Qr ? "rto-qr" : "rto-modified";
  chain.seed = seed;
  chain.map_point = map;
  chain.config = {{"n", std::to_string(n)},
                  {"variant", opt.variant == RtoVariant::Qr ? "qr" : "modified"},
                  {"workers", std::to_string(opt.workers)},
                  {"seed", u64_str(seed)}};
  for (int j = 0; j < n; ++j) {
    if (ok[j]) {
      chain.samples.push_back(std::move(samples[j]));
      chain.meta.push_back(std::move(metas[j]));
    } else {
      chain.failures.push_back(std::move(metas[j]));
    }
  }
  if (!chain.failures.empty())
    std::cerr << "rto_chain: excluded " << chain.failures.size()
              << " rootless randomizations of " << n << "\n";
  validate(chain);
  return chain;
}

Chain rto_importance_weights(InverseProblem& problem, const Chain& chain) {
  if (problem.param_dim() != 1)
    throw std::invalid_argument("rto_importance_weights: scalar parameters only");
  if (chain.map_point.size() != 1)
    throw std::invalid_argument("rto_importance_weights: chain carries no MAP point");
  RtoVariant variant;
  if (chain.method.rfind("rto-qr", 0) == 0)
    variant = RtoVariant::Qr;
  else if (chain.method.rfind("rto-modified", 0) == 0)
    variant = RtoVariant::Modified;
  else
    throw std::invalid_argument("rto_importance_weights: not an RTO chain");

  const Matrix w = rto_row_factor(problem, chain.map_point, variant);
  const double sigma = problem.noise_sigma();
  const Vector e1 = Vector::Ones(1);
  const double cinv_sqrt = problem.prior().apply_cinvsqrt(e1)[0];
  const double u0 = problem.prior().mean()[0];
  const double d = problem.observations()[0];
  const double q2 = (w * w.transpose())(0, 0);
  const double z0 = w(0, 0) * d / sigma + w(0, 1) * cinv_sqrt * u0;

  Chain out = chain;
  std::vector<double> logs(chain.samples.size());
  for (std::size_t j = 0; j < chain.samples.size(); ++j) {
    const Vector& u = chain.samples[j];
    double gu = problem.forward(u)[0];
    double gp = problem.apply_jacobian(u, e1)[0];
    double phi = w(0, 0) * gu / sigma + w(0, 1) * cinv_sqrt * u[0];
    double dphi = w(0, 0) * gp / sigma + w(0, 1) * cinv_sqrt;
    if (dphi == 0)
      throw std::runtime_error("rto_importance_weights: singular stationarity map");
    double diff = phi - z0;
    logs[j] = -problem.objective(u) + 0.5 * diff * diff / q2 - std::log(std::abs(dphi));
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  for (std::size_t j = 0; j < logs.size(); ++j) out.meta[j].log_weight = logs[j] - top;
  out.method += "+weighted";
  return out;
}

SnLinearization sn_linearize(InverseProblem& problem, const Vector& y) {
  const GaussianMeasure& prior = problem.prior();
  const Vector sd = prior.mode_variances().cwiseSqrt();
  const Eigen::Index m = sd.size();

  SnLinearization lin;
  lin.y = y;
  Vector u = unwhiten(prior, y);
  lin.cost = problem.objective(u);
  Vector ghat = sd.cwiseProduct(prior.to_spectral(problem.gradient(u)));

  Matrix h(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Vector x = sd[j] * prior.kl_modes().col(j);
    h.col(j) = sd.cwiseProduct(prior.to_spectral(problem.gn_hessian_action(u, x)));
  }
  h = 0.5 * (h + h.transpose()).eval();

  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sn_chain: Gauss-Newton Hessian factorization failed");
  lin.chol_lower = llt.matrixL();
  lin.logdet = 2.0 * lin.chol_lower.diagonal().array().log().sum();
  lin.newton_mean = y - llt.solve(ghat);
  return lin;
}

double sn_log_acceptance(const SnLinearization& from, const SnLinearization& to) {
  auto log_q = [](const SnLinearization& at, const Vector& target) {
    Vector z = at.chol_lower.transpose() * (target - at.newton_mean);
    return 0.5 * at.logdet - 0.5 * z.squaredNorm();
  };
  return (from.cost - to.cost) + log_q(to, from.y) - log_q(from, to.y);
}

Chain sn_chain(InverseProblem& problem, int n, const Vector& start,
               std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sn_chain: n must be positive");
  if (!start.allFinite() || start.size() != problem.param_dim())
    throw std::invalid_argument("sn_chain: bad start");

  Rng rng(seed);
  const GaussianMeasure& prior = problem.prior();
  SnLinearization cur = sn_linearize(problem, whiten(prior, start));

  Chain chain;
  chain.method = "sn";
  chain.seed = seed;
  chain.config = {{"n", std::to_string(n)}, {"seed", u64_str(seed)}};
  auto* analytic = dynamic_cast<AnalyticalPosterior*>(&problem);

  long accepted = 0;
  for (int i = 0; i < n; ++i) {
    Counters before = problem.counters();
    Vector xi = rng.normal_vector(cur.y.size());
    Vector prop_y = cur.newton_mean +
                    cur.chol_lower.transpose()
                        .triangularView<Eigen::Upper>()
                        .solve(xi);
    SnLinearization prop = sn_linearize(problem, prop_y);
    double log_alpha = sn_log_acceptance(cur, prop);

    SampleMeta meta;
    meta.accepted = std::log(rng.uniform()) < log_alpha;
    if (meta.accepted) {
      cur = std::move(prop);
      ++accepted;
    }
    meta.final_cost = cur.cost;
    meta.solves = problem.counters() - before;
    Vector u = unwhiten(prior, cur.y);
    if (analytic) meta.basin = analytic->nearest_mode(u[0]);
    chain.samples.push_back(std::move(u));
    chain.meta.push_back(std::move(meta));
  }
  chain.acceptance_rate = static_cast<double>(accepted) / n;
  validate(chain);
  return chain;
}

Chain dram_chain(InverseProblem& problem, int n, const Vector& start,
                 const DramOptions& opt, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("dram_chain: n must be positive");
  if (!start.allFinite() || start.size() != problem.param_dim())
    throw std::invalid_argument("dram_chain: bad start");
  if (!(opt.gamma > 0 && opt.gamma < 1))
    throw std::invalid_argument("dram_chain: gamma must be in (0,1)");

  Rng rng(seed);
  const GaussianMeasure& prior = problem.prior();
  const Eigen::Index m = prior.mode_variances().size();
  const double scale = 2.38 * 2.38 / static_cast<double>(m);

  Vector y = whiten(prior, start);
  double logpi = -problem.objective(unwhiten(prior, y));

  // Adaptation state: running sums over visited states, proposal factor
  // refreshed each adaptation step and frozen at burn_in.
  Vector s1 = Vector::Zero(m);
  Matrix s2 = Matrix::Zero(m, m);
  long t = 0;
  double jitter = opt.jitter;
  Matrix chol = Matrix::Identity(m, m) * std::sqrt(scale * (1.0 + jitter));

  auto refresh_proposal = [&](const Matrix& cov) {
    for (;;) {
      Matrix c = scale * (cov + jitter * Matrix::Identity(m, m));
      Eigen::LLT<Matrix> llt(c);
      if (llt.info() == Eigen::Success) {
        chol = llt.matrixL();
        return;
      }
      jitter *= 10;
      std::cerr << "dram_chain: proposal covariance not SPD, jitter raised to "
                << jitter << "\n";
    }
  };

  auto record = [&](const Vector& state) {
    ++t;
    s1 += state;
    s2 += state * state.transpose();
    if (t >= opt.adapt_start && t < opt.burn_in && t >= 2) {
      Matrix cov = (s2 - s1 * s1.transpose() / static_cast<double>(t)) /
                   static_cast<double>(t - 1);
      refresh_proposal(cov);
    }
  };

  Chain chain;
  chain.method = "dram";
  chain.seed = seed;
  chain.config = {{"n", std::to_string(n)},
                  {"burn_in", std::to_string(opt.burn_in)},
                  {"gamma", std::to_string(opt.gamma)},
                  {"seed", u64_str(seed)}};

  long accepted = 0;
  for (int i = 0; i < n; ++i) {
    Counters before = problem.counters();
    SampleMeta meta;

    Vector y1 = y + chol * rng.normal_vector(m);
    double logpi1 = -problem.objective(unwhiten(prior, y1));
    if (std::log(rng.uniform()) < logpi1 - logpi) {
      y = y1;
      logpi = logpi1;
      meta.accepted = true;
    } else {
      // One delayed-rejection stage at a contracted scale.
      Vector y2 = y + opt.gamma * (chol * rng.normal_vector(m));
      double logpi2 = -problem.objective(unwhiten(prior, y2));

      auto log_q1 = [&](const Vector& a, const Vector& b) {
        Vector z = chol.triangularView<Eigen::Lower>().solve(b - a);
        return -0.5 * z.squaredNorm();
      };
      auto log_one_minus_alpha = [](double lp_from, double lp_to) {
        double r = lp_to - lp_from;
        if (r >= 0) return -std::numeric_limits<double>::infinity();
        return std::log1p(-std::exp(r));
      };
      double num = logpi2 + log_q1(y2, y1) + log_one_minus_alpha(logpi2, logpi1);
      double den = logpi + log_q1(y, y1) + log_one_minus_alpha(logpi, logpi1);
      if (std::log(rng.uniform()) < num - den) {
        y = y2;
        logpi = logpi2;
        meta.accepted = true;
      } else {
        meta.accepted = false;
      }
    }
    if (meta.accepted) ++accepted;
    record(y);

    meta.final_cost = -logpi;
    meta.solves = problem.counters() - before;
    chain.samples.push_back(unwhiten(prior, y));
    chain.meta.push_back(std::move(meta));
  }
  chain.acceptance_rate = static_cast<double>(accepted) / n;
  validate(chain);
  return chain;
}

}  // namespace rmap
