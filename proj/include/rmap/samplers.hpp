#pragma once

#include "rmap/chain.hpp"
#include "rmap/optimizer.hpp"

namespace rmap {

enum class StartStrategy {
  PriorPoint,  // u0 + eps_j
  RandomDraw,  // independent prior draw
  Global1d,    // global minimizer of the randomized objective (scalar only)
  Warm,        // sensitivity prediction from the previous sample
};
enum class SolverKind { Trincg, Lm };

const char* to_string(StartStrategy s);
const char* to_string(SolverKind s);

// Whitened coordinates: y has iid N(0,1) prior components,
// u = mean + V (sqrt(var) o y). SN and DRAM run their chains in y.
Vector whiten(const GaussianMeasure& prior, const Vector& u);
Vector unwhiten(const GaussianMeasure& prior, const Vector& y);

// log|det(I + C^{1/2} dG* Lam^{-1} dG C^{1/2})| at u, computed from the
// obs-by-obs Gram matrix of the whitened Jacobian (Sylvester's identity),
// so the cost is obs_dim adjoint solves. rank > 0 keeps only the leading
// rank eigenvalues of the Gram spectrum.
struct JacobianInfo {
  double log_absdet = 0;
  std::string method;  // "dense-eig" or "low-rank"
};
JacobianInfo jacobian_info(InverseProblem& problem, const Vector& u,
                           int rank = -1);

// rMAP: each sample is an independent randomized-MAP solve. Sample j draws
// its randomization from the substream Rng(seed, j + 1), so any worker count
// produces the same stream; with memoryless start strategies the samples are
// bitwise identical across worker counts, while Warm runs keep one
// sensitivity context per worker (reproducible at fixed worker count).
struct RmapOptions {
  StartStrategy start = StartStrategy::PriorPoint;
  SolverKind solver = SolverKind::Trincg;
  SolverConfig solver_cfg;
  bool metropolize = false;
  bool compute_jacobian = false;  // implied by metropolize
  int workers = 1;
  int warm_surrogate_rank = 0;
};
Chain rmap_chain(InverseProblem& problem, int n, const RmapOptions& opt,
                 std::uint64_t seed);

// Approximate Metropolization of an rMAP proposal stream with the
// square-root determinant ratio; rejected proposals repeat the previous
// state. Every meta entry must carry log_absdet. The output is an equally
// weighted chain (log_weight reset to 0). Full1d additionally applies the
// exp(-K'HK/2) factor (scalar problems only).
enum class MetropolizeMode { Simplified, Full1d };
Chain metropolize_rmap(const Chain& proposals, Rng& rng);
Chain metropolize_rmap(InverseProblem& problem, const Chain& proposals,
                       Rng& rng, MetropolizeMode mode);

// Per-sample log importance weights (max-normalized to 0) of the proposal
// density ratio used by the Metropolization above: -log|J|/2, plus the
// exp(-K'HK/2) factor under Full1d.
std::vector<double> rmap_log_weights(InverseProblem& problem,
                                     const Chain& chain, MetropolizeMode mode);

// RTO: samples solve W [Lam^{-1/2}(G(u) - d - theta); C^{-1/2}(u - u0 - eps)]
// = 0, where W is Q' (thin QR of the stacked whitened Jacobian at the MAP)
// for the qr variant and the stacked Jacobian transposed for the modified
// one. Scalar problems follow the 1d root path (all stationarity roots,
// winner nearest the MAP, no root = failed sample); otherwise a square
// Newton iteration from the MAP. Euclidean parameter spaces only.
enum class RtoVariant { Qr, Modified };
struct RtoOptions {
  RtoVariant variant = RtoVariant::Qr;
  SolverConfig map_solver;
  int newton_cap = 50;
  double tol = 1e-10;
  int workers = 1;
};
Chain rto_chain(InverseProblem& problem, int n, const RtoOptions& opt,
                std::uint64_t seed);

// Posterior / RTO-proposal density ratios by the 1d change of variables
// through the stationarity map; scalar problems only. Returns a copy of the
// chain with log_weight replaced (shifted so the largest weight is 1).
Chain rto_importance_weights(InverseProblem& problem, const Chain& chain);

// Stochastic Newton MH chain: proposal y* ~ N(y - Hg^{-1} grad, Hg^{-1}) with
// the Gauss-Newton Hessian in whitened coordinates, asymmetric correction
// from the proposal's own linearization. Dense factorization per accepted
// state; desk scale only.
Chain sn_chain(InverseProblem& problem, int n, const Vector& start,
               std::uint64_t seed);

struct SnLinearization {
  Vector y;
  double cost = 0;
  Vector newton_mean;
  Matrix chol_lower;  // L with L L' = Hg in whitened coordinates
  double logdet = 0;  // log det Hg
};
SnLinearization sn_linearize(InverseProblem& problem, const Vector& y);
double sn_log_acceptance(const SnLinearization& from, const SnLinearization& to);

// Delayed-rejection adaptive Metropolis baseline in whitened coordinates.
// Proposal covariance (2.38^2/dim) * (empirical cov + jitter I), adapted
// until burn_in then frozen; one delayed-rejection stage at scale gamma.
struct DramOptions {
  int burn_in = 1000;
  int adapt_start = 100;
  double gamma = 0.2;
  double jitter = 1e-10;
};
Chain dram_chain(InverseProblem& problem, int n, const Vector& start,
                 const DramOptions& opt, std::uint64_t seed);

}  // namespace rmap
