#pragma once

#include <Eigen/SparseLU>
#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmap/mesh.hpp"
#include "rmap/problem.hpp"

namespace rmap {

// PDE solve that factored or backsolved to garbage; carries the evidence
// instead of returning a silent wrong field.
class PdeSolveError : public std::runtime_error {
 public:
  explicit PdeSolveError(const std::string& what) : std::runtime_error(what) {}
};

// Bayesian inverse problem for the real Helmholtz equation on a 2D mesh:
//
//   -lap w - e^{2u} w = (domain source),   dw/dn = g on the boundary,
//
// with u the log wave number field, point observations of w at mesh nodes,
// and a mass-weighted Gaussian prior on u. The discrete operator
// A(u) = K - M(e^{2u}) is symmetric indefinite; every solve goes through a
// sparse LU factored once per u and is residual-checked. The model keeps the
// two most recent states so a rejected trust-region trial does not evict the
// factorization of the current iterate, plus the adjoint of the latest
// (u, d) pair. Gradients and Hessian actions follow the adjoint formulas
//
//   <grad J_mis, v>   = -2 int v e^{2u} w tau
//   A tau             = -P (P'w - d)/sigma^2
//   A wtilde          =  2 M(v e^{2u}) w
//   A tautilde        =  2 M(v e^{2u}) tau - P (P'wtilde)/sigma^2   (full)
//                     =                    - P (P'wtilde)/sigma^2   (GN)
//
// so a full Hessian action costs exactly one incremental forward and one
// incremental adjoint backsolve once state and adjoint are cached.
class HelmholtzModel : public InverseProblem {
 public:
  enum class IncAdjointMode { Full, GaussNewton };

  // load is the assembled right-hand side (boundary flux and/or domain
  // source); obs_nodes are distinct mesh node indices.
  HelmholtzModel(Mesh mesh, GaussianMeasure prior, Vector load,
                 std::vector<int> obs_nodes, Vector observations, double sigma);

  Eigen::Index obs_dim() const override {
    return static_cast<Eigen::Index>(obs_nodes_.size());
  }
  double noise_sigma() const override { return sigma_; }
  const Vector& observations() const override { return d_; }
  const GaussianMeasure& prior() const override { return prior_; }
  std::unique_ptr<InverseProblem> clone() const override;

  const Mesh& mesh() const { return mesh_; }
  const std::vector<int>& observation_nodes() const { return obs_nodes_; }
  Vector observe(const Vector& w_field) const;
  SpMat assemble_operator(const Vector& u) const;

  // Full nodal fields; counters follow the PDE-solve cost model (cache hits
  // are free, a state rebuild inside a derivative call bills one forward).
  Vector solve_forward(const Vector& u);
  Vector solve_adjoint(const Vector& u, const Vector& d);
  Vector solve_adjoint(const Vector& u) { return solve_adjoint(u, d_); }
  Vector solve_incremental_forward(const Vector& u, const Vector& direction);
  Vector solve_incremental_adjoint(const Vector& u, const Vector& d,
                                   const Vector& direction, const Vector& wtilde,
                                   IncAdjointMode mode);

  Vector gradient(const Vector& u, const Vector& u0, const Vector& d) override;
  Vector hessian_action(const Vector& u, const Vector& u0, const Vector& d,
                        const Vector& v) override;
  using InverseProblem::gradient;
  using InverseProblem::hessian_action;

 protected:
  Vector forward_impl(const Vector& u) override;
  Vector jvp_impl(const Vector& u, const Vector& v) override;
  Vector vjp_impl(const Vector& u, const Vector& y) override;

 private:
  struct State {
    Vector u;
    Vector w;
    std::unique_ptr<Eigen::SparseLU<SpMat>> lu;
    SpMat a;
    std::uint64_t stamp = 0;
  };

  State& ensure_state(const Vector& u, bool bill_forward);
  const Vector& ensure_adjoint(State& s, const Vector& d, bool bill_adjoint);
  Vector checked_solve(const State& s, const Vector& rhs, const char* what) const;
  Vector scatter(const Vector& obs_values) const;
  Vector misfit_representer(const Vector& ell) const;

  Mesh mesh_;
  GaussianMeasure prior_;
  Vector load_;
  std::vector<int> obs_nodes_;
  Vector d_;
  double sigma_;

  std::array<State, 2> states_;
  std::uint64_t clock_ = 0;
  Vector adj_u_, adj_d_, adj_tau_;
  bool adj_valid_ = false;
};

// Nearest-node snapping for point observations; logs every point that moved
// and rejects layouts where two points land on the same node.
std::vector<int> snap_observation_points(const Mesh& mesh, const Matrix& points);

struct HelmholtzConfig {
  int nx = 9, ny = 9;           // elements per side on the unit square
  double alpha = 8.0;           // prior precision scale
  double prior_exponent = 2.0;  // covariance (I - lap)^{-s}
  double noise_pct = 1.0;       // percent of the clean-data scale
  bool noise_of_max = false;    // scale = max |data| instead of RMS
  int obs_per_side = 5;         // interior observation grid
  double flux = 1.0;            // Neumann source on the left edge
};

struct SyntheticCase {
  std::unique_ptr<HelmholtzModel> model;
  Vector truth;
  Vector clean_data;
  int redraws = 0;
};

// Draws a truth from the prior, solves the forward problem, and adds noise
// with sigma = (noise_pct/100) * scale. Redraws (with a logged count) when
// the drawn truth sits at a resonance; noise_pct = 0 keeps the data exact
// but still prices the likelihood at the 1% level.
SyntheticCase make_synthetic_case(const HelmholtzConfig& cfg, Rng& rng);

// Mesh + truth/data CSVs + JSON provenance under dir (created if needed).
void save_synthetic_case(const std::string& dir, const SyntheticCase& c,
                         const HelmholtzConfig& cfg, std::uint64_t seed);

}  // namespace rmap
