#include "rmap/helmholtz.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <utility>

#include "rmap/fem.hpp"

namespace rmap {

namespace {

double exp2c(double c) { return std::exp(2.0 * c); }
double twice_exp2c(double c) { return 2.0 * std::exp(2.0 * c); }
double quad_exp2c(double c) { return 4.0 * std::exp(2.0 * c); }

void write_csv(const std::string& path, const Vector& v) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) out << v[i] << "\n";
}

}  // namespace

HelmholtzModel::HelmholtzModel(Mesh mesh, GaussianMeasure prior, Vector load,
                               std::vector<int> obs_nodes, Vector observations,
                               double sigma)
    : mesh_(std::move(mesh)),
      prior_(std::move(prior)),
      load_(std::move(load)),
      obs_nodes_(std::move(obs_nodes)),
      d_(std::move(observations)),
      sigma_(sigma) {
  if (mesh_.dim != 2)
    throw std::invalid_argument("HelmholtzModel: 2D mesh required");
  if (prior_.dim() != mesh_.num_nodes())
    throw std::invalid_argument("HelmholtzModel: prior dimension != node count");
  if (load_.size() != mesh_.num_nodes())
    throw std::invalid_argument("HelmholtzModel: load size != node count");
  if (static_cast<Eigen::Index>(obs_nodes_.size()) != d_.size())
    throw std::invalid_argument("HelmholtzModel: observations != observation nodes");
  if (obs_nodes_.empty())
    throw std::invalid_argument("HelmholtzModel: no observation nodes");
  for (int n : obs_nodes_)
    if (n < 0 || n >= mesh_.num_nodes())
      throw std::invalid_argument("HelmholtzModel: observation node out of range");
  if (!(sigma_ > 0))
    throw std::invalid_argument("HelmholtzModel: noise sigma must be positive");
}

std::unique_ptr<InverseProblem> HelmholtzModel::clone() const {
  return std::unique_ptr<InverseProblem>(
      new HelmholtzModel(mesh_, prior_, load_, obs_nodes_, d_, sigma_));
}

SpMat HelmholtzModel::assemble_operator(const Vector& u) const {
  if (u.size() != mesh_.num_nodes())
    throw std::invalid_argument("HelmholtzModel: parameter size != node count");
  if (!u.allFinite())
    throw std::invalid_argument("HelmholtzModel: parameter field not finite");
  SpMat a = assemble_stiffness(mesh_);
  a -= assemble_weighted_mass(mesh_, u, exp2c);
  return a;
}

Vector HelmholtzModel::checked_solve(const State& s, const Vector& rhs,
                                     const char* what) const {
  Vector x = s.lu->solve(rhs);
  double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Vector::Zero(rhs.size());
  double rel = (s.a * x - rhs).norm() / rhs_norm;
  if (!x.allFinite() || rel > 1e-8) {
    std::ostringstream msg;
    msg << what << ": Helmholtz operator near-singular (relative residual "
        << rel << ", log|det| " << s.lu->logAbsDeterminant()
        << "); the parameter field sits at an interior resonance";
    throw PdeSolveError(msg.str());
  }
  return x;
}

HelmholtzModel::State& HelmholtzModel::ensure_state(const Vector& u,
                                                    bool bill_forward) {
  for (State& s : states_)
    if (s.lu && s.u.size() == u.size() && s.u == u) {
      s.stamp = ++clock_;
      return s;
    }
  State& slot = states_[0].stamp <= states_[1].stamp ? states_[0] : states_[1];
  slot.u = u;
  slot.a = assemble_operator(u);
  slot.lu = std::make_unique<Eigen::SparseLU<SpMat>>();
  slot.lu->compute(slot.a);
  if (slot.lu->info() != Eigen::Success) {
    slot.lu.reset();
    throw PdeSolveError(
        "forward factorization failed: Helmholtz operator singular "
        "(zero pivot); the parameter field sits at an interior resonance");
  }
  slot.stamp = ++clock_;
  if (bill_forward) ++counters_.forward;
  // Throws before caching a garbage state.
  Vector w = checked_solve(slot, load_, "forward solve");
  slot.w = std::move(w);
  return slot;
}

const Vector& HelmholtzModel::ensure_adjoint(State& s, const Vector& d,
                                             bool bill_adjoint) {
  if (!(adj_valid_ && adj_u_.size() == s.u.size() && adj_u_ == s.u &&
        adj_d_.size() == d.size() && adj_d_ == d)) {
    const double inv_var = 1.0 / (sigma_ * sigma_);
    Vector residual = inv_var * (observe(s.w) - d);
    adj_tau_ = checked_solve(s, Vector(-scatter(residual)), "adjoint solve");
    adj_u_ = s.u;
    adj_d_ = d;
    adj_valid_ = true;
    if (bill_adjoint) ++counters_.adjoint;
  }
  return adj_tau_;
}

Vector HelmholtzModel::observe(const Vector& w_field) const {
  Vector out(obs_dim());
  for (std::size_t j = 0; j < obs_nodes_.size(); ++j) out[j] = w_field[obs_nodes_[j]];
  return out;
}

Vector HelmholtzModel::scatter(const Vector& obs_values) const {
  Vector out = Vector::Zero(mesh_.num_nodes());
  for (std::size_t j = 0; j < obs_nodes_.size(); ++j)
    out[obs_nodes_[j]] += obs_values[j];
  return out;
}

Vector HelmholtzModel::misfit_representer(const Vector& ell) const {
  return prior_.apply_mass_inverse(ell);
}

Vector HelmholtzModel::solve_forward(const Vector& u) {
  return ensure_state(u, true).w;
}

Vector HelmholtzModel::solve_adjoint(const Vector& u, const Vector& d) {
  State& s = ensure_state(u, true);
  return ensure_adjoint(s, d, true);
}

Vector HelmholtzModel::solve_incremental_forward(const Vector& u,
                                                 const Vector& direction) {
  State& s = ensure_state(u, true);
  ++counters_.incremental_forward;
  Vector src = weighted_triple_product(mesh_, u, twice_exp2c, direction, s.w);
  return checked_solve(s, src, "incremental forward solve");
}

Vector HelmholtzModel::solve_incremental_adjoint(const Vector& u, const Vector& d,
                                                 const Vector& direction,
                                                 const Vector& wtilde,
                                                 IncAdjointMode mode) {
  State& s = ensure_state(u, true);
  const double inv_var = 1.0 / (sigma_ * sigma_);
  Vector rhs = -scatter(inv_var * observe(wtilde));
  if (mode == IncAdjointMode::Full) {
    const Vector& tau = ensure_adjoint(s, d, true);
    rhs += weighted_triple_product(mesh_, u, twice_exp2c, direction, tau);
  }
  ++counters_.incremental_adjoint;
  return checked_solve(s, rhs, "incremental adjoint solve");
}

Vector HelmholtzModel::forward_impl(const Vector& u) {
  // The base class bills this forward.
  return observe(ensure_state(u, false).w);
}

Vector HelmholtzModel::jvp_impl(const Vector& u, const Vector& v) {
  State& s = ensure_state(u, true);
  Vector src = weighted_triple_product(mesh_, u, twice_exp2c, v, s.w);
  return observe(checked_solve(s, src, "incremental forward solve"));
}

Vector HelmholtzModel::vjp_impl(const Vector& u, const Vector& y) {
  State& s = ensure_state(u, true);
  Vector tau = checked_solve(s, Vector(-scatter(y)), "adjoint solve");
  return misfit_representer(
      -weighted_triple_product(mesh_, u, twice_exp2c, s.w, tau));
}

Vector HelmholtzModel::gradient(const Vector& u, const Vector& u0,
                                const Vector& d) {
  State& s = ensure_state(u, true);
  const Vector& tau = ensure_adjoint(s, d, true);
  Vector ell = -weighted_triple_product(mesh_, u, twice_exp2c, s.w, tau);
  return misfit_representer(ell) + prior_.apply_cinv(u - u0);
}

Vector HelmholtzModel::hessian_action(const Vector& u, const Vector& /*u0*/,
                                      const Vector& d, const Vector& v) {
  State& s = ensure_state(u, true);
  const Vector& tau = ensure_adjoint(s, d, true);
  const double inv_var = 1.0 / (sigma_ * sigma_);

  ++counters_.incremental_forward;
  Vector wtilde = checked_solve(
      s, weighted_triple_product(mesh_, u, twice_exp2c, v, s.w),
      "incremental forward solve");

  // Both incremental adjoint sources share one backsolve.
  ++counters_.incremental_adjoint;
  Vector rhs = weighted_triple_product(mesh_, u, twice_exp2c, v, tau) -
               scatter(inv_var * observe(wtilde));
  Vector tautilde = checked_solve(s, rhs, "incremental adjoint solve");

  Vector ell = -weighted_quad_product(mesh_, u, quad_exp2c, v, s.w, tau) -
               weighted_triple_product(mesh_, u, twice_exp2c, wtilde, tau) -
               weighted_triple_product(mesh_, u, twice_exp2c, s.w, tautilde);
  return misfit_representer(ell) + prior_.apply_cinv(v);
}

std::vector<int> snap_observation_points(const Mesh& mesh, const Matrix& points) {
  if (points.cols() != mesh.dim)
    throw std::invalid_argument("snap_observation_points: dimension mismatch");
  std::vector<int> nodes;
  nodes.reserve(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Vector p = points.row(i).transpose();
    int n = nearest_node(mesh, p);
    double dist = (mesh.nodes.row(n).transpose() - p).norm();
    if (dist > 1e-12)
      std::cerr << "helmholtz: observation point (" << p.transpose()
                << ") snapped to node " << n << " at distance " << dist << "\n";
    for (int seen : nodes)
      if (seen == n)
        throw std::invalid_argument(
            "snap_observation_points: two points snap to the same node");
    nodes.push_back(n);
  }
  return nodes;
}

SyntheticCase make_synthetic_case(const HelmholtzConfig& cfg, Rng& rng) {
  if (cfg.nx < 2 || cfg.ny < 2)
    throw std::invalid_argument("make_synthetic_case: mesh too coarse");
  if (cfg.obs_per_side < 1 || cfg.noise_pct < 0)
    throw std::invalid_argument("make_synthetic_case: bad observation/noise config");

  Mesh mesh = make_unit_square_mesh(cfg.nx, cfg.ny);
  GaussianMeasure prior = GaussianMeasure::matrix_transfer(
      mesh, Vector::Zero(mesh.num_nodes()), cfg.alpha, cfg.prior_exponent);
  Vector load = boundary_flux_load(
      mesh, [](const Vector& x) { return x[0] < 1e-9; },
      [&cfg](const Vector&) { return cfg.flux; });

  Matrix points(cfg.obs_per_side * cfg.obs_per_side, 2);
  for (int i = 0; i < cfg.obs_per_side; ++i)
    for (int j = 0; j < cfg.obs_per_side; ++j) {
      points(i * cfg.obs_per_side + j, 0) = (i + 1.0) / (cfg.obs_per_side + 1.0);
      points(i * cfg.obs_per_side + j, 1) = (j + 1.0) / (cfg.obs_per_side + 1.0);
    }
  std::vector<int> obs_nodes = snap_observation_points(mesh, points);

  SyntheticCase out;
  const int max_redraws = 20;
  Vector clean;
  for (;;) {
    out.truth = prior.sample(rng);
    HelmholtzModel probe(mesh, prior, load, obs_nodes,
                         Vector::Zero(static_cast<Eigen::Index>(obs_nodes.size())),
                         1.0);
    try {
      clean = probe.observe(probe.solve_forward(out.truth));
      break;
    } catch (const PdeSolveError&) {
      if (++out.redraws > max_redraws)
        throw PdeSolveError(
            "make_synthetic_case: forward solve kept failing at drawn truths");
      std::cerr << "helmholtz: resonant truth draw, redrawing (" << out.redraws
                << ")\n";
    }
  }

  double scale = cfg.noise_of_max ? clean.cwiseAbs().maxCoeff()
                                  : std::sqrt(clean.squaredNorm() / clean.size());
  if (!(scale > 0))
    throw std::invalid_argument("make_synthetic_case: clean data identically zero");
  double pct = cfg.noise_pct > 0 ? cfg.noise_pct : 1.0;
  double sigma = 0.01 * pct * scale;
  Vector data = clean;
  if (cfg.noise_pct > 0)
    data += sigma * rng.normal_vector(static_cast<Eigen::Index>(obs_nodes.size()));

  out.clean_data = clean;
  out.model = std::make_unique<HelmholtzModel>(std::move(mesh), std::move(prior),
                                               std::move(load), std::move(obs_nodes),
                                               std::move(data), sigma);
  return out;
}

void save_synthetic_case(const std::string& dir, const SyntheticCase& c,
                         const HelmholtzConfig& cfg, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_mesh(c.model->mesh(), dir + "/mesh.txt");
  write_csv(dir + "/truth.csv", c.truth);
  write_csv(dir + "/data.csv", c.model->observations());
  write_csv(dir + "/clean_data.csv", c.clean_data);

  nlohmann::json j;
  j["seed"] = seed;
  j["alpha"] = cfg.alpha;
  j["prior_exponent"] = cfg.prior_exponent;
  j["noise_pct"] = cfg.noise_pct;
  j["noise_of_max"] = cfg.noise_of_max;
  j["noise_sigma"] = c.model->noise_sigma();
  j["mesh"] = {{"nx", cfg.nx}, {"ny", cfg.ny}};
  j["obs_per_side"] = cfg.obs_per_side;
  j["flux"] = cfg.flux;
  j["redraws"] = c.redraws;
  j["observation_nodes"] = c.model->observation_nodes();
  std::ofstream out(dir + "/provenance.json");
  if (!out) throw std::runtime_error("cannot write " + dir + "/provenance.json");
  out << j.dump(2) << "\n";
}

}  // namespace rmap
