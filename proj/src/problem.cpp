#include "rmap/problem.hpp"

namespace rmap {

Randomization InverseProblem::draw_randomization(Rng& rng) const {
  Randomization r;
  r.theta = noise_sigma() * rng.normal_vector(obs_dim());
  r.eps = prior().sample_zero_mean(rng);
  return r;
}

Randomization InverseProblem::zero_randomization() const {
  return {Vector::Zero(obs_dim()), Vector::Zero(param_dim())};
}

std::pair<Vector, Vector> InverseProblem::randomized_args(const Randomization& r) const {
  return {prior().mean() + r.eps, observations() + r.theta};
}

const Vector& InverseProblem::forward_cached(const Vector& u) {
  if (!cache_valid_ || cache_u_.size() != u.size() || cache_u_ != u) {
    cache_g_ = forward_impl(u);
    cache_u_ = u;
    cache_valid_ = true;
    ++counters_.forward;
  }
  return cache_g_;
}

void InverseProblem::invalidate_cache() { cache_valid_ = false; }

double InverseProblem::misfit_plus_prior(const Vector& gu, const Vector& u,
                                         const Vector& u0, const Vector& d) const {
  const double inv_var = 1.0 / (noise_sigma() * noise_sigma());
  Vector delta = u - u0;
  return 0.5 * inv_var * (d - gu).squaredNorm() +
         0.5 * inner(delta, prior().apply_cinv(delta));
}

double InverseProblem::objective(const Vector& u, const Vector& u0, const Vector& d) {
  return misfit_plus_prior(forward_cached(u), u, u0, d);
}

double InverseProblem::randomized_objective(const Vector& u, const Randomization& r) {
  auto [u0, d] = randomized_args(r);
  return objective(u, u0, d);
}

Vector InverseProblem::gradient(const Vector& u, const Vector& u0, const Vector& d) {
  const double inv_var = 1.0 / (noise_sigma() * noise_sigma());
  Vector y = inv_var * (forward_cached(u) - d);
  ++counters_.adjoint;
  return vjp_impl(u, y) + prior().apply_cinv(u - u0);
}

Vector InverseProblem::gradient(const Vector& u, const Randomization& r) {
  auto [u0, d] = randomized_args(r);
  return gradient(u, u0, d);
}

Vector InverseProblem::curvature_impl(const Vector&, const Vector&, const Vector& v) {
  return Vector::Zero(v.size());
}

Vector InverseProblem::hessian_action(const Vector& u, const Vector& /*u0*/,
                                      const Vector& d, const Vector& v) {
  const double inv_var = 1.0 / (noise_sigma() * noise_sigma());
  Vector y = inv_var * (forward_cached(u) - d);
  ++counters_.incremental_forward;
  Vector gv = jvp_impl(u, v);
  ++counters_.incremental_adjoint;
  return vjp_impl(u, inv_var * gv) + curvature_impl(u, y, v) +
         prior().apply_cinv(v);
}

Vector InverseProblem::hessian_action(const Vector& u, const Randomization& r,
                                      const Vector& v) {
  auto [u0, d] = randomized_args(r);
  return hessian_action(u, u0, d, v);
}

Vector InverseProblem::gn_hessian_action(const Vector& u, const Vector& v) {
  const double inv_var = 1.0 / (noise_sigma() * noise_sigma());
  ++counters_.incremental_forward;
  Vector gv = jvp_impl(u, v);
  ++counters_.incremental_adjoint;
  return vjp_impl(u, inv_var * gv) + prior().apply_cinv(v);
}

Vector InverseProblem::apply_jacobian(const Vector& u, const Vector& v) {
  ++counters_.incremental_forward;
  return jvp_impl(u, v);
}

Vector InverseProblem::apply_jacobian_adjoint(const Vector& u, const Vector& y) {
  ++counters_.adjoint;
  return vjp_impl(u, y);
}

}  // namespace rmap
