#include "rmap/analytical.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rmap/quadrature.hpp"

namespace rmap {

namespace {

constexpr double kNoiseSigma = 0.2;

}  // namespace

AnalyticalPosterior::AnalyticalPosterior(AnalyticKind kind)
    : kind_(kind),
      d_(Vector::Constant(1, kind == AnalyticKind::J1 ? 1.0 : 0.8)),
      prior_(GaussianMeasure::from_dense(
          Vector::Constant(1, kind == AnalyticKind::J1 ? 0.8 : 1.0),
          Matrix::Identity(1, 1))) {
  double z = integrate([this](double u) { return std::exp(-jr(u)); }, bracket_lo,
                       bracket_hi, 1e-12);
  log_z_ = std::log(z);

  // Modes of the unrandomized posterior from the same multi-start machinery.
  std::vector<double> candidates;
  for (double start : critical_starts(0.0, 0.0)) {
    double u;
    if (polish_to_minimum(start, 0.0, 0.0, 1e-13, &u)) candidates.push_back(u);
  }
  std::sort(candidates.begin(), candidates.end());
  for (double u : candidates)
    if (modes_.empty() || u - modes_.back() > 1e-6) modes_.push_back(u);
}

// Damped Newton on the stationarity equation dJ^r/du = 0 with monotone
// |dJ^r| backtracking; accepts only local minima (positive curvature).
bool AnalyticalPosterior::polish_to_minimum(double start, double theta, double eps,
                                            double tol, double* out) const {
  double u = start;
  for (int it = 0;; ++it) {
    double f = djr(u, theta, eps);
    if (std::abs(f) <= tol) break;
    if (it >= 100) return false;
    double h = d2jr(u, theta, eps);
    double step = (std::abs(h) > 1e-300) ? -f / h : -f;
    while (std::abs(djr(u + step, theta, eps)) > (1 - 1e-4) * std::abs(f)) {
      step *= 0.5;
      if (std::abs(step) < 1e-17) return false;
    }
    u = std::clamp(u + step, bracket_lo, bracket_hi);
  }
  if (d2jr(u, theta, eps) <= 0) return false;
  *out = u;
  return true;
}

double AnalyticalPosterior::g(double u) const {
  return kind_ == AnalyticKind::J1 ? u * u : u * u * u;
}

double AnalyticalPosterior::dg(double u) const {
  return kind_ == AnalyticKind::J1 ? 2 * u : 3 * u * u;
}

double AnalyticalPosterior::d2g(double u) const {
  return kind_ == AnalyticKind::J1 ? 2.0 : 6 * u;
}

double AnalyticalPosterior::jr(double u, double theta, double eps) const {
  double dp = u - prior_mean_value() - eps;
  double dm = g(u) - data_value() - theta;
  return 0.5 * dp * dp + 0.5 * dm * dm / (kNoiseSigma * kNoiseSigma);
}

double AnalyticalPosterior::djr(double u, double theta, double eps) const {
  double dm = g(u) - data_value() - theta;
  return (u - prior_mean_value() - eps) + dg(u) * dm / (kNoiseSigma * kNoiseSigma);
}

double AnalyticalPosterior::d2jr(double u, double theta, double /*eps*/) const {
  double dm = g(u) - data_value() - theta;
  return 1.0 + (d2g(u) * dm + dg(u) * dg(u)) / (kNoiseSigma * kNoiseSigma);
}

double AnalyticalPosterior::exact_density(double u) const {
  return std::exp(-jr(u) - log_z_);
}

double AnalyticalPosterior::exact_mass(double a, double b) const {
  return integrate([this](double u) { return exact_density(u); }, a, b, 1e-12);
}

int AnalyticalPosterior::nearest_mode(double u) const {
  int best = 0;
  for (std::size_t k = 1; k < modes_.size(); ++k)
    if (std::abs(u - modes_[k]) < std::abs(u - modes_[best])) best = static_cast<int>(k);
  return best;
}

std::vector<double> AnalyticalPosterior::critical_starts(double theta, double eps) const {
  std::vector<double> starts = {prior_mean_value() + eps, -3.0, 3.0};
  for (double m : modes_) starts.push_back(m);
  // Zero-misfit points g(u) = d + theta, usually inside the winning basin.
  double target = data_value() + theta;
  if (kind_ == AnalyticKind::J1) {
    if (target >= 0) {
      starts.push_back(std::sqrt(target));
      starts.push_back(-std::sqrt(target));
    }
  } else {
    starts.push_back(std::cbrt(target));
  }
  for (double& s : starts) s = std::clamp(s, bracket_lo, bracket_hi);
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-8; }),
               starts.end());
  return starts;
}

double AnalyticalPosterior::minimize_randomized(double theta, double eps,
                                                double tol) const {
  double best_u = 0, best_j = 0;
  bool found = false;
  for (double start : critical_starts(theta, eps)) {
    double u;
    if (!polish_to_minimum(start, theta, eps, tol, &u)) continue;
    double j = jr(u, theta, eps);
    if (!found || j < best_j - 1e-13 * (1 + std::abs(best_j))) {
      best_u = u;
      best_j = j;
      found = true;
    }
  }
  if (!found) {
    std::ostringstream msg;
    msg << "minimize_randomized: no start converged (theta=" << theta
        << ", eps=" << eps << ")";
    throw std::runtime_error(msg.str());
  }
  return best_u;
}

std::unique_ptr<InverseProblem> AnalyticalPosterior::clone() const {
  auto copy = std::make_unique<AnalyticalPosterior>(*this);
  copy->counters() = Counters{};
  copy->invalidate_cache();
  return copy;
}

Vector AnalyticalPosterior::forward_impl(const Vector& u) {
  return Vector::Constant(1, g(u[0]));
}

Vector AnalyticalPosterior::jvp_impl(const Vector& u, const Vector& v) {
  return Vector::Constant(1, dg(u[0]) * v[0]);
}

Vector AnalyticalPosterior::vjp_impl(const Vector& u, const Vector& y) {
  return Vector::Constant(1, dg(u[0]) * y[0]);
}

Vector AnalyticalPosterior::curvature_impl(const Vector& u, const Vector& y,
                                           const Vector& v) {
  return Vector::Constant(1, d2g(u[0]) * y[0] * v[0]);
}

namespace {

// The optimizer operator eps -> S(theta, eps) is piecewise smooth: its value
// jumps where the global minimum switches basins. Locate the switch points by
// a coarse scan plus bisection so the quadrature never straddles a jump.
std::vector<double> locate_jumps(const std::function<double(double)>& s_of_eps) {
  const int cells = 128;
  const double lo = AnalyticalPosterior::bracket_lo;
  const double hi = AnalyticalPosterior::bracket_hi;
  const double gap = 0.5;  // smooth motion per cell stays well below this
  std::vector<double> grid(cells + 1);
  for (int k = 0; k <= cells; ++k)
    grid[k] = s_of_eps(lo + (hi - lo) * k / double(cells));

  std::vector<double> jumps;
  for (int k = 0; k < cells; ++k) {
    if (std::abs(grid[k + 1] - grid[k]) <= gap) continue;
    double a = lo + (hi - lo) * k / double(cells);
    double b = a + (hi - lo) / double(cells);
    double sa = grid[k], sb = grid[k + 1];
    // Bisect on branch membership: within the cell each branch is continuous
    // and the branches stay a gap apart, so nearest-value classification holds.
    while (b - a > 1e-13) {
      double m = 0.5 * (a + b);
      double sm = s_of_eps(m);
      if (std::abs(sm - sa) <= std::abs(sm - sb)) {
        a = m;
        sa = sm;
      } else {
        b = m;
        sb = sm;
      }
    }
    jumps.push_back(0.5 * (a + b));
  }
  return jumps;
}

}  // namespace

double quadrature_expectation_of_optimizer(const AnalyticalPosterior& problem,
                                           int order) {
  if (order < 20)
    throw std::invalid_argument("quadrature_expectation_of_optimizer: order >= 20 required");
  GaussHermiteRule outer = gauss_hermite(order);
  GaussLegendreRule inner = gauss_legendre(order);
  const double sqrt2 = std::sqrt(2.0);
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);

  double acc = 0;
  for (int i = 0; i < order; ++i) {
    double theta = sqrt2 * problem.noise_sigma() * outer.nodes[i];
    auto s_of_eps = [&](double eps) {
      try {
        return problem.minimize_randomized(theta, eps, 1e-10);
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "quadrature node theta[" << i << "] = " << theta
            << ", eps = " << eps << ": " << e.what();
        throw std::runtime_error(msg.str());
      }
    };

    // Panel edges: fixed points resolving the N(0,1) weight plus any global
    // minimum switch points; the integrand is smooth inside each panel.
    std::vector<double> edges = {AnalyticalPosterior::bracket_lo, -4.0, 0.0, 4.0,
                                 AnalyticalPosterior::bracket_hi};
    for (double j : locate_jumps(s_of_eps)) edges.push_back(j);
    std::sort(edges.begin(), edges.end());

    double expect_eps = 0;  // integral of S(theta, .) against the N(0,1) density
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
      double a = edges[k], b = edges[k + 1];
      if (b - a < 1e-12) continue;
      double half = 0.5 * (b - a), mid = 0.5 * (a + b);
      for (int q = 0; q < order; ++q) {
        double eps = mid + half * inner.nodes[q];
        double weight = inv_sqrt_2pi * std::exp(-0.5 * eps * eps);
        expect_eps += half * inner.weights[q] * weight * s_of_eps(eps);
      }
    }
    acc += inv_sqrt_pi * outer.weights[i] * expect_eps;
  }
  return acc;
}

}  // namespace rmap
