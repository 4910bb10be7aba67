#include "rmap/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rmap {

namespace {

void check_weights(std::size_t n, const std::vector<double>& w) {
  if (w.size() != n) throw std::invalid_argument("weights length mismatch");
  double total = 0;
  for (double wi : w) {
    if (!(wi >= 0) || !std::isfinite(wi))
      throw std::invalid_argument("weights must be finite and nonnegative");
    total += wi;
  }
  if (total <= 0) throw std::invalid_argument("weights sum to zero");
}

bool all_equal(const std::vector<double>& w) {
  for (double wi : w)
    if (wi != w.front()) return false;
  return true;
}

}  // namespace

double iact(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 10) throw std::invalid_argument("iact: series shorter than 10");

  double mean = 0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);

  double c0 = 0;
  for (double x : series) c0 += (x - mean) * (x - mean);
  c0 /= static_cast<double>(n);
  if (c0 == 0) throw std::invalid_argument("iact: constant series");

  auto rho = [&](std::size_t k) {
    double c = 0;
    for (std::size_t i = 0; i + k < n; ++i)
      c += (series[i] - mean) * (series[i + k] - mean);
    return c / (static_cast<double>(n) * c0);
  };

  // tau = -1 + 2 sum_m Gamma_m over the initial positive sequence; the first
  // pair contains rho_0 = 1, hence the -1.
  double tau = -1.0;
  for (std::size_t m = 0; 2 * m < n; ++m) {
    double gamma = rho(2 * m);
    if (2 * m + 1 < n) gamma += rho(2 * m + 1);
    if (gamma <= 0) break;
    tau += 2.0 * gamma;
  }
  return tau;
}

double ess_from_iact(std::size_t n, double mean_iact) {
  if (mean_iact <= 0) throw std::invalid_argument("ess: nonpositive iact");
  return static_cast<double>(n) / mean_iact;
}

double weighted_ess(const std::vector<double>& weights) {
  check_weights(weights.size(), weights);
  double s = 0, s2 = 0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s * s / s2;
}

std::pair<Vector, Vector> moments(const std::vector<Vector>& samples) {
  if (samples.empty()) throw std::invalid_argument("moments: empty chain");
  const Eigen::Index dim = samples.front().size();
  const double n = static_cast<double>(samples.size());

  Vector mean = Vector::Zero(dim);
  for (const Vector& x : samples) mean += x;
  mean /= n;

  Vector var = Vector::Zero(dim);
  if (samples.size() > 1) {
    for (const Vector& x : samples) var += (x - mean).cwiseAbs2();
    var /= n - 1.0;
  }
  return {mean, var};
}

std::pair<Vector, Vector> moments(const std::vector<Vector>& samples,
                                  const std::vector<double>& weights) {
  if (samples.empty()) throw std::invalid_argument("moments: empty chain");
  check_weights(samples.size(), weights);
  if (all_equal(weights)) return moments(samples);

  const Eigen::Index dim = samples.front().size();
  double sw = 0, sw2 = 0;
  for (double w : weights) {
    sw += w;
    sw2 += w * w;
  }

  Vector mean = Vector::Zero(dim);
  for (std::size_t i = 0; i < samples.size(); ++i) mean += weights[i] * samples[i];
  mean /= sw;

  Vector var = Vector::Zero(dim);
  const double denom = sw - sw2 / sw;
  if (denom > 0) {
    for (std::size_t i = 0; i < samples.size(); ++i)
      var += weights[i] * (samples[i] - mean).cwiseAbs2();
    var /= denom;
  }
  return {mean, var};
}

ChainStats chain_stats(const std::vector<Vector>& samples) {
  if (samples.empty()) throw std::invalid_argument("chain_stats: empty chain");
  const Eigen::Index dim = samples.front().size();

  ChainStats stats;
  stats.iact_per_param = Vector(dim);
  std::vector<double> series(samples.size());
  for (Eigen::Index p = 0; p < dim; ++p) {
    for (std::size_t i = 0; i < samples.size(); ++i) series[i] = samples[i][p];
    stats.iact_per_param[p] = iact(series);
  }
  stats.mean_iact = stats.iact_per_param.mean();
  stats.ess = ess_from_iact(samples.size(), stats.mean_iact);
  std::tie(stats.mean, stats.variance) = moments(samples);
  return stats;
}

double convergence_fit(const std::vector<double>& ns,
                       const std::vector<double>& errors) {
  if (ns.size() != errors.size() || ns.size() < 2)
    throw std::invalid_argument("convergence_fit: need matching series");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] > 0) || !(errors[i] > 0))
      throw std::invalid_argument("convergence_fit: nonpositive data");
    if (i > 0 && ns[i] <= ns[i - 1])
      throw std::invalid_argument("convergence_fit: counts not increasing");
  }
  if (ns.back() / ns.front() < 100.0)
    throw std::invalid_argument("convergence_fit: needs two decades of counts");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    double x = std::log(ns[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Histogram histogram(const std::vector<double>& xs, double lo, double hi,
                    int bins, const std::vector<double>& weights) {
  if (xs.empty()) throw std::invalid_argument("histogram: no samples");
  if (!(hi > lo) || bins < 1) throw std::invalid_argument("histogram: bad range");
  std::vector<double> w = weights;
  if (w.empty()) w.assign(xs.size(), 1.0);
  check_weights(xs.size(), w);

  Histogram h;
  h.edges = Vector::LinSpaced(bins + 1, lo, hi);
  h.mass = Vector::Zero(bins);
  double total = 0;
  for (double wi : w) total += wi;
  const double width = (hi - lo) / bins;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < lo || xs[i] >= hi) continue;
    int b = std::min<int>(bins - 1, static_cast<int>((xs[i] - lo) / width));
    h.mass[b] += w[i] / total;
  }
  return h;
}

double tv_distance(const Histogram& hist,
                   const std::function<double(double, double)>& mass_on) {
  double tv = 0, emp_total = 0, ref_total = 0;
  for (Eigen::Index b = 0; b + 1 < hist.edges.size(); ++b) {
    double ref = mass_on(hist.edges[b], hist.edges[b + 1]);
    tv += std::abs(hist.mass[b] - ref);
    emp_total += hist.mass[b];
    ref_total += ref;
  }
  tv += std::abs((1.0 - emp_total) - (1.0 - ref_total));
  return 0.5 * tv;
}

}  // namespace rmap
