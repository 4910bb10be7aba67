#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "rmap/types.hpp"

namespace rmap {

// Integrated autocorrelation time tau = 1 + 2 sum_k rho_k with Geyer's
// initial-positive-sequence truncation: lags are consumed in pairs
// Gamma_m = rho_{2m} + rho_{2m+1} while those sums stay positive. ACF uses
// the biased 1/n normalization. Needs length >= 10 and a nonconstant series.
double iact(const std::vector<double>& series);

// Standard effective sample sizes.
double ess_from_iact(std::size_t n, double mean_iact);
// (sum w)^2 / sum w^2; uniform weights give n back.
double weighted_ess(const std::vector<double>& weights);

// Componentwise mean and variance. The unweighted estimator is the usual
// unbiased one; the weighted variant is self-normalized with the
// reliability-weight correction sum_w - sum_w2 / sum_w, which reduces to the
// unweighted estimator for equal weights (taken as a bitwise shortcut).
std::pair<Vector, Vector> moments(const std::vector<Vector>& samples);
std::pair<Vector, Vector> moments(const std::vector<Vector>& samples,
                                  const std::vector<double>& weights);

// Per-parameter IACT, their mean, and ESS = n / mean_iact (exact identity).
struct ChainStats {
  Vector iact_per_param;
  double mean_iact = 0;
  double ess = 0;
  Vector mean;
  Vector variance;
};
ChainStats chain_stats(const std::vector<Vector>& samples);

// Least-squares slope of log(error) against log(n). Requires positive
// errors, increasing counts, and at least two decades of n.
double convergence_fit(const std::vector<double>& ns,
                       const std::vector<double>& errors);

// Uniform-bin weighted histogram, masses normalized by the total weight of
// all samples (mass falling outside [lo, hi] is not rebinned, so the bin
// masses need not sum to one).
struct Histogram {
  Vector edges;  // bins + 1 ascending edges
  Vector mass;   // normalized mass per bin
};
Histogram histogram(const std::vector<double>& xs, double lo, double hi,
                    int bins, const std::vector<double>& weights = {});

// Total variation distance between a histogram and a reference measure given
// by its mass on each bin; the two out-of-range tails count as one extra cell.
double tv_distance(const Histogram& hist,
                   const std::function<double(double, double)>& mass_on);

}  // namespace rmap
