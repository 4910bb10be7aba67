#include <doctest.h>

#include <cmath>
#include <vector>

#include "rmap/diagnostics.hpp"
#include "rmap/rng.hpp"

using namespace rmap;

namespace {

std::vector<double> iid_series(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> xs(n);
  for (double& x : xs) x = rng.normal();
  return xs;
}

std::vector<double> ar1_series(std::uint64_t seed, std::size_t n, double rho) {
  Rng rng(seed);
  std::vector<double> xs(n);
  double x = 0;
  const double sd = std::sqrt(1.0 - rho * rho);
  for (double& v : xs) {
    x = rho * x + sd * rng.normal();
    v = x;
  }
  return xs;
}

}  // namespace

TEST_CASE("iact of an iid series is one") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    double tau = iact(iid_series(seed, 100000));
    CHECK(tau > 0.95);
    CHECK(tau < 1.1);
  }
}

TEST_CASE("iact of an AR(1) series matches (1+rho)/(1-rho)") {
  // theory value 19 at rho = 0.9; the estimator itself carries a few
  // percent of noise at this length
  for (std::uint64_t seed : {4ull, 5ull}) {
    double tau = iact(ar1_series(seed, 200000, 0.9));
    CHECK(tau > 19.0 * 0.85);
    CHECK(tau < 19.0 * 1.15);
  }
}

TEST_CASE("iact is invariant under affine maps of the series") {
  std::vector<double> xs = ar1_series(6, 20000, 0.8);
  std::vector<double> ys(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = -3.5 * xs[i] + 11.0;
  CHECK(iact(ys) == doctest::Approx(iact(xs)).epsilon(1e-12));
}

TEST_CASE("iact rejects degenerate input") {
  CHECK_THROWS_AS(iact(std::vector<double>(5, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(iact(std::vector<double>(100, 2.5)), std::invalid_argument);
}

TEST_CASE("chain_stats ties ess to n over mean iact") {
  Rng rng(7);
  std::vector<Vector> samples(5000);
  for (Vector& s : samples) s = rng.normal_vector(3);
  ChainStats st = chain_stats(samples);
  CHECK(st.iact_per_param.size() == 3);
  CHECK(st.mean_iact == doctest::Approx(st.iact_per_param.mean()).epsilon(1e-15));
  CHECK(st.ess == doctest::Approx(5000.0 / st.mean_iact).epsilon(1e-15));
  CHECK(st.mean.norm() < 0.1);
  CHECK((st.variance - Vector::Ones(3)).norm() < 0.1);
}

TEST_CASE("weighted_ess") {
  CHECK(weighted_ess(std::vector<double>(400, 0.25)) == doctest::Approx(400.0));
  std::vector<double> onehot(50, 0.0);
  onehot[17] = 3.0;
  CHECK(weighted_ess(onehot) == doctest::Approx(1.0));
  CHECK_THROWS_AS(weighted_ess({1.0, -0.5}), std::invalid_argument);
  CHECK_THROWS_AS(weighted_ess({0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("moments: unweighted estimator") {
  std::vector<Vector> xs;
  for (double v : {1.0, 2.0, 3.0, 6.0}) xs.push_back(Vector::Constant(2, v));
  auto [mean, var] = moments(xs);
  CHECK(mean[0] == doctest::Approx(3.0));
  CHECK(var[1] == doctest::Approx((4.0 + 1.0 + 0.0 + 9.0) / 3.0));

  std::vector<Vector> same(12, Vector::Constant(1, 4.25));
  auto [m2, v2] = moments(same);
  CHECK(m2[0] == 4.25);
  CHECK(v2[0] == 0.0);
}

TEST_CASE("moments: equal weights reproduce the unweighted path bitwise") {
  Rng rng(8);
  std::vector<Vector> xs(101);
  for (Vector& x : xs) x = rng.normal_vector(4);
  auto [m0, v0] = moments(xs);
  auto [m1, v1] = moments(xs, std::vector<double>(xs.size(), 0.37));
  CHECK((m0.array() == m1.array()).all());
  CHECK((v0.array() == v1.array()).all());
}

TEST_CASE("moments: weighted case against a hand computation") {
  std::vector<Vector> xs = {Vector::Constant(1, 1.0), Vector::Constant(1, 2.0),
                            Vector::Constant(1, 4.0)};
  std::vector<double> w = {1.0, 2.0, 1.0};
  // mean = 9/4; var = sum w (x - mean)^2 / (sw - sw2/sw) with sw = 4, sw2 = 6
  auto [mean, var] = moments(xs, w);
  CHECK(mean[0] == doctest::Approx(2.25));
  const double num = 1.0 * 1.5625 + 2.0 * 0.0625 + 1.0 * 3.0625;
  CHECK(var[0] == doctest::Approx(num / (4.0 - 6.0 / 4.0)));

  CHECK_THROWS_AS(moments(xs, std::vector<double>{1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(moments(xs, std::vector<double>{1.0, -1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("convergence_fit recovers exact power laws") {
  std::vector<double> ns, errs, half;
  for (int k = 2; k <= 6; ++k) {
    ns.push_back(std::pow(10.0, k));
    errs.push_back(3.0 * std::pow(10.0, -0.5 * k));
    half.push_back(7.0);
  }
  CHECK(convergence_fit(ns, errs) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(convergence_fit(ns, half) == doctest::Approx(0.0));

  CHECK_THROWS_AS(convergence_fit({100, 1000}, {1.0, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(convergence_fit({100, 50, 10000}, {1.0, 0.5, 0.1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(convergence_fit({100, 1000, 10000}, {1.0, 0.0, 0.1}),
                  std::invalid_argument);
}

TEST_CASE("histogram: hand case with out-of-range mass") {
  std::vector<double> xs = {0.1, 0.1, 0.7, 1.3, -2.0};
  Histogram h = histogram(xs, 0.0, 1.0, 2);
  CHECK(h.edges.size() == 3);
  CHECK(h.mass[0] == doctest::Approx(0.4));  // two of five in [0, 0.5)
  CHECK(h.mass[1] == doctest::Approx(0.2));
  CHECK(h.mass.sum() == doctest::Approx(0.6));  // 1.3 and -2.0 fall outside

  Histogram hw = histogram(xs, 0.0, 1.0, 2, {1.0, 1.0, 2.0, 0.0, 0.0});
  CHECK(hw.mass[0] == doctest::Approx(0.5));
  CHECK(hw.mass[1] == doctest::Approx(0.5));

  CHECK_THROWS_AS(histogram({}, 0.0, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(histogram(xs, 1.0, 0.0, 4), std::invalid_argument);
}

TEST_CASE("tv_distance: zero against itself, one against disjoint mass") {
  std::vector<double> xs = {0.1, 0.3, 0.55, 0.9, 0.97};
  Histogram h = histogram(xs, 0.0, 1.0, 4);
  auto own = [&](double a, double b) {
    double m = 0;
    for (double x : xs) m += (x >= a && x < b) ? 0.2 : 0.0;
    return m;
  };
  CHECK(tv_distance(h, own) == doctest::Approx(0.0).epsilon(1e-14));

  auto elsewhere = [](double, double) { return 0.0; };  // all reference mass outside
  CHECK(tv_distance(h, elsewhere) == doctest::Approx(1.0));
}
