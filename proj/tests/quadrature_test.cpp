#include <doctest.h>

#include <cmath>

#include "rmap/quadrature.hpp"

using rmap::gauss_hermite;
using rmap::gauss_legendre;
using rmap::integrate;

TEST_CASE("gauss-hermite integrates monomials against exp(-x^2) exactly") {
  // int x^{2k} exp(-x^2) dx = sqrt(pi) (2k-1)!! / 2^k
  auto rule = gauss_hermite(10);
  const double sqrt_pi = std::sqrt(M_PI);
  double m0 = 0, m2 = 0, m4 = 0, m1 = 0, m17 = 0;
  for (int i = 0; i < rule.nodes.size(); ++i) {
    double x = rule.nodes[i], w = rule.weights[i];
    m0 += w;
    m1 += w * x;
    m2 += w * x * x;
    m4 += w * x * x * x * x;
    m17 += w * std::pow(x, 17);
  }
  CHECK(m0 == doctest::Approx(sqrt_pi).epsilon(1e-13));
  CHECK(m1 == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(m2 == doctest::Approx(0.5 * sqrt_pi).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(0.75 * sqrt_pi).epsilon(1e-13));
  CHECK(std::abs(m17) < 1e-7);  // degree 17 < 2*10-1; x^17 amplifies node roundoff
}

TEST_CASE("gauss-hermite order 1 and 2 are the textbook rules") {
  auto r1 = gauss_hermite(1);
  CHECK(r1.nodes[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r1.weights[0] == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-14));

  auto r2 = gauss_hermite(2);
  CHECK(r2.nodes[0] == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-13));
  CHECK(r2.nodes[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-13));
  CHECK(r2.weights[0] == doctest::Approx(0.5 * std::sqrt(M_PI)).epsilon(1e-13));
}

TEST_CASE("adaptive simpson reaches requested accuracy") {
  double v = integrate([](double x) { return std::exp(-x * x); }, -8, 8, 1e-12);
  CHECK(v == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-11));

  double p = integrate([](double x) { return x * x * x - 2 * x + 1; }, 0, 2, 1e-12);
  CHECK(p == doctest::Approx(2.0).epsilon(1e-12));  // exact: 4 - 4 + 2

  double osc = integrate([](double x) { return std::sin(5 * x); }, 0, M_PI, 1e-12);
  CHECK(osc == doctest::Approx(0.4).epsilon(1e-9));  // (1 - cos(5 pi)) / 5

  // full periods integrate to zero; the symmetric start must not fool the
  // refinement control into accepting the coarse zero estimate
  double zero = integrate([](double x) { return std::sin(10 * x); }, 0, M_PI, 1e-12);
  CHECK(std::abs(zero) < 1e-10);
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
  auto r4 = gauss_legendre(4);
  double m0 = 0, m6 = 0, m7 = 0;
  for (int i = 0; i < 4; ++i) {
    double x = r4.nodes[i], w = r4.weights[i];
    m0 += w;
    m6 += w * std::pow(x, 6);
    m7 += w * std::pow(x, 7);
  }
  CHECK(m0 == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(m6 == doctest::Approx(2.0 / 7.0).epsilon(1e-13));  // degree 6 < 2*4-1
  CHECK(std::abs(m7) < 1e-14);

  auto r1 = gauss_legendre(1);  // midpoint rule
  CHECK(r1.nodes[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r1.weights[0] == doctest::Approx(2.0).epsilon(1e-14));
}
