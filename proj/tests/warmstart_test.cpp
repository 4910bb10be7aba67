#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "rmap/analytical.hpp"
#include "rmap/linear_problem.hpp"
#include "rmap/optimizer.hpp"
#include "rmap/warmstart.hpp"

using rmap::Matrix;
using rmap::Randomization;
using rmap::Vector;
using rmap::WarmStartContext;

namespace {

rmap::LinearProblem make_linear(rmap::Rng& rng, Eigen::Index obs = 5,
                                Eigen::Index n = 4) {
    Matrix b = rmap::random_matrix(obs, n, rng);
    Matrix c = rmap::random_spd_matrix(n, rng);
    Vector u0 = rng.normal_vector(n);
    Vector d = rng.normal_vector(obs);
    return rmap::LinearProblem(b, d, 0.25,
                               rmap::GaussianMeasure::from_dense(u0, c));
}

// G(u) = u + 0.1 sin u is monotone with bounded curvature, so every
// randomized objective stays unimodal, unlike the cubic posterior whose
// randomizations grow a second basin for a noticeable share of draws.
class MildProblem : public rmap::InverseProblem {
 public:
    MildProblem()
        : prior_(rmap::GaussianMeasure::from_dense(Vector::Zero(1),
                                                   Matrix::Identity(1, 1))),
          d_(Vector::Constant(1, 0.5)) {}

    Eigen::Index obs_dim() const override { return 1; }
    double noise_sigma() const override { return 0.2; }
    const Vector& observations() const override { return d_; }
    const rmap::GaussianMeasure& prior() const override { return prior_; }
    std::unique_ptr<rmap::InverseProblem> clone() const override {
        return std::make_unique<MildProblem>();
    }

 protected:
    Vector forward_impl(const Vector& u) override {
        return Vector::Constant(1, u(0) + 0.1 * std::sin(u(0)));
    }
    Vector jvp_impl(const Vector& u, const Vector& v) override {
        return Vector::Constant(1, (1.0 + 0.1 * std::cos(u(0))) * v(0));
    }
    Vector vjp_impl(const Vector& u, const Vector& y) override {
        return Vector::Constant(1, (1.0 + 0.1 * std::cos(u(0))) * y(0));
    }
    Vector curvature_impl(const Vector& u, const Vector& y,
                          const Vector& v) override {
        return Vector::Constant(1, -0.1 * std::sin(u(0)) * y(0) * v(0));
    }

 private:
    rmap::GaussianMeasure prior_;
    Vector d_;
};

}  // namespace

TEST_CASE("sensitivity guess is exact for a linear forward map") {
    rmap::Rng rng(401);
    auto p = make_linear(rng);

    WarmStartContext ctx(p, p.map_point());
    ctx.cg_tol = 1e-12;

    Randomization r1 = p.draw_randomization(rng);
    Vector u1 = p.rmap_sample_closed_form(r1);
    ctx.advance(r1, u1);

    Randomization r2 = p.draw_randomization(rng);
    bool used = false;
    Vector guess = sensitivity_guess(p, ctx, r2, &used);
    Vector exact = p.rmap_sample_closed_form(r2);
    CHECK(used);
    CHECK((guess - exact).norm() <= 1e-8 * (1.0 + exact.norm()));

    // Starting at the exact minimizer the solver only confirms the gradient.
    rmap::SolverConfig cfg;
    auto [u, rep] = rmap::trincg_minimize(p, guess, cfg, r2);
    CHECK(rep.iterations <= 1);
    CHECK((u - exact).norm() <= 1e-6);
}

TEST_CASE("default cg tolerance still tracks the closed form") {
    rmap::Rng rng(402);
    auto p = make_linear(rng);
    WarmStartContext ctx(p, p.map_point());

    Randomization r1 = p.draw_randomization(rng);
    ctx.advance(r1, p.rmap_sample_closed_form(r1));
    Randomization r2 = p.draw_randomization(rng);
    Vector guess = sensitivity_guess(p, ctx, r2);
    Vector exact = p.rmap_sample_closed_form(r2);
    CHECK((guess - exact).norm() <= 1e-4 * (1.0 + exact.norm()));
}

TEST_CASE("repeating the randomization returns the previous sample bitwise") {
    rmap::Rng rng(403);
    auto p = make_linear(rng);
    WarmStartContext ctx(p, p.map_point());

    Randomization r1 = p.draw_randomization(rng);
    Vector u1 = p.rmap_sample_closed_form(r1);
    ctx.advance(r1, u1);

    rmap::Counters before = p.counters();
    bool used = false;
    Vector guess = sensitivity_guess(p, ctx, r1, &used);
    CHECK(used);
    CHECK((p.counters() - before).total() == 0);
    for (Eigen::Index i = 0; i < u1.size(); ++i) CHECK(guess(i) == u1(i));
}

TEST_CASE("first sample and cg failure both fall back to the prior shift") {
    rmap::Rng rng(404);
    auto p = make_linear(rng);
    Vector u0 = p.prior().mean();

    WarmStartContext ctx(p, p.map_point());
    Randomization r1 = p.draw_randomization(rng);
    bool used = true;
    Vector cold = sensitivity_guess(p, ctx, r1, &used);
    CHECK_FALSE(used);
    for (Eigen::Index i = 0; i < cold.size(); ++i)
        CHECK(cold(i) == u0(i) + r1.eps(i));

    // A one-iteration cap cannot reach the tolerance on a 4D system.
    ctx.advance(r1, p.rmap_sample_closed_form(r1));
    ctx.cg_tol = 1e-14;
    ctx.cg_cap = 1;
    Randomization r2 = p.draw_randomization(rng);
    used = true;
    Vector fallback = sensitivity_guess(p, ctx, r2, &used);
    CHECK_FALSE(used);
    for (Eigen::Index i = 0; i < fallback.size(); ++i)
        CHECK(fallback(i) == u0(i) + r2.eps(i));
}

TEST_CASE("random guesses are distributed like the prior") {
    rmap::Rng rng(405);
    auto p = make_linear(rng, 5, 3);
    Matrix cov = p.prior().dense_covariance();
    Vector u0 = p.prior().mean();

    const int n = 20000;
    Vector mean = Vector::Zero(3);
    Matrix second = Matrix::Zero(3, 3);
    for (int i = 0; i < n; ++i) {
        Vector g = rmap::random_guess(p, rng);
        mean += g / n;
        second += (g - u0) * (g - u0).transpose() / n;
    }
    for (Eigen::Index i = 0; i < 3; ++i) {
        double se = std::sqrt(cov(i, i) / n);
        CHECK(std::abs(mean(i) - u0(i)) < 5.0 * se);
    }
    CHECK((second - cov).norm() < 0.1 * cov.norm());
}

TEST_CASE("zero eps start is the prior mean") {
    rmap::Rng rng(406);
    auto p = make_linear(rng);
    Vector g = rmap::guess_from_eps(p, Vector::Zero(4));
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(g(i) == p.prior().mean()(i));
    CHECK_THROWS_AS(rmap::guess_from_eps(p, Vector::Zero(3)),
                    std::invalid_argument);
}

TEST_CASE("prior-distributed starts populate both bimodal basins") {
    rmap::AnalyticalPosterior p(rmap::AnalyticKind::J1);
    rmap::Rng rng(407);
    rmap::SolverConfig cfg;
    cfg.hessian_mode = rmap::HessianMode::Full;

    int left = 0, right = 0, failed = 0;
    for (int i = 0; i < 500; ++i) {
        Randomization r = p.draw_randomization(rng);
        Vector start = rmap::random_guess(p, rng);
        try {
            auto [u, rep] = rmap::trincg_minimize(p, start, cfg, r);
            (u(0) < 0 ? left : right)++;
        } catch (const rmap::SolveFailure&) {
            ++failed;
        }
    }
    CHECK(failed <= 2);
    CHECK(left >= 50);
    CHECK(right >= 50);
}

TEST_CASE("full-rank spectral surrogate matches the cg solve") {
    rmap::Rng rng(408);
    auto p = make_linear(rng);

    WarmStartContext cg_ctx(p, p.map_point());
    cg_ctx.cg_tol = 1e-12;
    WarmStartContext sur_ctx(p, p.map_point(), 4);
    REQUIRE(sur_ctx.has_surrogate());

    Randomization r1 = p.draw_randomization(rng);
    Vector u1 = p.rmap_sample_closed_form(r1);
    cg_ctx.advance(r1, u1);
    sur_ctx.advance(r1, u1);

    Randomization r2 = p.draw_randomization(rng);
    Vector via_cg = sensitivity_guess(p, cg_ctx, r2);
    rmap::Counters before = p.counters();
    Vector via_sur = sensitivity_guess(p, sur_ctx, r2);
    rmap::Counters used = p.counters() - before;
    CHECK((via_cg - via_sur).norm() <= 1e-8 * (1.0 + via_cg.norm()));
    // The surrogate path only pays the adjoint for the right-hand side.
    CHECK(used.adjoint == 1);
    CHECK(used.incremental_forward == 0);
    CHECK(used.incremental_adjoint == 0);
}

TEST_CASE("surrogate rank is validated against the prior") {
    rmap::Rng rng(409);
    auto p = make_linear(rng);
    CHECK_THROWS_AS(WarmStartContext(p, p.map_point(), 5), std::invalid_argument);
    CHECK_THROWS_AS(WarmStartContext(p, p.map_point(), -1), std::invalid_argument);
    CHECK_THROWS_AS(WarmStartContext(p, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("warm and cold starts reach the same samples on a unimodal problem") {
    MildProblem p;
    rmap::SolverConfig cfg;
    cfg.eps_g = 1e-9;
    cfg.hessian_mode = rmap::HessianMode::Full;

    auto [map, map_rep] =
        rmap::trincg_minimize(p, Vector::Constant(1, 0.4), cfg);
    WarmStartContext ctx(p, map);

    rmap::Rng rng(410);
    std::vector<Randomization> rs;
    for (int i = 0; i < 20; ++i) rs.push_back(p.draw_randomization(rng));

    long warm_iters = 0;
    std::vector<Vector> warm;
    for (const auto& r : rs) {
        Vector start = sensitivity_guess(p, ctx, r);
        auto [u, rep] = rmap::trincg_minimize(p, start, cfg, r);
        warm_iters += rep.iterations;
        warm.push_back(u);
        ctx.advance(r, u);
    }

    for (std::size_t i = 0; i < rs.size(); ++i) {
        Vector start = rmap::guess_from_eps(p, rs[i].eps);
        auto [u, rep] = rmap::trincg_minimize(p, start, cfg, rs[i]);
        CHECK((u - warm[i]).norm() <= 1e-6);
    }
    CHECK(warm_iters >= 0);
}
