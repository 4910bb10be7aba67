#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "rmap/mesh.hpp"
#include "rmap/fem.hpp"
#include "rmap/linear_problem.hpp"
#include "rmap/prior.hpp"
#include "rmap/rng.hpp"

using rmap::GaussianMeasure;
using rmap::Matrix;
using rmap::Vector;

namespace {

// Dense reference for the operator-power covariance on a mesh, computed
// without any eigensolve. The covariance operator is alpha^-1 A^-s with
// A = M^-1 K + I acting on the mass-weighted space; the Euclidean matrix of
// nodal covariances E[uu'] is then alpha^-1 A^-s M^-1 = alpha^-1 (M A^s)^-1.
Matrix dense_power_covariance(const rmap::Mesh& mesh, double alpha, int s) {
    Matrix m = Matrix(rmap::assemble_mass(mesh));
    Matrix k = Matrix(rmap::assemble_stiffness(mesh));
    Matrix a = m.ldlt().solve(k) + Matrix::Identity(m.rows(), m.cols());
    Matrix apow = Matrix::Identity(m.rows(), m.cols());
    for (int i = 0; i < s; ++i) apow = apow * a;
    return (m * apow).partialPivLu().solve(Matrix::Identity(m.rows(), m.cols())) / alpha;
}

} // namespace

TEST_CASE("matrix transfer prior matches dense operator power") {
    auto mesh = rmap::make_interval_mesh(12);
    const double alpha = 3.0;
    const int s = 2;
    auto prior = GaussianMeasure::matrix_transfer(mesh, Vector::Zero(13), alpha, s);

    Matrix c_ref = dense_power_covariance(mesh, alpha, s);
    Matrix c = prior.dense_covariance();
    CHECK((c - c_ref).norm() < 1e-10 * c_ref.norm());
}

TEST_CASE("covariance eigenvalues follow the shifted Laplacian spectrum") {
    auto mesh = rmap::make_interval_mesh(16);
    const double alpha = 8.0;
    const int s = 2;
    auto prior = GaussianMeasure::matrix_transfer(mesh, Vector::Zero(17), alpha, s);

    Matrix m = Matrix(rmap::assemble_mass(mesh));
    Matrix k = Matrix(rmap::assemble_stiffness(mesh));
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(k, m);
    REQUIRE(ges.info() == Eigen::Success);
    Vector mu = ges.eigenvalues(); // ascending, mu_0 ~ 0 for Neumann

    Vector var = prior.mode_variances(); // descending
    REQUIRE(var.size() == mu.size());
    for (int i = 0; i < var.size(); ++i) {
        double expected = std::pow(1.0 + mu[i], -s) / alpha;
        CHECK(var[i] == doctest::Approx(expected).epsilon(1e-10));
    }
    // Constant function is the leading mode with variance exactly 1/alpha.
    CHECK(var[0] == doctest::Approx(1.0 / alpha).epsilon(1e-12));
    Vector ones = Vector::Ones(prior.dim());
    Vector c_ones = prior.apply_c(ones);
    CHECK((c_ones - ones / alpha).norm() < 1e-10);
}

TEST_CASE("modes are orthonormal in the mass inner product") {
    auto mesh = rmap::make_interval_mesh(10);
    auto prior = GaussianMeasure::matrix_transfer(mesh, Vector::Zero(11), 2.0, 2);
    const Matrix& v = prior.kl_modes();
    Matrix gram(v.cols(), v.cols());
    for (int i = 0; i < v.cols(); ++i)
        for (int j = 0; j < v.cols(); ++j)
            gram(i, j) = prior.inner(v.col(i), v.col(j));
    CHECK((gram - Matrix::Identity(v.cols(), v.cols())).norm() < 1e-10);
}

TEST_CASE("covariance operator identities") {
    auto mesh = rmap::make_interval_mesh(14);
    auto prior = GaussianMeasure::matrix_transfer(mesh, Vector::Zero(15), 4.0, 2);
    rmap::Rng rng(99);
    Vector x = rng.normal_vector(prior.dim());

    SUBCASE("cinv inverts c") {
        // eigensolver roundoff is amplified by the spread of the variances
        Vector y = prior.apply_cinv(prior.apply_c(x));
        CHECK((y - x).norm() < 1e-8 * x.norm());
        Vector z = prior.apply_c(prior.apply_cinv(x));
        CHECK((z - x).norm() < 1e-8 * x.norm());
    }
    SUBCASE("csqrt squares to c") {
        Vector y = prior.apply_csqrt(prior.apply_csqrt(x));
        Vector z = prior.apply_c(x);
        CHECK((y - z).norm() < 1e-8 * z.norm());
    }
    SUBCASE("cinvsqrt inverts csqrt") {
        Vector y = prior.apply_cinvsqrt(prior.apply_csqrt(x));
        CHECK((y - x).norm() < 1e-8 * x.norm());
    }
    SUBCASE("c is self adjoint in the mass inner product") {
        Vector w = rng.normal_vector(prior.dim());
        double lhs = prior.inner(w, prior.apply_c(x));
        double rhs = prior.inner(prior.apply_c(w), x);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
    SUBCASE("quadratic form of constant field") {
        // Constants are eigenfunctions with covariance eigenvalue 1/alpha,
        // so <v, Cinv v>_M = alpha * ||v||_M^2.
        Vector v = 3.0 * Vector::Ones(prior.dim());
        double q = prior.inner(v, prior.apply_cinv(v));
        CHECK(q == doctest::Approx(4.0 * prior.norm(v) * prior.norm(v)).epsilon(1e-10));
    }
}

TEST_CASE("prior quadratic form matches dense covariance solve") {
    auto mesh = rmap::make_interval_mesh(9);
    Vector mean = Vector::Constant(10, 0.7);
    auto prior = GaussianMeasure::matrix_transfer(mesh, mean, 5.0, 2);
    rmap::Rng rng(7);
    Vector u = mean + rng.normal_vector(10);
    Vector delta = u - mean;

    double q_op = prior.inner(delta, prior.apply_cinv(delta));
    Matrix c = prior.dense_covariance();
    double q_dense = delta.dot(c.partialPivLu().solve(delta));
    CHECK(q_op == doctest::Approx(q_dense).epsilon(1e-10));
}

TEST_CASE("sampling statistics match the covariance") {
    auto mesh = rmap::make_interval_mesh(8);
    Vector mean = Vector::LinSpaced(9, -1.0, 1.0);
    auto prior = GaussianMeasure::matrix_transfer(mesh, mean, 2.0, 2);
    const int n = 20000;
    rmap::Rng rng(2024);

    Vector acc_mean = Vector::Zero(9);
    Vector acc_var = Vector::Zero(9); // variance of spectral coefficients
    for (int i = 0; i < n; ++i) {
        Vector u = prior.sample(rng);
        acc_mean += u;
        Vector b = prior.to_spectral(u - mean);
        acc_var += b.cwiseProduct(b);
    }
    acc_mean /= n;
    acc_var /= n;

    Vector var = prior.mode_variances();
    for (int i = 0; i < 9; ++i) {
        // Monte Carlo: 5 sigma bands.
        double se_mean = std::sqrt(var.sum()) / std::sqrt(double(n));
        CHECK(std::abs(acc_mean[i] - mean[i]) < 5.0 * se_mean);
        double se_var = var[i] * std::sqrt(2.0 / n);
        CHECK(std::abs(acc_var[i] - var[i]) < 5.0 * se_var);
    }
}

TEST_CASE("zero coefficients reproduce the mean exactly") {
    auto mesh = rmap::make_interval_mesh(6);
    Vector mean = Vector::Constant(7, 1.25);
    auto prior = GaussianMeasure::matrix_transfer(mesh, mean, 3.0, 2);
    Vector u = mean + prior.from_standard_normal(Vector::Zero(7));
    for (int i = 0; i < 7; ++i) CHECK(u[i] == mean[i]);
}

TEST_CASE("truncated prior lives in the leading modes") {
    auto mesh = rmap::make_interval_mesh(12);
    auto full = GaussianMeasure::matrix_transfer(mesh, Vector::Zero(13), 2.0, 2);
    auto trunc = GaussianMeasure::matrix_transfer(mesh, Vector::Zero(13), 2.0, 2, false, 4);
    CHECK(trunc.retained_modes() == 4);

    rmap::Rng rng(11);
    Vector u = trunc.sample(rng);
    Vector b = full.to_spectral(u);
    for (int i = 4; i < 13; ++i) CHECK(std::abs(b[i]) < 1e-12);

    // apply_c agrees with the full operator on the retained subspace.
    Vector x = full.kl_modes().col(2);
    CHECK((trunc.apply_c(x) - full.apply_c(x)).norm() < 1e-12);
    // and annihilates the discarded one.
    Vector y = full.kl_modes().col(7);
    CHECK(trunc.apply_c(y).norm() < 1e-12);
}

TEST_CASE("dense construction reproduces the given covariance") {
    rmap::Rng rng(5);
    Matrix c_in = rmap::random_spd_matrix(6, rng);
    Vector mean = rng.normal_vector(6);
    auto prior = GaussianMeasure::from_dense(mean, c_in);

    CHECK_FALSE(prior.has_mass());
    CHECK((prior.dense_covariance() - c_in).norm() < 1e-10 * c_in.norm());

    Vector x = rng.normal_vector(6);
    CHECK((prior.apply_c(x) - c_in * x).norm() < 1e-10 * (c_in * x).norm());
    Vector y = c_in.ldlt().solve(x);
    CHECK((prior.apply_cinv(x) - y).norm() < 1e-8 * y.norm());
}

TEST_CASE("invalid constructions are rejected") {
    rmap::Rng rng(3);
    SUBCASE("non positive definite dense covariance") {
        Matrix bad = Matrix::Identity(3, 3);
        bad(2, 2) = -1.0;
        CHECK_THROWS(GaussianMeasure::from_dense(Vector::Zero(3), bad));
    }
    SUBCASE("nonpositive alpha") {
        auto mesh = rmap::make_interval_mesh(4);
        CHECK_THROWS(GaussianMeasure::matrix_transfer(mesh, Vector::Zero(5), 0.0, 2));
    }
    SUBCASE("mean dimension mismatch") {
        auto mesh = rmap::make_interval_mesh(4);
        CHECK_THROWS(GaussianMeasure::matrix_transfer(mesh, Vector::Zero(4), 1.0, 2));
    }
}

TEST_CASE("lumped mass variant stays consistent") {
    auto mesh = rmap::make_unit_square_mesh(5, 5);
    auto prior = GaussianMeasure::matrix_transfer(mesh, Vector::Zero(36), 8.0, 2, true);
    rmap::Rng rng(17);
    Vector x = rng.normal_vector(36);
    Vector y = prior.apply_cinv(prior.apply_c(x));
    CHECK((y - x).norm() < 1e-9 * x.norm());
    // leading eigenvalue still 1/alpha: constants are in the kernel of K.
    CHECK(prior.mode_variances()[0] == doctest::Approx(1.0 / 8.0).epsilon(1e-10));
}
