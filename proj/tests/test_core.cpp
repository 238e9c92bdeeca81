#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mmoment/errors.hpp"
#include "mmoment/linalg.hpp"
#include "mmoment/rng.hpp"
#include "test_oracles.hpp"

#include <cmath>

using namespace mmoment;

namespace {

Mat random_symmetric(int n, RngStream& rng, double scale = 1.0) {
    Mat s(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = scale * rng.next_gaussian();
            s(i, j) = s(j, i) = v;
        }
    return s;
}

double eig_residual(const Mat& s, double lambda, const Vec& v) {
    Vec r = matvec(s, v);
    axpy(r, -lambda, v);
    return norm2(r);
}

} // namespace

TEST_CASE("rng determinism and stream independence") {
    RngStream a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    RngStream c(42, 8);
    int same = 0;
    RngStream a2(42, 7);
    for (int i = 0; i < 1000; ++i)
        if (a2.next_u64() == c.next_u64()) ++same;
    CHECK(same == 0);

    // substream derivation is pure
    RngStream base(1, 0);
    CHECK(base.substream(3).next_u64() == base.substream(3).next_u64());

    // uniform draws live in [0,1) and have a sane mean
    RngStream u(9, 0);
    double mean = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double x = u.next_uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        mean += x;
    }
    mean /= 100000;
    CHECK(std::fabs(mean - 0.5) < 0.01);
}

TEST_CASE("gaussian draws match the first two moments") {
    RngStream rng(5, 0);
    double m1 = 0.0, m2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.next_gaussian();
        m1 += g;
        m2 += g * g;
    }
    m1 /= n;
    m2 /= n;
    CHECK(std::fabs(m1) < 0.01);
    CHECK(std::fabs(m2 - 1.0) < 0.02);
}

TEST_CASE("sym_eig_extreme on identity") {
    const ExtremeEig e = sym_eig_extreme(Mat::identity(3));
    CHECK(e.lambda_min == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.lambda_max == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sym_eig_extreme on diag(2,-5)") {
    Mat s(2, 2);
    s(0, 0) = 2.0;
    s(1, 1) = -5.0;
    const ExtremeEig e = sym_eig_extreme(s);
    CHECK(e.lambda_min == doctest::Approx(-5.0).epsilon(1e-12));
    CHECK(e.lambda_max == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::fabs(std::fabs(e.v_max[0]) - 1.0) < 1e-12);
    CHECK(std::fabs(e.v_max[1]) < 1e-12);
}

TEST_CASE("random symmetric 4x4 matches the companion-root oracle") {
    RngStream rng(11, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const Mat s = random_symmetric(4, rng);
        const EigResult r = sym_eig_all(s);
        const auto oracle = oracles::sym_eigenvalues_by_roots(s);
        for (int k = 0; k < 4; ++k)
            CHECK(r.values[k] == doctest::Approx(oracle[k]).epsilon(1e-8));
        // eigenpair residuals
        for (int k = 0; k < 4; ++k) {
            Vec v(4);
            for (int i = 0; i < 4; ++i) v[i] = r.vectors(i, k);
            CHECK(eig_residual(s, r.values[k], v) <= 1e-9 * (1.0 + std::fabs(r.values[k])));
            CHECK(norm2(v) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("eigenvalues shift by c under S + cI") {
    RngStream rng(13, 0);
    const Mat s = random_symmetric(6, rng);
    Mat shifted = s;
    const double c = 3.25;
    for (int i = 0; i < 6; ++i) shifted(i, i) += c;
    const ExtremeEig a = sym_eig_extreme(s);
    const ExtremeEig b = sym_eig_extreme(shifted);
    CHECK(b.lambda_min == doctest::Approx(a.lambda_min + c).epsilon(1e-9));
    CHECK(b.lambda_max == doctest::Approx(a.lambda_max + c).epsilon(1e-9));
}

TEST_CASE("non-symmetric input is rejected") {
    Mat s(2, 2);
    s(0, 1) = 1.0;
    s(1, 0) = 2.0;
    CHECK_THROWS_AS(sym_eig_all(s), domain_error);
}

TEST_CASE("cholesky_whiten identities") {
    CHECK(max_entry_diff(cholesky_whiten(Mat::identity(4)), Mat::identity(4)) < 1e-12);

    Mat d(2, 2);
    d(0, 0) = 4.0;
    d(1, 1) = 9.0;
    const Mat w = cholesky_whiten(d);
    CHECK(w(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(std::fabs(w(0, 1)) < 1e-15);
}

TEST_CASE("whitening a random PD matrix") {
    RngStream rng(17, 0);
    Mat a(5, 5);
    for (double& v : a.a) v = rng.next_gaussian();
    Mat sigma = matmul(transpose(a), a);
    for (int i = 0; i < 5; ++i) sigma(i, i) += 1.0;
    const Mat w = cholesky_whiten(sigma);
    const Mat res = matmul(matmul(w, sigma), transpose(w));
    CHECK(max_entry_diff(res, Mat::identity(5)) <= 1e-9);
}

TEST_CASE("non-PD covariance reports lambda_min") {
    Mat s(2, 2);
    s(0, 0) = 1.0;
    s(1, 1) = -0.5;
    try {
        cholesky_whiten(s);
        CHECK(false);
    } catch (const domain_error& e) {
        CHECK(std::string(e.what()).find("lambda_min") != std::string::npos);
    }
}

TEST_CASE("whiten composed with sample covariance is near identity") {
    RngStream rng(23, 0);
    Mat a(3, 3);
    for (double& v : a.a) v = rng.next_gaussian();
    Mat sigma = matmul(transpose(a), a);
    for (int i = 0; i < 3; ++i) sigma(i, i) += 0.5;
    const Mat l = cholesky(sigma);
    const Mat w = cholesky_whiten(sigma);

    Mat cov(3, 3);
    const int m = 200000;
    for (int j = 0; j < m; ++j) {
        Vec g(3);
        for (double& v : g) v = rng.next_gaussian();
        const Vec x = matvec(l, g);        // covariance sigma
        const Vec y = matvec(w, x);        // whitened
        add_outer(cov, 1.0 / m, y);
    }
    CHECK(max_entry_diff(cov, Mat::identity(3)) < 0.05);
}

TEST_CASE("project_sphere basics") {
    const Vec r = project_sphere({3.0, 4.0});
    CHECK(r[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(0.8).epsilon(1e-12));

    const Vec u = project_sphere({1.0, 0.0, 0.0});
    CHECK(u[0] == doctest::Approx(1.0).epsilon(1e-12));

    Vec tiny(3, 0.0);
    tiny[0] = 1e-150;
    const Vec t = project_sphere(tiny);
    CHECK(t[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(norm2(t) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(project_sphere(Vec(2, 0.0)), domain_error);
}

TEST_CASE("kahan summation survives adversarial magnitudes") {
    KahanSum s;
    s.add(1e16);
    for (int i = 0; i < 10000; ++i) s.add(1.0);
    s.add(-1e16);
    CHECK(s.value() == doctest::Approx(10000.0).epsilon(1e-12));
}
