#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mmoment/errors.hpp"
#include "mmoment/geometry.hpp"
#include "mmoment/models.hpp"
#include "mmoment/optimize.hpp"
#include "test_oracles.hpp"

#include <cmath>

using namespace mmoment;

namespace {

Mat sample_points(int m, int n, std::uint64_t seed) {
    const auto model = RandomVectorModel::gaussian_iso(n);
    return sample(model, m, RngStream(seed, 0)).rows;
}

} // namespace

TEST_CASE("gauge values on the built-in bodies") {
    const auto b2 = ConvexBody::euclid_ball(2);
    CHECK(b2.gauge({3.0, 4.0}) == doctest::Approx(5.0).epsilon(1e-12));

    const auto b4 = ConvexBody::lq_ball(2, 4.0);
    CHECK(b4.gauge({1.0, 1.0}) == doctest::Approx(std::pow(2.0, 0.25)).epsilon(1e-12));

    Mat shape(2, 2);
    shape(0, 0) = 4.0;
    shape(1, 1) = 1.0;
    const auto ell = ConvexBody::ellipsoid(shape);
    CHECK(ell.gauge({1.0, 0.0}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ell.radius() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("dual gauge values") {
    const auto b2 = ConvexBody::euclid_ball(2);
    CHECK(b2.dual_gauge({1.0, 1.0}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    const auto lq2 = ConvexBody::lq_ball(2, 2.0);
    CHECK(lq2.dual_gauge({1.0, 1.0}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    // l_3 dual is l_{3/2}: |(1,1)|_{3/2} = 2^{2/3}
    const auto lq3 = ConvexBody::lq_ball(2, 3.0);
    CHECK(lq3.dual_gauge({1.0, 1.0}) == doctest::Approx(std::pow(2.0, 2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("dual gauge matches net maximization of <x,z> over the body") {
    // sup over gauge(z) <= 1 of <x, z>, brute forced over a fine direction net
    const auto body = ConvexBody::lq_ball(2, 3.0);
    const Vec x = {1.0, 1.0};
    const auto net = net_maximize(
        body, [&](const Vec& z) { return dot(x, z); }, 1e-3, 14, false);
    CHECK(net.value == doctest::Approx(body.dual_gauge(x)).epsilon(1e-8));
}

TEST_CASE("dual of dual recovers the gauge (net route, n <= 3)") {
    for (double q : {2.0, 3.0, 4.0}) {
        const auto body = ConvexBody::lq_ball(3, q);
        RngStream rng(7, std::uint64_t(q));
        for (int t = 0; t < 4; ++t) {
            Vec x(3);
            for (double& v : x) v = rng.next_gaussian();
            // sup over dual_gauge(w) <= 1 of <x, w>, via directions scaled onto
            // the dual sphere
            const auto euclid = ConvexBody::euclid_ball(3);
            const auto net = net_maximize(
                euclid,
                [&](const Vec& u) {
                    const double d = body.dual_gauge(u);
                    if (d == 0.0) return 0.0;
                    return dot(x, u) / d;
                },
                5e-3, 16, false);
            CHECK(net.value == doctest::Approx(body.gauge(x)).epsilon(1e-8));
        }
    }
}

TEST_CASE("polar inequality holds on random pairs") {
    RngStream rng(11, 0);
    for (double q : {2.0, 3.0, 6.0}) {
        const auto body = ConvexBody::lq_ball(4, q);
        for (int t = 0; t < 2000; ++t) {
            Vec x(4), y(4);
            for (double& v : x) v = rng.next_gaussian();
            for (double& v : y) v = rng.next_gaussian();
            CHECK(body.gauge(x) * body.dual_gauge(y) >= dot(x, y) * (1.0 - 1e-12));
        }
    }
}

TEST_CASE("radius bound holds on random unit-gauge points") {
    RngStream rng(13, 0);
    std::vector<ConvexBody> bodies;
    bodies.push_back(ConvexBody::euclid_ball(4));
    bodies.push_back(ConvexBody::lq_ball(4, 3.0));
    Mat shape = Mat::identity(4);
    shape(0, 0) = 9.0;
    shape(1, 1) = 0.25;
    bodies.push_back(ConvexBody::ellipsoid(shape));
    for (const auto& body : bodies) {
        for (int t = 0; t < 1000; ++t) {
            const Vec x = sample_on_gauge_sphere(body, rng);
            CHECK(norm2(x) <= body.radius() * (1.0 + 1e-9));
            CHECK(body.gauge(x) == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("gauge is a norm: homogeneity and triangle on random probes") {
    RngStream rng(17, 0);
    for (double q : {2.0, 2.5, 4.0}) {
        const auto body = ConvexBody::lq_ball(5, q);
        for (int t = 0; t < 2000; ++t) {
            Vec x(5), y(5);
            for (double& v : x) v = rng.next_gaussian();
            for (double& v : y) v = rng.next_gaussian();
            const double c = std::exp(2.0 * rng.next_gaussian());
            CHECK(body.gauge(vscale(x, c)) ==
                  doctest::Approx(c * body.gauge(x)).epsilon(1e-10));
            CHECK(body.gauge(vadd(x, y)) <=
                  (body.gauge(x) + body.gauge(y)) * (1.0 + 1e-10));
        }
    }
}

TEST_CASE("clarkson two-point inequality fuzz per body") {
    std::vector<ConvexBody> bodies;
    bodies.push_back(ConvexBody::euclid_ball(4));
    for (double q : {2.0, 3.0, 4.0, 6.0}) bodies.push_back(ConvexBody::lq_ball(4, q));
    Mat shape = Mat::identity(4);
    shape(2, 2) = 7.0;
    bodies.push_back(ConvexBody::ellipsoid(shape));
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        const auto line = verify_clarkson(bodies[i], 10000, RngStream(19, i));
        CHECK(line.violations == 0);
    }
}

TEST_CASE("quasi-metric values and symmetry") {
    // single point X_1 = e_1, p = 2
    Mat pts(1, 2);
    pts(0, 0) = 1.0;
    const QuasiMetricContext ctx(pts, 2.0);

    const Vec e1 = {1.0, 0.0}, zero = {0.0, 0.0};
    CHECK(ctx.d_quasi(e1, e1) == 0.0);
    CHECK(ctx.d_quasi(e1, zero) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ctx.dtilde(e1, e1) == 0.0);
    CHECK(ctx.dtilde(vscale(e1, 2.0), e1) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(ctx.eu_norm(e1, vscale(e1, 3.0)) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(ctx.eu_norm(zero, e1) == 0.0);
    CHECK(ctx.eu_norm(e1, zero) == 0.0);

    // exact symmetry on random probes
    Mat pts2 = sample_points(6, 3, 23);
    const QuasiMetricContext ctx2(pts2, 3.0);
    RngStream rng(29, 0);
    for (int t = 0; t < 500; ++t) {
        Vec y(3), z(3);
        for (double& v : y) v = rng.next_gaussian();
        for (double& v : z) v = rng.next_gaussian();
        CHECK(ctx2.d_quasi(y, z) == ctx2.d_quasi(z, y));
        CHECK(ctx2.dtilde(y, z) <= ctx2.p * ctx2.d_quasi(y, z) * (1.0 + 1e-12));
    }
}

TEST_CASE("sup norm examples") {
    Mat pts(2, 2);
    pts(0, 0) = 1.0;
    pts(1, 1) = 1.0;
    const QuasiMetricContext ctx(pts, 2.0);
    CHECK(ctx.sup_norm_inf({0.0, 0.0}) == 0.0);
    CHECK(ctx.sup_norm_inf({2.0, -3.0}) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("scalar inequality checker: zero violations across the p grid") {
    for (double p : {2.0, 2.5, 3.0, 4.0, 6.0}) {
        const auto rep = check_scalar_inequalities(p, 20000, RngStream(31, std::uint64_t(p * 2)));
        for (const auto& line : rep.lines) {
            CHECK(line.violations == 0);
            CHECK(line.trials == 20000);
        }
    }
}

TEST_CASE("scalar checker hand case p=2, x=2, y=1") {
    // |4 - 1| = 3 <= 2 * 1 * sqrt(4 + 1)
    const double lhs = std::fabs(4.0 - 1.0);
    const double rhs = 2.0 * std::fabs(2.0 - 1.0) * std::sqrt(std::pow(2.0, 2.0) + 1.0);
    CHECK(lhs <= rhs);
    CHECK(rhs == doctest::Approx(2.0 * std::sqrt(5.0)).epsilon(1e-15));
}

TEST_CASE("quasi-metric property checker: zero violations") {
    for (double p : {2.0, 3.0, 4.0}) {
        Mat pts = sample_points(8, 4, 37 + std::uint64_t(p));
        const QuasiMetricContext ctx(pts, p);
        const auto body = ConvexBody::euclid_ball(4);
        const auto rep =
            check_quasimetric_properties(ctx, body, 2000, RngStream(41, std::uint64_t(p)));
        for (const auto& line : rep.lines) CHECK(line.violations == 0);
    }
}

TEST_CASE("degenerate chains give zero on both sides") {
    Mat pts = sample_points(5, 3, 43);
    const QuasiMetricContext ctx(pts, 2.5);
    const Vec u = {0.3, -0.2, 0.1};
    // chain of identical points
    CHECK(ctx.d_quasi(u, u) == 0.0);
    // N = 2 chain reduces to d <= 2p d
    const Vec v = {0.1, 0.4, -0.3};
    const double d = ctx.d_quasi(u, v);
    CHECK(d <= 2.0 * ctx.p * d * (1.0 + 1e-15));
}

TEST_CASE("kappa-prime pathwise domination by the radius") {
    for (double q : {2.0, 3.0}) {
        const auto body = ConvexBody::lq_ball(4, q);
        const double d_radius = body.radius();
        for (double p : {2.0, 3.0, 4.0}) {
            for (int t = 0; t < 200; ++t) {
                Mat pts = sample_points(8, 4, 1000 * std::uint64_t(p) + t);
                double max_norm = 0.0, max_dual = 0.0;
                for (int j = 0; j < 8; ++j) {
                    max_norm = std::max(max_norm, norm2(pts.row(j)));
                    max_dual = std::max(max_dual, body.dual_gauge(pts.row(j)));
                }
                const double lhs = max_norm * max_norm * std::pow(max_dual, p - 2.0);
                const double rhs = std::pow(d_radius, p - 2.0) * std::pow(max_norm, p);
                CHECK(lhs <= rhs * (1.0 + 1e-12));
            }
        }
    }
}

TEST_CASE("body constructors reject bad input") {
    CHECK_THROWS_AS(ConvexBody::lq_ball(3, 1.5), domain_error);
    Mat bad(2, 2);
    bad(0, 0) = -1.0;
    CHECK_THROWS_AS(ConvexBody::ellipsoid(bad), domain_error);
    CHECK_THROWS_AS(QuasiMetricContext(Mat(1, 1), 1.5), domain_error);
}
