#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mmoment/deviation.hpp"
#include "mmoment/errors.hpp"
#include "mmoment/geometry.hpp"
#include "mmoment/lewis.hpp"
#include "test_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

using namespace mmoment;

namespace {

void check_invariants(const Subspace& s, const LewisDecomposition& l, double tol = 1e-8) {
    const auto res = l.residuals();
    CHECK(res.unit_norm <= tol);
    CHECK(res.identity <= tol);
    CHECK(res.trace <= tol);
    CHECK(reconstruction_residual(s, l, 200, RngStream(999, 0)) <= tol);
}

} // namespace

TEST_CASE("identity subspace decomposes trivially") {
    const Subspace s = make_subspace(Mat::identity(3), 3.0);
    const auto l = lewis_weights(s);
    for (int i = 0; i < 3; ++i) {
        CHECK(l.weights[i] == doctest::Approx(1.0).epsilon(1e-10));
        for (int j = 0; j < 3; ++j)
            CHECK(std::fabs(std::fabs(l.vectors(i, j)) - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
    check_invariants(s, l);
    // reconstructed norm is the plain l_p norm
    const Vec u = matvec(l.change_of_basis, {1.0, -2.0, 0.5});
    const double expect = std::pow(1.0 + std::pow(2.0, 3.0) + std::pow(0.5, 3.0), 1.0 / 3.0);
    CHECK(l.subspace_norm(u) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("equally spaced rows share the weight by symmetry") {
    const int N = 8;
    Mat b(N, 2);
    for (int k = 0; k < N; ++k) {
        const double th = k * std::numbers::pi / N;
        b(k, 0) = std::cos(th);
        b(k, 1) = std::sin(th);
    }
    const Subspace s = make_subspace(std::move(b), 3.0);
    const auto l = lewis_weights(s);
    for (int k = 0; k < N; ++k)
        CHECK(l.weights[k] == doctest::Approx(2.0 / 8.0).epsilon(1e-8));
    check_invariants(s, l);
}

TEST_CASE("random subspace: fixed point verified and invariants hold") {
    const Subspace s = random_gaussian_subspace(40, 4, 3.0, RngStream(3, 0));
    const auto l = lewis_weights(s, 1e-12);
    check_invariants(s, l);
    // one more sweep from the output moves the weights by at most the tolerance
    const Vec next = lewis_fixed_point_sweep(s, l.weights);
    for (int i = 0; i < 40; ++i)
        CHECK(std::fabs(next[i] - l.weights[i]) <= 1e-8 * std::max(l.weights[i], 1e-10));
}

TEST_CASE("weights are a property of the subspace, not the basis") {
    const Subspace s = random_gaussian_subspace(30, 3, 2.5, RngStream(5, 0));
    // invertible change of basis
    RngStream rng(7, 0);
    Mat r(3, 3);
    for (double& v : r.a) v = rng.next_gaussian();
    for (int i = 0; i < 3; ++i) r(i, i) += 3.0;
    const Subspace s2 = make_subspace(matmul(s.basis, r), 2.5);

    const auto l1 = lewis_weights(s, 1e-12);
    const auto l2 = lewis_weights(s2, 1e-12);
    for (int i = 0; i < 30; ++i)
        CHECK(l1.weights[i] == doctest::Approx(l2.weights[i]).epsilon(1e-6));

    // the vector systems agree up to a joint isometry: Gram matrices match
    for (int i = 0; i < 30; i += 7)
        for (int j = 0; j < 30; j += 5) {
            const double g1 = dot(l1.vectors.row(i), l1.vectors.row(j));
            const double g2 = dot(l2.vectors.row(i), l2.vectors.row(j));
            CHECK(g1 == doctest::Approx(g2).epsilon(1e-6));
        }
}

TEST_CASE("duplicating a row never inflates the other weights at p=2") {
    // Leverage-score monotonicity: adding a row grows A^T A in the PSD order,
    // so every other leverage drops. For p > 2 small increases do occur, so
    // the check is pinned to p = 2 where it is a theorem.
    const Subspace s = random_gaussian_subspace(20, 3, 2.0, RngStream(11, 0));
    const auto l = lewis_weights(s, 1e-12);
    Mat b2(21, 3);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 3; ++j) b2(i, j) = s.basis(i, j);
    for (int j = 0; j < 3; ++j) b2(20, j) = s.basis(4, j);
    const Subspace s2 = make_subspace(std::move(b2), 2.0);
    const auto l2 = lewis_weights(s2, 1e-12);
    for (int i = 0; i < 20; ++i)
        if (i != 4) CHECK(l2.weights[i] <= l.weights[i] + 1e-8);
    // the duplicated pair still carries at most the original row's weight each
    CHECK(l2.weights[4] <= l.weights[4] + 1e-8);
    CHECK(l2.weights[20] <= l.weights[4] + 1e-8);
}

TEST_CASE("p=2 weights are the leverage scores") {
    const Subspace s = random_gaussian_subspace(25, 4, 2.0, RngStream(13, 0));
    const auto l = lewis_weights(s);
    // leverage: a_i^T (A^T A)^{-1} a_i
    Mat g(4, 4);
    for (int i = 0; i < 25; ++i) add_outer(g, 1.0, s.basis.row_ptr(i), 4);
    const Mat ginv = spd_inverse(g);
    for (int i = 0; i < 25; ++i) {
        const Vec ai = s.basis.row(i);
        CHECK(l.weights[i] == doctest::Approx(dot(ai, matvec(ginv, ai))).epsilon(1e-8));
    }
}

TEST_CASE("iteration cap raises a convergence error") {
    const Subspace s = random_gaussian_subspace(25, 3, 3.0, RngStream(211, 0));
    CHECK_THROWS_AS(lewis_weights(s, 1e-14, 1), numeric_error);
}

TEST_CASE("rank-deficient basis is rejected") {
    Mat b(4, 2);
    b(0, 0) = 1.0;
    b(1, 0) = 2.0;
    b(2, 0) = -1.0;
    b(3, 0) = 0.5; // second column identically zero
    CHECK_THROWS_AS(make_subspace(std::move(b), 2.0), domain_error);
}

TEST_CASE("stratified control mode has rounding-level distortion") {
    const Subspace s = random_gaussian_subspace(30, 3, 3.0, RngStream(17, 0));
    const auto l = lewis_weights(s, 1e-12);
    EmbedOptions opts;
    opts.stratified = true;
    const long m = 200000;
    const auto rep = embed_sample(l, m, RngStream(19, 0), opts);
    const double slack = 4.0 * double(s.ambient()) / double(m) * double(s.dim());
    CHECK(rep.eps_H <= slack);
    CHECK(rep.eps_E <= slack);
    long total = 0;
    for (long c : rep.atom_counts) total += c;
    CHECK(total == m);
}

TEST_CASE("identity subspace embedding matches the spectral oracle") {
    const Subspace s = make_subspace(Mat::identity(2), 2.0);
    const auto l = lewis_weights(s);
    const auto rep = embed_sample(l, 10000, RngStream(23, 0));
    // recompute the spectral distortion directly from the counts
    Mat emp(2, 2);
    for (int i = 0; i < 2; ++i) {
        Vec yi = l.vectors.row(i);
        add_outer(emp, 2.0 * double(rep.atom_counts[i]) / 10000.0, yi);
    }
    const ExtremeEig e = sym_eig_extreme(emp);
    const double expect = std::max(std::fabs(e.lambda_min - 1.0), std::fabs(e.lambda_max - 1.0));
    CHECK(rep.eps_H == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("embedding eps_H agrees with the deviation module's spectral path") {
    const Subspace s = random_gaussian_subspace(25, 3, 3.0, RngStream(29, 0));
    const auto l = lewis_weights(s);
    const long m = 5000;
    const auto rep = embed_sample(l, m, RngStream(31, 0));

    // rebuild the realized sample (sqrt(n) * atoms with multiplicity) and push it
    // through deviation_sup's eig route against the atom model at p = 2
    std::vector<Vec> atoms;
    std::vector<double> probs;
    for (int i = 0; i < 25; ++i) {
        atoms.push_back(vscale(l.vectors.row(i), std::sqrt(3.0)));
        probs.push_back(l.weights[i] / 3.0);
    }
    const auto model = RandomVectorModel::discrete_atoms(atoms, probs);
    std::vector<Vec> rows;
    for (int i = 0; i < 25; ++i)
        for (long c = 0; c < rep.atom_counts[i]; ++c) rows.push_back(atoms[i]);
    const auto sm = sample_from_rows(rows, model.descriptor());
    DeviationOptions opts;
    opts.method = DeviationMethod::eig_exact;
    opts.auto_method = false;
    const auto dev = deviation_sup(sm, model, ConvexBody::euclid_ball(3), 2.0, opts);
    CHECK(std::fabs(dev.v_p - rep.eps_H) <= 1e-10);
}

TEST_CASE("median eps_E decreases along the m sweep") {
    const Subspace s = random_gaussian_subspace(30, 3, 3.0, RngStream(37, 0));
    const auto l = lewis_weights(s);
    const std::vector<long> ms = {250, 1000, 4000, 16000};
    std::vector<double> medians;
    for (std::size_t mi = 0; mi < ms.size(); ++mi) {
        std::vector<double> es;
        for (int r = 0; r < 20; ++r) {
            const auto rep =
                embed_sample(l, ms[mi], RngStream(41, 100 * mi + r));
            es.push_back(rep.eps_E);
        }
        std::sort(es.begin(), es.end());
        medians.push_back(es[10]);
    }
    for (std::size_t k = 0; k + 1 < medians.size(); ++k) CHECK(medians[k + 1] <= medians[k]);
}

TEST_CASE("vacuous accuracy target reports bounded fractions") {
    const Subspace s = random_gaussian_subspace(12, 3, 3.0, RngStream(43, 0));
    const auto rows = embedding_calibration_sweep(s, 2.0, 5, RngStream(47, 0));
    CHECK(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.m >= 1);
        CHECK(r.success_fraction >= 0.0);
        CHECK(r.success_fraction <= 1.0);
    }
}

TEST_CASE("identity subspace at p=2: success improves with the calibration constant") {
    const Subspace s = make_subspace(Mat::identity(4), 2.0);
    const auto rows = embedding_calibration_sweep(s, 0.35, 40, RngStream(53, 0));
    CHECK(rows[0].calibration == 1.0);
    CHECK(rows[2].calibration == 16.0);
    CHECK(rows[2].median_eps_e <= rows[0].median_eps_e + 1e-12);
    CHECK(rows[2].success_fraction >= rows[0].success_fraction);
}

TEST_CASE("h_ball body matches the decomposition's Euclidean structure") {
    const Subspace s = random_gaussian_subspace(20, 3, 3.0, RngStream(61, 0));
    const auto l = lewis_weights(s);
    const auto body = ConvexBody::h_ball(l.change_of_basis);
    CHECK(body.kind() == BodyKind::h_ball);
    CHECK(body.uc_power() == 2.0);
    CHECK(body.uc_constant() == 1.0);
    RngStream rng(67, 0);
    for (int t2 = 0; t2 < 200; ++t2) {
        Vec z(3);
        for (double& v : z) v = rng.next_gaussian();
        const double expect = norm2(matvec(l.change_of_basis, z));
        CHECK(body.gauge(z) == doctest::Approx(expect).epsilon(1e-9));
    }
    // unit-gauge points stay within the declared radius
    for (int t2 = 0; t2 < 200; ++t2) {
        const Vec x = sample_on_gauge_sphere(body, rng);
        CHECK(norm2(x) <= body.radius() * (1.0 + 1e-9));
    }
    const auto clark = verify_clarkson(body, 5000, RngStream(71, 0));
    CHECK(clark.violations == 0);
}

TEST_CASE("subspace and decomposition files round trip at 17 digits") {
    const Subspace s = random_gaussian_subspace(9, 2, 2.5, RngStream(59, 0));
    const std::string sp = "test_subspace_roundtrip.txt";
    save_subspace_file(sp, s);
    const Subspace s2 = load_subspace_file(sp);
    CHECK(s2.p == s.p);
    for (std::size_t i = 0; i < s.basis.a.size(); ++i) CHECK(s2.basis.a[i] == s.basis.a[i]);
    std::remove(sp.c_str());

    const auto l = lewis_weights(s);
    const std::string lp = "test_decomp_roundtrip.txt";
    save_decomposition_file(lp, l);
    const auto l2 = load_decomposition_file(lp);
    for (std::size_t i = 0; i < l.vectors.a.size(); ++i) CHECK(l2.vectors.a[i] == l.vectors.a[i]);
    for (int i = 0; i < l.ambient(); ++i) CHECK(l2.weights[i] == l.weights[i]);
    std::remove(lp.c_str());

    CHECK_THROWS_AS(load_subspace_file("missing_subspace.txt"), domain_error);
}
