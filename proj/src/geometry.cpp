#include "mmoment/geometry.hpp"
#include "mmoment/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mmoment {

ConvexBody ConvexBody::euclid_ball(int n) {
    ConvexBody b;
    b.kind_ = BodyKind::euclid_ball;
    b.dim_ = n;
    b.q_gauge_ = 2.0;
    b.q_conv_ = 2.0;
    b.lambda_conv_ = 1.0;
    b.radius_ = 1.0;
    return b;
}

ConvexBody ConvexBody::lq_ball(int n, double q) {
    if (q < 2.0) throw domain_error("lq_ball: q must be >= 2");
    ConvexBody b;
    b.kind_ = BodyKind::lq_ball;
    b.dim_ = n;
    b.q_gauge_ = q;
    b.q_conv_ = q;       // Clarkson
    b.lambda_conv_ = 1.0;
    b.radius_ = std::pow(double(n), 0.5 - 1.0 / q);
    return b;
}

ConvexBody ConvexBody::ellipsoid(const Mat& shape) {
    ConvexBody b;
    b.kind_ = BodyKind::ellipsoid;
    b.dim_ = shape.rows;
    b.q_conv_ = 2.0;
    b.lambda_conv_ = 1.0;
    b.shape_ = shape;
    b.shape_inv_ = spd_inverse(shape);
    b.radius_ = std::sqrt(sym_eig_extreme(shape).lambda_max);
    return b;
}

ConvexBody ConvexBody::h_ball(const Mat& change_of_basis) {
    // gauge(z) = |W z|_2 with W the change of basis; shape = (W^T W)^{-1}
    const Mat m = matmul(transpose(change_of_basis), change_of_basis);
    ConvexBody b = ellipsoid(spd_inverse(m));
    b.kind_ = BodyKind::h_ball;
    return b;
}

std::string ConvexBody::descriptor() const {
    std::ostringstream os;
    switch (kind_) {
        case BodyKind::euclid_ball: os << "euclid_ball"; break;
        case BodyKind::lq_ball: os << "lq_ball(q=" << q_gauge_ << ")"; break;
        case BodyKind::ellipsoid: os << "ellipsoid"; break;
        case BodyKind::h_ball: os << "h_ball"; break;
    }
    return os.str();
}

double ConvexBody::gauge(const Vec& x) const {
    switch (kind_) {
        case BodyKind::euclid_ball:
            return norm2(x);
        case BodyKind::lq_ball: {
            const double m = max_abs(x);
            if (m == 0.0) return 0.0;
            double s = 0.0;
            for (double v : x) s += std::pow(std::fabs(v) / m, q_gauge_);
            return m * std::pow(s, 1.0 / q_gauge_);
        }
        case BodyKind::ellipsoid:
        case BodyKind::h_ball: {
            const double q = dot(x, matvec(shape_inv_, x));
            return std::sqrt(std::max(0.0, q));
        }
    }
    return 0.0;
}

double ConvexBody::dual_gauge(const Vec& x) const {
    switch (kind_) {
        case BodyKind::euclid_ball:
            return norm2(x);
        case BodyKind::lq_ball: {
            const double qs = q_gauge_ / (q_gauge_ - 1.0);
            const double m = max_abs(x);
            if (m == 0.0) return 0.0;
            double s = 0.0;
            for (double v : x) s += std::pow(std::fabs(v) / m, qs);
            return m * std::pow(s, 1.0 / qs);
        }
        case BodyKind::ellipsoid:
        case BodyKind::h_ball: {
            const double q = dot(x, matvec(shape_, x));
            return std::sqrt(std::max(0.0, q));
        }
    }
    return 0.0;
}

Vec ConvexBody::gauge_grad(const Vec& x) const {
    const int n = dim_;
    switch (kind_) {
        case BodyKind::euclid_ball: {
            const double r = norm2(x);
            if (r == 0.0) return Vec(n, 0.0);
            return vscale(x, 1.0 / r);
        }
        case BodyKind::lq_ball: {
            const double g = gauge(x);
            if (g == 0.0) return Vec(n, 0.0);
            Vec grad(n);
            for (int i = 0; i < n; ++i) {
                const double t = x[i];
                grad[i] = std::pow(std::fabs(t) / g, q_gauge_ - 1.0) * ((t >= 0.0) ? 1.0 : -1.0);
            }
            return grad;
        }
        case BodyKind::ellipsoid:
        case BodyKind::h_ball: {
            const double g = gauge(x);
            if (g == 0.0) return Vec(n, 0.0);
            return vscale(matvec(shape_inv_, x), 1.0 / g);
        }
    }
    return Vec(n, 0.0);
}

Vec ConvexBody::to_gauge_sphere(const Vec& x) const {
    const double g = gauge(x);
    if (g == 0.0) throw domain_error("to_gauge_sphere: zero vector");
    return vscale(x, 1.0 / g);
}

Vec sample_on_gauge_sphere(const ConvexBody& body, RngStream& rng) {
    Vec x(body.dim());
    for (double& v : x) v = rng.next_gaussian();
    return body.to_gauge_sphere(x);
}

Vec sample_in_body(const ConvexBody& body, RngStream& rng) {
    Vec x = sample_on_gauge_sphere(body, rng);
    const double r = std::pow(rng.next_uniform(), 1.0 / body.dim());
    return vscale(x, r);
}

QuasiMetricContext::QuasiMetricContext(const SampleMatrix& s, double p_in)
    : points(s.rows), p(p_in) {
    if (p < 2.0) throw domain_error("QuasiMetricContext: p must be >= 2");
    if (points.rows < 1) throw domain_error("QuasiMetricContext: empty sample");
}

QuasiMetricContext::QuasiMetricContext(Mat pts, double p_in) : points(std::move(pts)), p(p_in) {
    if (p < 2.0) throw domain_error("QuasiMetricContext: p must be >= 2");
    if (points.rows < 1) throw domain_error("QuasiMetricContext: empty sample");
}

double QuasiMetricContext::d_quasi(const Vec& y, const Vec& ybar) const {
    const double e = 2.0 * (p - 1.0);
    KahanSum sum;
    for (int j = 0; j < points.rows; ++j) {
        const double* xj = points.row_ptr(j);
        const double a = dot(xj, y);
        const double b = dot(xj, ybar);
        const double diff = a - b;
        sum.add(diff * diff * (std::pow(std::fabs(a), e) + std::pow(std::fabs(b), e)));
    }
    return std::sqrt(std::max(0.0, sum.value()));
}

double QuasiMetricContext::dtilde(const Vec& y, const Vec& ybar) const {
    KahanSum sum;
    for (int j = 0; j < points.rows; ++j) {
        const double* xj = points.row_ptr(j);
        const double t = std::pow(std::fabs(dot(xj, y)), p) - std::pow(std::fabs(dot(xj, ybar)), p);
        sum.add(t * t);
    }
    return std::sqrt(std::max(0.0, sum.value()));
}

double QuasiMetricContext::sup_norm_inf(const Vec& x) const {
    double m = 0.0;
    for (int j = 0; j < points.rows; ++j)
        m = std::max(m, std::fabs(dot(points.row_ptr(j), x)));
    return m;
}

double QuasiMetricContext::eu_norm(const Vec& u, const Vec& z) const {
    const double e = 2.0 * (p - 1.0);
    KahanSum sum;
    for (int j = 0; j < points.rows; ++j) {
        const double* xj = points.row_ptr(j);
        const double a = dot(xj, z);
        sum.add(a * a * std::pow(std::fabs(dot(xj, u)), e));
    }
    return std::sqrt(std::max(0.0, sum.value()));
}

double QuasiMetricContext::weight_sum(const Vec& z) const {
    const double e = 2.0 * (p - 1.0);
    KahanSum sum;
    for (int j = 0; j < points.rows; ++j)
        sum.add(std::pow(std::fabs(dot(points.row_ptr(j), z)), e));
    return sum.value();
}

double QuasiMetricContext::max_row_norm() const {
    double m = 0.0;
    for (int j = 0; j < points.rows; ++j) m = std::max(m, norm2(points.row(j)));
    return m;
}

namespace {

// slack of "lhs <= rhs" relative to the larger magnitude
double rel_slack(double lhs, double rhs) {
    const double scale = std::max({std::fabs(lhs), std::fabs(rhs), 1e-300});
    return (lhs - rhs) / scale;
}

void record(InequalityLine& line, double lhs, double rhs, double tol,
            const std::vector<double>& inputs) {
    ++line.trials;
    const double s = rel_slack(lhs, rhs);
    if (s > line.worst_slack) {
        line.worst_slack = s;
        line.worst_inputs = inputs;
    }
    if (s > tol) ++line.violations;
}

double log_uniform_signed(RngStream& rng) {
    const double mag = std::exp(std::log(1e-6) + rng.next_uniform() * (std::log(1e6) - std::log(1e-6)));
    return rng.next_sign() * mag;
}

double f_two_point(double s, double t, double p) {
    return std::fabs(s - t) *
           std::sqrt(std::pow(std::fabs(s), 2.0 * p - 2.0) + std::pow(std::fabs(t), 2.0 * p - 2.0));
}

} // namespace

InequalityReport check_scalar_inequalities(double p, long trials, RngStream rng) {
    if (trials < 1) throw domain_error("check_scalar_inequalities: trials must be >= 1");
    const double tol = 1e-12;
    std::ostringstream tag;
    tag << "[p=" << p << "]";
    InequalityLine power_diff;
    power_diff.id = "power_diff" + tag.str();
    InequalityLine chain;
    chain.id = "chain" + tag.str();
    InequalityLine midpoint;
    midpoint.id = "midpoint" + tag.str();

    for (long t = 0; t < trials; ++t) {
        // |x^p - y^p| <= p |x-y| sqrt(x^{2p-2} + y^{2p-2}) on nonnegative reals
        {
            const double x = std::fabs(log_uniform_signed(rng));
            const double y = std::fabs(log_uniform_signed(rng));
            const double lhs = std::fabs(std::pow(x, p) - std::pow(y, p));
            const double rhs = p * std::fabs(x - y) *
                               std::sqrt(std::pow(x, 2.0 * p - 2.0) + std::pow(y, 2.0 * p - 2.0));
            record(power_diff, lhs, rhs, tol, {x, y});
        }
        // chain bound over a random signed tuple
        {
            const int N = 2 + int(rng.next_u64() % 7ull); // 2..8
            std::vector<double> r(N);
            for (double& v : r) v = log_uniform_signed(rng);
            double rhs_sum = 0.0;
            for (int i = 0; i + 1 < N; ++i) rhs_sum += f_two_point(r[i], r[i + 1], p);
            record(chain, f_two_point(r[0], r[N - 1], p), 2.0 * p * rhs_sum, tol, r);
        }
        // midpoint convexity of f^2
        {
            const double r0 = log_uniform_signed(rng);
            const double s = log_uniform_signed(rng);
            const double u = log_uniform_signed(rng);
            const double lhs = f_two_point(r0, 0.5 * (s + u), p);
            const double rhs2 =
                0.5 * (std::pow(f_two_point(r0, s, p), 2) + std::pow(f_two_point(r0, u, p), 2));
            record(midpoint, lhs * lhs, rhs2, tol, {r0, s, u});
        }
    }
    return InequalityReport{{power_diff, chain, midpoint}};
}

InequalityReport check_quasimetric_properties(const QuasiMetricContext& ctx,
                                              const ConvexBody& body, long trials,
                                              RngStream rng) {
    if (trials < 1) throw domain_error("check_quasimetric_properties: trials must be >= 1");
    const double tol = 1e-10;
    const double p = ctx.p;
    std::ostringstream tag;
    tag << "[p=" << p << "]";
    InequalityLine tri;
    tri.id = "gen_triangle" + tag.str();
    InequalityLine mid;
    mid.id = "midpoint_convexity" + tag.str();
    InequalityLine supb;
    supb.id = "sup_norm_bound" + tag.str();
    InequalityLine radb;
    radb.id = "radius_bound" + tag.str();
    InequalityLine decomp;
    decomp.id = "eu_decomposition" + tag.str();
    InequalityLine dtil;
    dtil.id = "dtilde_vs_d" + tag.str();

    const double d_radius = body.radius();
    const double max_x = ctx.max_row_norm();
    // computable envelope for sup_{y in K} sum_j |<X_j,y>|^{2p-2}
    double m_hat = 0.0;
    for (int j = 0; j < ctx.count(); ++j)
        m_hat += std::pow(d_radius * norm2(ctx.points.row(j)), 2.0 * p - 2.0);

    for (long t = 0; t < trials; ++t) {
        // (a) generalized triangle inequality along a random chain
        {
            const int N = 2 + int(rng.next_u64() % 7ull);
            std::vector<Vec> u(N);
            for (auto& v : u) v = sample_in_body(body, rng);
            double rhs_sum = 0.0;
            for (int i = 0; i + 1 < N; ++i) rhs_sum += ctx.d_quasi(u[i], u[i + 1]);
            record(tri, ctx.d_quasi(u[0], u[N - 1]), 2.0 * p * rhs_sum, tol, {});
        }
        {
            const Vec x = sample_in_body(body, rng);
            const Vec y = sample_in_body(body, rng);
            const Vec z = sample_in_body(body, rng);
            // (b) midpoint convexity of d^2
            const Vec mid_yz = vscale(vadd(y, z), 0.5);
            const double lhs = std::pow(ctx.d_quasi(x, mid_yz), 2);
            const double rhs =
                0.5 * (std::pow(ctx.d_quasi(x, y), 2) + std::pow(ctx.d_quasi(x, z), 2));
            record(mid, lhs, rhs, tol, {});

            // (c) pointwise sup-norm bound on d^2
            const double diff_inf = ctx.sup_norm_inf(vsub(x, y));
            const double lhs_c = std::pow(ctx.d_quasi(x, y), 2);
            const double rhs_c = diff_inf * diff_inf * (ctx.weight_sum(x) + ctx.weight_sum(y));
            record(supb, lhs_c, rhs_c, tol, {});

            // (d) ||x - y||_inf <= D max_j |X_j|_2 ||x - y||_K
            record(radb, diff_inf, d_radius * max_x * body.gauge(vsub(x, y)), tol, {});

            // (ineg1) dtilde <= p d
            record(dtil, ctx.dtilde(x, y), p * ctx.d_quasi(x, y), tol, {});

            // (e) two-term decomposition around a pinned point, with the envelope
            const Vec u0 = sample_in_body(body, rng);
            const double eu = ctx.eu_norm(u0, vsub(x, y));
            const double g1 = body.gauge(vsub(x, u0));
            const double g2 = body.gauge(vsub(y, u0));
            const double rhs_e =
                2.0 * std::pow(4.0, p - 1.0) *
                (eu * eu + m_hat * diff_inf * diff_inf *
                               (std::pow(g1, 2.0 * p - 2.0) + std::pow(g2, 2.0 * p - 2.0)));
            record(decomp, std::pow(ctx.d_quasi(x, y), 2), rhs_e, tol, {});
        }
    }
    return InequalityReport{{tri, mid, supb, radb, decomp, dtil}};
}

InequalityLine verify_clarkson(const ConvexBody& body, long trials, RngStream rng) {
    const double q = body.uc_power();
    const double lam = body.uc_constant();
    InequalityLine line;
    line.id = "clarkson[q=" + std::to_string(q) + "]";
    const double tol = 1e-10;
    for (long t = 0; t < trials; ++t) {
        Vec x(body.dim()), y(body.dim());
        for (double& v : x) v = rng.next_gaussian();
        for (double& v : y) v = rng.next_gaussian();
        const double lhs = std::pow(body.gauge(vscale(vadd(x, y), 0.5)), q) +
                           std::pow(lam, -q) * std::pow(body.gauge(vscale(vsub(x, y), 0.5)), q);
        const double rhs =
            0.5 * (std::pow(body.gauge(x), q) + std::pow(body.gauge(y), q));
        ++line.trials;
        const double scale = std::max({std::fabs(lhs), std::fabs(rhs), 1e-300});
        const double s = (lhs - rhs) / scale;
        if (s > line.worst_slack) line.worst_slack = s;
        if (s > tol) ++line.violations;
    }
    return line;
}

} // namespace mmoment
