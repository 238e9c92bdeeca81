#pragma once

#include "mmoment/linalg.hpp"
#include "mmoment/models.hpp"
#include "mmoment/rng.hpp"

#include <string>
#include <vector>

namespace mmoment {

enum class BodyKind { euclid_ball, lq_ball, ellipsoid, h_ball };

// Symmetric convex body as a gauge/dual-gauge oracle with declared
// uniform-convexity parameters (power q_conv, constant lambda_conv) and
// circumscribed Euclidean radius D.
class ConvexBody {
  public:
    static ConvexBody euclid_ball(int n);
    static ConvexBody lq_ball(int n, double q); // q >= 2
    static ConvexBody ellipsoid(const Mat& shape); // {x : x^T shape^{-1} x <= 1}
    // Unit ball of the Euclidean structure H attached to a Lewis decomposition,
    // expressed in working coordinates (an ellipsoid with shape (M)^{-1}).
    static ConvexBody h_ball(const Mat& change_of_basis);

    BodyKind kind() const { return kind_; }
    int dim() const { return dim_; }
    double uc_power() const { return q_conv_; }
    double uc_constant() const { return lambda_conv_; }
    double radius() const { return radius_; }
    std::string descriptor() const;

    double gauge(const Vec& x) const;
    double dual_gauge(const Vec& x) const;
    Vec gauge_grad(const Vec& x) const;

    // Shape matrix S of an ellipsoid-type body {x : x^T S^{-1} x <= 1}.
    const Mat& ellipsoid_shape() const { return shape_; }

    // x scaled to the gauge sphere (gauge == 1).
    Vec to_gauge_sphere(const Vec& x) const;

  private:
    ConvexBody() = default;

    BodyKind kind_ = BodyKind::euclid_ball;
    int dim_ = 0;
    double q_gauge_ = 2.0; // exponent of the l_q gauge
    double q_conv_ = 2.0;
    double lambda_conv_ = 1.0;
    double radius_ = 1.0;
    Mat shape_;     // ellipsoid: S
    Mat shape_inv_; // ellipsoid: S^{-1}
};

// Random point on the gauge sphere (Gaussian direction divided by gauge).
Vec sample_on_gauge_sphere(const ConvexBody& body, RngStream& rng);
// Random point in the body: gauge-sphere direction times Uniform^{1/n}.
Vec sample_in_body(const ConvexBody& body, RngStream& rng);

// Fixed sample block X_1..X_m with the moment exponent p; hosts the
// quasi-metric machinery.
struct QuasiMetricContext {
    Mat points; // m x n
    double p;   // >= 2

    QuasiMetricContext(const SampleMatrix& s, double p_in);
    QuasiMetricContext(Mat pts, double p_in);

    int count() const { return points.rows; }
    int dim() const { return points.cols; }

    double d_quasi(const Vec& y, const Vec& ybar) const;
    double dtilde(const Vec& y, const Vec& ybar) const;
    double sup_norm_inf(const Vec& x) const;
    double eu_norm(const Vec& u, const Vec& z) const;
    // S(z) = sum_j |<X_j, z>|^{2p-2}
    double weight_sum(const Vec& z) const;
    double max_row_norm() const;
};

struct InequalityLine {
    std::string id;
    long trials = 0;
    long violations = 0;
    double worst_slack = 0.0; // max over trials of (lhs-rhs)/scale
    std::vector<double> worst_inputs;
};

struct InequalityReport {
    std::vector<InequalityLine> lines;
    bool ok() const {
        for (const auto& l : lines)
            if (l.violations > 0) return false;
        return true;
    }
};

// Scalar inequalities behind the quasi-metric: the p-th power difference
// bound, the chain bound on f(s,t) = |s-t| sqrt(|s|^{2p-2}+|t|^{2p-2}), and
// midpoint convexity of f^2. Random tuples with log-uniform magnitudes in
// [1e-6, 1e6]; violation = relative slack beyond 1e-12.
InequalityReport check_scalar_inequalities(double p, long trials, RngStream rng);

// Vector-level properties of d on random points of the body: generalized
// triangle inequality, midpoint convexity, the pointwise sup-norm bound, the
// Euclidean-times-gauge bound on ||.||_inf, and the two-term decomposition
// with the computable envelope M_hat = sum_j (D |X_j|_2)^{2p-2}. Relative
// slack beyond 1e-10 counts as a violation.
InequalityReport check_quasimetric_properties(const QuasiMetricContext& ctx,
                                              const ConvexBody& body, long trials,
                                              RngStream rng);

// Two-point uniform convexity fuzz with the body's declared (q, lambda).
InequalityLine verify_clarkson(const ConvexBody& body, long trials, RngStream rng);

} // namespace mmoment
