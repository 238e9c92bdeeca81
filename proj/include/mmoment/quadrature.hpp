#pragma once

#include <functional>
#include <vector>

namespace mmoment {

// Tanh-sinh quadrature on [a, b]. Handles endpoint singularities of algebraic
// type; level doubling until the estimate is stable to rel_tol.
double integrate_finite(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-12);

// Regularized lower incomplete gamma P(a, x).
double lower_gamma_reg(double a, double x);

// Inverse of P(a, .) to ~1e-12 relative accuracy (guarded Newton + bisection).
double gamma_quantile(double a, double u);

// Standard normal quantile (rational approximation + one Newton polish).
double normal_quantile(double u);

// Monotone-spline table of u -> gamma_quantile(a, u), with Newton polish on
// evaluation; accuracy 1e-10 relative. Build once per shape a, then eval is
// cheap enough for 10^6-draw sampling.
class GammaQuantileTable {
  public:
    explicit GammaQuantileTable(double a, int grid_points = 2048);
    double eval(double u) const;
    double shape() const { return a_; }

  private:
    double a_;
    double lgamma_a_;
    double u_lo_, u_hi_;
    double step_;
    std::vector<double> x_;     // quantile at grid nodes
    std::vector<double> slope_; // monotone Hermite slopes (d x / d u)
};

// E |g|^p for a standard Gaussian g, computed by quadrature of |t|^p phi(t);
// memoized per p. Relative accuracy ~1e-12.
double gaussian_abs_moment(double p);

// Marginal variance of one coordinate under the uniform measure on the unit
// l_q ball in dimension n, computed as a ratio of two 1-D integrals.
double lq_ball_marginal_variance(int n, double q);

} // namespace mmoment
