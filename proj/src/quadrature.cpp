#include "mmoment/quadrature.hpp"
#include "mmoment/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

namespace mmoment {

double integrate_finite(const std::function<double(double)>& f, double a, double b,
                        double rel_tol) {
    // x = mid + half*tanh(pi/2 sinh(t)), truncated at |t| <= 3.8 where the
    // weight has decayed below double precision for smooth integrands.
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double t_max = 3.8;
    const double half_pi = 0.5 * std::numbers::pi;

    auto level_sum = [&](double h, bool odd_only) {
        double s = 0.0;
        const int k_max = int(t_max / h);
        for (int k = -k_max; k <= k_max; ++k) {
            if (odd_only && (k % 2 == 0)) continue;
            const double t = k * h;
            const double sh = half_pi * std::sinh(t);
            const double ch = std::cosh(sh);
            const double x = mid + half * std::tanh(sh);
            const double w = half_pi * std::cosh(t) / (ch * ch);
            if (!(w > 0.0) || !std::isfinite(x)) continue;
            const double fx = f(x);
            if (std::isfinite(fx)) s += w * fx;
        }
        return s;
    };

    double h = 0.5;
    double sum = level_sum(h, false);
    double prev = h * half * sum;
    for (int level = 0; level < 10; ++level) {
        h *= 0.5;
        sum += level_sum(h, true);
        const double cur = h * half * sum;
        if (level >= 2 && std::fabs(cur - prev) <= rel_tol * (std::fabs(cur) + 1e-300))
            return cur;
        prev = cur;
    }
    return prev;
}

namespace {

double gamma_p_series(double a, double x, double lg) {
    double term = 1.0 / a;
    double sum = term;
    for (int k = 1; k < 500; ++k) {
        term *= x / (a + k);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
}

double gamma_q_contfrac(double a, double x, double lg) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - lg) * h;
}

} // namespace

double lower_gamma_reg(double a, double x) {
    if (a <= 0.0) throw domain_error("lower_gamma_reg: shape must be positive");
    if (x <= 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) return gamma_p_series(a, x, lg);
    return 1.0 - gamma_q_contfrac(a, x, lg);
}

double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) throw domain_error("normal_quantile: u outside (0,1)");
    // Acklam's rational approximation
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    double x;
    if (u < plow) {
        const double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    } else if (u <= phigh) {
        const double q = u - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }
    // one Halley step against erfc
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - u;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    const double un = e / pdf;
    x -= un / (1.0 + 0.5 * x * un);
    return x;
}

double gamma_quantile(double a, double u) {
    if (!(u >= 0.0 && u < 1.0)) throw domain_error("gamma_quantile: u outside [0,1)");
    if (u == 0.0) return 0.0;
    const double lg = std::lgamma(a);

    // Wilson-Hilferty start, with small-x fallback P(a,x) ~ x^a / (a Gamma(a))
    double x;
    {
        const double z = normal_quantile(u);
        const double t = 1.0 - 1.0 / (9.0 * a) + z / (3.0 * std::sqrt(a));
        x = (t > 0.0) ? a * t * t * t : 0.0;
        if (x <= 0.0 || a < 0.2)
            x = std::exp((std::log(u) + lg + std::log(a)) / a);
        if (!(x > 0.0) || !std::isfinite(x)) x = a;
    }

    double lo = 0.0, hi = -1.0; // hi < 0 means "not yet bracketed above"
    for (int it = 0; it < 100; ++it) {
        const double p = lower_gamma_reg(a, x) - u;
        if (p > 0.0) hi = (hi < 0.0) ? x : std::min(hi, x);
        else lo = std::max(lo, x);
        const double logpdf = (a - 1.0) * std::log(x) - x - lg;
        double step;
        if (logpdf < -700.0) {
            step = 0.0; // pdf underflow: fall back to bisection
        } else {
            step = p / std::exp(logpdf);
        }
        double xn = x - step;
        if (!(xn > lo) || (hi > 0.0 && !(xn < hi)) || step == 0.0)
            xn = (hi > 0.0) ? 0.5 * (lo + hi) : x * 2.0;
        if (std::fabs(xn - x) <= 1e-13 * (x + 1e-300)) { x = xn; break; }
        x = xn;
    }
    return x;
}

GammaQuantileTable::GammaQuantileTable(double a, int grid_points) : a_(a) {
    if (a <= 0.0) throw domain_error("GammaQuantileTable: shape must be positive");
    lgamma_a_ = std::lgamma(a);
    u_lo_ = 1.0 / 1048576.0; // 2^-20
    u_hi_ = 1.0 - u_lo_;
    const int n = grid_points;
    step_ = (u_hi_ - u_lo_) / n;
    x_.resize(n + 1);
    slope_.resize(n + 1);
    for (int i = 0; i <= n; ++i) x_[i] = gamma_quantile(a, u_lo_ + i * step_);
    // exact derivative dx/du = 1/pdf at the nodes keeps the Hermite pieces monotone
    for (int i = 0; i <= n; ++i) {
        const double x = x_[i];
        const double logpdf = (a - 1.0) * std::log(x) - x - lgamma_a_;
        slope_[i] = std::exp(-logpdf);
    }
}

double GammaQuantileTable::eval(double u) const {
    if (!(u >= 0.0 && u < 1.0)) throw domain_error("GammaQuantileTable: u outside [0,1)");
    if (u <= u_lo_ || u >= u_hi_) return gamma_quantile(a_, u);
    const double s = (u - u_lo_) / step_;
    const int i = std::min(int(s), int(x_.size()) - 2);
    const double t = s - i;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
    const double h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t);
    const double h11 = t * t * (t - 1);
    double x =
        h00 * x_[i] + h10 * step_ * slope_[i] + h01 * x_[i + 1] + h11 * step_ * slope_[i + 1];
    // the true quantile is bracketed by the grid nodes; polish with guarded Newton
    double lo = x_[i], hi = x_[i + 1];
    x = std::clamp(x, lo, hi);
    for (int k = 0; k < 60; ++k) {
        const double p = lower_gamma_reg(a_, x) - u;
        if (p > 0.0) hi = x;
        else lo = x;
        const double logpdf = (a_ - 1.0) * std::log(x) - x - lgamma_a_;
        double xn = (logpdf > -700.0) ? x - p * std::exp(-logpdf) : 0.5 * (lo + hi);
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        const bool done = std::fabs(xn - x) <= 1e-12 * std::max(xn, 1e-300) ||
                          (hi - lo) <= 1e-12 * std::max(hi, 1e-300);
        x = xn;
        if (done) break;
    }
    return x;
}

double gaussian_abs_moment(double p) {
    static std::map<double, double> cache;
    static std::mutex mu;
    {
        std::lock_guard<std::mutex> g(mu);
        auto it = cache.find(p);
        if (it != cache.end()) return it->second;
    }
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const double v = 2.0 * integrate_finite(
                               [&](double t) {
                                   return std::pow(t, p) * inv_sqrt2pi *
                                          std::exp(-0.5 * t * t);
                               },
                               0.0, 45.0, 1e-13);
    std::lock_guard<std::mutex> g(mu);
    cache[p] = v;
    return v;
}

double lq_ball_marginal_variance(int n, double q) {
    if (q < 1.0) throw domain_error("lq_ball_marginal_variance: q must be >= 1");
    // marginal density on [-1,1] proportional to (1 - |t|^q)^((n-1)/q)
    const double expo = double(n - 1) / q;
    auto w = [&](double t) { return std::pow(std::max(0.0, 1.0 - std::pow(t, q)), expo); };
    const double z0 = integrate_finite(w, 0.0, 1.0, 1e-12);
    const double z2 = integrate_finite([&](double t) { return t * t * w(t); }, 0.0, 1.0, 1e-12);
    return z2 / z0;
}

} // namespace mmoment
