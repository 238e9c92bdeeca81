#pragma once

// Test-only oracles, independent of the library's implementation paths.

#include "mmoment/linalg.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace oracles {

// Characteristic polynomial coefficients by the Faddeev-LeVerrier recursion:
// det(tI - S) = t^n + c[n-1] t^{n-1} + ... + c[0].
inline std::vector<double> char_poly(const mmoment::Mat& s) {
    using namespace mmoment;
    const int n = s.rows;
    Mat m(n, n);
    std::vector<double> c(n + 1, 0.0);
    c[n] = 1.0;
    Mat am = Mat::identity(n);
    for (int k = 1; k <= n; ++k) {
        am = matmul(s, am);
        double tr = 0.0;
        for (int i = 0; i < n; ++i) tr += am(i, i);
        const double ck = -tr / k;
        c[n - k] = ck;
        for (int i = 0; i < n; ++i) am(i, i) += ck;
    }
    (void)m;
    return c;
}

// All roots of a real polynomial via Durand-Kerner iteration on the companion
// polynomial form (coefficients ascending: a[0] + a[1] x + ...).
inline std::vector<std::complex<double>> poly_roots(const std::vector<double>& coeff) {
    using C = std::complex<double>;
    const int deg = int(coeff.size()) - 1;
    auto eval = [&](C x) {
        C v = 0.0;
        for (int k = deg; k >= 0; --k) v = v * x + coeff[k];
        return v;
    };
    // distinct starting points on a generic circle
    std::vector<C> r(deg);
    const C seed_point(0.4, 0.9);
    C cur = 1.0;
    for (int i = 0; i < deg; ++i) {
        cur *= seed_point;
        r[i] = cur;
    }
    for (int it = 0; it < 500; ++it) {
        double worst = 0.0;
        for (int i = 0; i < deg; ++i) {
            C denom = coeff[deg];
            for (int j = 0; j < deg; ++j)
                if (j != i) denom *= (r[i] - r[j]);
            const C delta = eval(r[i]) / denom;
            r[i] -= delta;
            worst = std::max(worst, std::abs(delta));
        }
        if (worst < 1e-14) break;
    }
    return r;
}

// Real sorted eigenvalues of a symmetric matrix through the two oracles above.
inline std::vector<double> sym_eigenvalues_by_roots(const mmoment::Mat& s) {
    const auto c = char_poly(s);
    const auto roots = poly_roots(c);
    std::vector<double> vals;
    for (const auto& z : roots) vals.push_back(z.real());
    std::sort(vals.begin(), vals.end());
    return vals;
}

// E |g|^p for standard normal g, closed form via the gamma function.
inline double gaussian_abs_moment_closed(double p) {
    return std::pow(2.0, p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(M_PI);
}

// Marginal variance of the uniform measure on the unit l_q ball, closed Beta
// form: B(3/q, (n-1)/q + 1) / B(1/q, (n-1)/q + 1).
inline double lq_marginal_variance_closed(int n, double q) {
    auto logbeta = [](double a, double b) {
        return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    };
    const double e = double(n - 1) / q + 1.0;
    return std::exp(logbeta(3.0 / q, e) - logbeta(1.0 / q, e));
}

// Kolmogorov-Smirnov statistic of a sorted sample against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> sorted, Cdf cdf) {
    const std::size_t m = sorted.size();
    double d = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double f = cdf(sorted[i]);
        d = std::max(d, std::fabs(f - double(i) / m));
        d = std::max(d, std::fabs(double(i + 1) / m - f));
    }
    return d;
}

struct MeanSe {
    double mean;
    double se;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= xs.size();
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    v = (xs.size() > 1) ? v / double(xs.size() - 1) : 0.0;
    return {m, std::sqrt(v / xs.size())};
}

} // namespace oracles
