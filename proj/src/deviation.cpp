#include "mmoment/deviation.hpp"
#include "mmoment/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmoment {

std::string to_string(DeviationMethod m) {
    switch (m) {
        case DeviationMethod::eig_exact: return "eig_exact";
        case DeviationMethod::grad_restarts: return "grad_restarts";
        case DeviationMethod::net_bruteforce: return "net_bruteforce";
    }
    return "?";
}

double empirical_pth_moment(const SampleMatrix& sample, const Vec& y, double p) {
    if (p < 1.0) throw domain_error("empirical_pth_moment: p must be >= 1");
    KahanSum sum;
    for (int j = 0; j < sample.count(); ++j)
        sum.add(std::pow(std::fabs(dot(sample.rows.row_ptr(j), y)), p));
    return sum.value() / sample.count();
}

Vec empirical_pth_moment_grad(const SampleMatrix& sample, const Vec& y, double p) {
    Vec grad(sample.dim(), 0.0);
    for (int j = 0; j < sample.count(); ++j) {
        const double* xj = sample.rows.row_ptr(j);
        const double t = dot(xj, y);
        const double w = p * std::pow(std::fabs(t), p - 1.0) * ((t >= 0.0) ? 1.0 : -1.0);
        for (int i = 0; i < sample.dim(); ++i) grad[i] += w * xj[i];
    }
    for (double& v : grad) v /= sample.count();
    return grad;
}

namespace {

// empirical second-moment matrix (1/m) sum_j X_j X_j^T
Mat empirical_covariance(const SampleMatrix& s) {
    Mat c(s.dim(), s.dim());
    for (int j = 0; j < s.count(); ++j)
        add_outer(c, 1.0 / s.count(), s.rows.row_ptr(j), s.dim());
    return c;
}

struct SpectralDeviation {
    double value;
    Vec maximizer;
};

// sup_{y in K} |y^T Delta y| for a Euclidean-type body via the spectrum of the
// whitened difference matrix.
SpectralDeviation spectral_sup(const ConvexBody& body, const Mat& delta) {
    Mat t = delta;
    Mat half; // body metric: y = half * u with |u|_2 <= 1
    bool use_half = false;
    if (body.kind() == BodyKind::ellipsoid || body.kind() == BodyKind::h_ball) {
        // gauge(y)^2 = y^T S^{-1} y, so y = S^{1/2} u with |u|_2 <= 1
        half = sym_sqrt(body.ellipsoid_shape());
        t = matmul(matmul(half, delta), half); // half is symmetric
        use_half = true;
    }
    const ExtremeEig e = sym_eig_extreme(t);
    SpectralDeviation out;
    if (std::fabs(e.lambda_min) >= std::fabs(e.lambda_max)) {
        out.value = std::fabs(e.lambda_min);
        out.maximizer = e.v_min;
    } else {
        out.value = std::fabs(e.lambda_max);
        out.maximizer = e.v_max;
    }
    if (use_half) out.maximizer = matvec(half, out.maximizer);
    return out;
}

} // namespace

double sup_exact_moment(const ConvexBody& body, const RandomVectorModel& model, double p,
                        RngStream rng) {
    if (!model.exact_moment_available(p))
        throw domain_error("sup_exact_moment: no exact oracle for " + model.descriptor());
    // Gaussian shortcut: E|<X,y>|^p = gamma_p |W^T y|_2^p is maximized on the
    // gauge sphere; for the plain gaussian on a Euclidean-type body this is
    // gamma_p D^p.
    if (model.kind() == ModelKind::gaussian_iso && body.kind() == BodyKind::euclid_ball)
        return gaussian_abs_moment(p) * std::pow(body.radius(), p);
    if (p == 2.0) {
        const Mat cov = model.covariance();
        return spectral_sup(body, cov).value;
    }
    Objective obj;
    obj.value = [&](const Vec& y) { return *model.exact_pth_moment(y, p); };
    obj.grad = [&](const Vec& y) { return *model.exact_pth_moment_grad(y, p); };
    MaximizeOptions mo;
    mo.restarts = 20 * body.dim();
    const MaximizeResult r = maximize_over_body(body, obj, mo, rng);
    return r.value;
}

DeviationReport deviation_sup(const SampleMatrix& sample, const RandomVectorModel& model,
                              const ConvexBody& body, double p, const DeviationOptions& opts) {
    if (p < 2.0) throw domain_error("deviation_sup: p must be >= 2");
    if (!model.exact_moment_available(p))
        throw domain_error("deviation_sup: exact moment unavailable for model " +
                           model.descriptor());
    const int n = body.dim();
    DeviationMethod method = opts.method;
    if (opts.auto_method) {
        const bool euclidean_type = body.kind() == BodyKind::euclid_ball ||
                                    body.kind() == BodyKind::ellipsoid ||
                                    body.kind() == BodyKind::h_ball;
        if (p == 2.0 && euclidean_type) method = DeviationMethod::eig_exact;
        else if (n <= 3) method = DeviationMethod::net_bruteforce;
        else method = DeviationMethod::grad_restarts;
    }

    DeviationReport rep;
    rep.method = method;

    auto f = [&](const Vec& y) {
        return empirical_pth_moment(sample, y, p) - *model.exact_pth_moment(y, p);
    };

    switch (method) {
        case DeviationMethod::eig_exact: {
            if (p != 2.0) throw domain_error("deviation_sup: eig_exact requires p = 2");
            Mat delta = empirical_covariance(sample);
            const Mat cov = model.covariance();
            for (std::size_t i = 0; i < delta.a.size(); ++i) delta.a[i] -= cov.a[i];
            const SpectralDeviation sd = spectral_sup(body, delta);
            rep.v_p = sd.value;
            rep.maximizer = sd.maximizer;
            break;
        }
        case DeviationMethod::net_bruteforce: {
            const MaximizeResult r =
                net_maximize(body, [&](const Vec& y) { return std::fabs(f(y)); }, opts.net_step);
            rep.v_p = std::fabs(f(r.argmax));
            rep.maximizer = r.argmax;
            break;
        }
        case DeviationMethod::grad_restarts: {
            // ascend on f^2 (smooth through sign changes), report |f|
            Objective obj;
            obj.value = [&](const Vec& y) {
                const double v = f(y);
                return v * v;
            };
            obj.grad = [&](const Vec& y) {
                const double v = f(y);
                Vec g = empirical_pth_moment_grad(sample, y, p);
                const Vec ge = *model.exact_pth_moment_grad(y, p);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * v * (g[i] - ge[i]);
                return g;
            };
            MaximizeOptions mo;
            mo.restarts = (opts.restarts > 0) ? opts.restarts : 50 * n;
            // anchor half of the restarts at normalized sample directions
            std::vector<Vec> anchors;
            for (int j = 0; j < sample.count() && int(anchors.size()) < mo.restarts; ++j) {
                Vec row = sample.rows.row(j);
                const double g = body.gauge(row);
                if (g > 0.0) anchors.push_back(vscale(row, 1.0 / g));
            }
            const MaximizeResult r =
                maximize_over_body(body, obj, mo, RngStream(opts.seed, 0xd37a11ull), anchors);
            rep.v_p = std::fabs(f(r.argmax));
            rep.maximizer = r.argmax;
            rep.restarts_used = r.restarts_used;
            break;
        }
    }

    // bound-side quantities for the report
    double max_norm = 0.0;
    for (int j = 0; j < sample.count(); ++j)
        max_norm = std::max(max_norm, norm2(sample.rows.row(j)));
    rep.kappa = max_norm; // (max |X_j|_2^p)^{1/p} = max |X_j|_2
    BoundQuantities tb =
        bound_quantities(body, model, p, sample.count(), rep.kappa, opts.psi_alpha_norm_x2,
                       opts.alpha, opts.mean_v_p, opts.precomputed_B);
    rep.B = tb.B;
    if (sample.count() >= 2) rep.A = tb.A(opts.constant_C, p);
    if (tb.q_base) rep.Q = opts.constant_c_alpha_p * *tb.q_base;
    return rep;
}

MomentEstimate kappa_pm(const RandomVectorModel& model, double p, int m, int replicas,
                        RngStream rng) {
    if (replicas < 1) throw domain_error("kappa_pm: replicas must be >= 1");
    KahanSum sum, sumsq;
    for (int r = 0; r < replicas; ++r) {
        RngStream rr = rng.substream(std::uint64_t(r));
        double max_norm = 0.0;
        for (int j = 0; j < m; ++j) {
            const Vec x = model.draw(rr);
            max_norm = std::max(max_norm, norm2(x));
        }
        const double v = std::pow(max_norm, p);
        sum.add(v);
        sumsq.add(v * v);
    }
    const double mean = sum.value() / replicas;
    const double var = std::max(0.0, sumsq.value() / replicas - mean * mean);
    const double se_mean = std::sqrt(var / replicas);
    const double value = std::pow(mean, 1.0 / p);
    return {value, se_mean / (p * std::pow(mean, 1.0 - 1.0 / p))};
}

MomentEstimate kappa_prime(const RandomVectorModel& model, const ConvexBody& body, double p,
                           int m, int replicas, RngStream rng) {
    if (p < 2.0) throw domain_error("kappa_prime: p must be >= 2");
    KahanSum sum, sumsq;
    for (int r = 0; r < replicas; ++r) {
        RngStream rr = rng.substream(std::uint64_t(r));
        double max_norm = 0.0, max_dual = 0.0;
        for (int j = 0; j < m; ++j) {
            const Vec x = model.draw(rr);
            max_norm = std::max(max_norm, norm2(x));
            max_dual = std::max(max_dual, body.dual_gauge(x));
        }
        const double v = max_norm * max_norm * std::pow(max_dual, p - 2.0);
        sum.add(v);
        sumsq.add(v * v);
    }
    const double mean = sum.value() / replicas;
    const double var = std::max(0.0, sumsq.value() / replicas - mean * mean);
    const double se_mean = std::sqrt(var / replicas);
    const double value = std::pow(mean, 1.0 / p);
    return {value, se_mean / (p * std::pow(mean, 1.0 - 1.0 / p))};
}

namespace {

double psi_mgf_lambda(const std::vector<double>& sample, double alpha) {
    double zmax = 0.0;
    for (double z : sample) zmax = std::max(zmax, std::fabs(z));
    if (zmax == 0.0) throw domain_error("psi_alpha_norm: all-zero sample");

    auto mean_exp = [&](double lambda) {
        KahanSum s;
        for (double z : sample) {
            const double e = std::pow(std::fabs(z) / lambda, alpha);
            s.add(std::exp(std::min(e, 700.0)));
        }
        return s.value() / double(sample.size());
    };

    // each term <= 2 at hi, so mean <= 2 there
    double hi = zmax * std::pow(1.0 / std::log(2.0), 1.0 / alpha) * (1.0 + 1e-12);
    double lo = hi;
    int guard = 0;
    while (mean_exp(lo) <= 2.0) {
        lo *= 0.5;
        if (++guard > 2000) throw numeric_error("psi_alpha_norm: bisection bracket failure at lo=" +
                                                std::to_string(lo) + " hi=" + std::to_string(hi));
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mean_exp(mid) > 2.0) lo = mid;
        else hi = mid;
        if (hi - lo <= 1e-14 * hi) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace

PsiNormEstimate psi_alpha_norm(const std::vector<double>& sample, double alpha, PsiMethod method,
                               bool with_std_error) {
    if (alpha <= 0.0) throw domain_error("psi_alpha_norm: alpha must be positive");
    if (sample.size() < 1000) throw domain_error("psi_alpha_norm: need at least 10^3 samples");
    PsiNormEstimate est;
    est.alpha = alpha;
    est.method = method;
    est.mc_samples = long(sample.size());

    if (method == PsiMethod::mgf_bisection) {
        est.value = psi_mgf_lambda(sample, alpha);
        if (!with_std_error) {
            if (est.value <= 0.0) throw domain_error("psi_alpha_norm: degenerate sample");
            return est;
        }
        // Sampling spread by two-scale subsampling. The summand exp((|z|/l)^a)
        // can have infinite variance at the crossing point, so sqrt(m) scaling
        // of a block estimate understates the error; instead the decay rate is
        // fitted from block estimates at two block sizes and extrapolated.
        auto block_sd = [&](int blocks) {
            const std::size_t bs = sample.size() / blocks;
            std::vector<double> lam(blocks);
            for (int b = 0; b < blocks; ++b) {
                std::vector<double> part(sample.begin() + b * bs, sample.begin() + (b + 1) * bs);
                lam[b] = psi_mgf_lambda(part, alpha);
            }
            double mean = 0.0;
            for (double l : lam) mean += l;
            mean /= blocks;
            double var = 0.0;
            for (double l : lam) var += (l - mean) * (l - mean);
            return std::sqrt(var / (blocks - 1));
        };
        const double sd_small = block_sd(32); // block size m/32
        const double sd_large = block_sd(8);  // block size m/8
        if (sd_small <= 0.0 || sd_large <= 0.0) {
            est.std_error = 0.0;
        } else {
            double rate = std::log(sd_small / sd_large) / std::log(4.0);
            rate = std::clamp(rate, 0.05, 0.5);
            est.std_error = sd_large * std::pow(1.0 / 8.0, rate);
        }
    } else {
        const int rmax = std::max(1, int(std::ceil(std::log(double(sample.size())))));
        double best = 0.0;
        for (int r = 1; r <= rmax; ++r) {
            KahanSum s;
            for (double z : sample) s.add(std::pow(std::fabs(z), double(r)));
            const double norm_r = std::pow(s.value() / sample.size(), 1.0 / r);
            best = std::max(best, norm_r / std::pow(double(r), 1.0 / alpha));
        }
        est.value = best;
        est.std_error = 0.0;
    }
    if (est.value <= 0.0) throw domain_error("psi_alpha_norm: degenerate sample");
    return est;
}

std::vector<PsiGrowthRow> max_psi_growth(const RandomVectorModel& model, double delta,
                                         const std::vector<long>& m_list, int replicas,
                                         RngStream rng, const std::optional<Vec>& functional) {
    std::vector<PsiGrowthRow> rows;
    for (std::size_t mi = 0; mi < m_list.size(); ++mi) {
        const long m = m_list[mi];
        std::vector<double> maxima(replicas);
        for (int r = 0; r < replicas; ++r) {
            RngStream rr = rng.substream(mi * 1000003ull + std::uint64_t(r));
            double mx = 0.0;
            for (long j = 0; j < m; ++j) {
                const Vec x = model.draw(rr);
                const double z = functional ? std::fabs(dot(*functional, x)) : norm2(x);
                mx = std::max(mx, z);
            }
            maxima[r] = mx;
        }
        const PsiNormEstimate est = psi_alpha_norm(maxima, delta, PsiMethod::mgf_bisection);
        PsiGrowthRow row;
        row.m = m;
        row.psi_of_max = est.value;
        row.ratio_to_log_power =
            (m > 1) ? est.value / std::pow(std::log(double(m)), 1.0 / delta) : est.value;
        rows.push_back(row);
    }
    return rows;
}

BoundQuantities bound_quantities(const ConvexBody& body, const RandomVectorModel& model, double p,
                             long m, double kappa_estimate,
                             const std::optional<double>& psi_alpha_x2,
                             const std::optional<double>& alpha,
                             const std::optional<double>& mean_v_p,
                             const std::optional<double>& precomputed_B) {
    BoundQuantities tb;
    const double qstar = body.uc_power() / (body.uc_power() - 1.0);
    const double logm = (m >= 2) ? std::log(double(m)) : 0.0;
    tb.a_base = std::pow(body.uc_constant(), p) * std::pow(logm, 1.0 / qstar) /
                std::sqrt(double(m)) *
                std::pow(body.radius() * kappa_estimate, p / 2.0);
    tb.B = precomputed_B ? *precomputed_B : sup_exact_moment(body, model, p, RngStream(0xb0, 0));
    if (psi_alpha_x2 && alpha && mean_v_p) {
        tb.q_base = *mean_v_p + std::pow(logm, p / *alpha) / double(m) *
                                    std::pow(body.radius(), p) * std::pow(*psi_alpha_x2, p);
    }
    return tb;
}

} // namespace mmoment
