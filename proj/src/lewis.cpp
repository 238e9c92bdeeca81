#include "mmoment/lewis.hpp"
#include "mmoment/errors.hpp"
#include "mmoment/geometry.hpp"
#include "mmoment/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace mmoment {

Subspace make_subspace(Mat basis, double p) {
    if (p < 2.0) throw domain_error("make_subspace: p must be >= 2");
    if (basis.rows < basis.cols) throw domain_error("make_subspace: N must be >= n");
    Subspace s{std::move(basis), p};
    // rank check through the spectrum of basis^T basis
    Mat g(s.dim(), s.dim());
    for (int i = 0; i < s.ambient(); ++i) add_outer(g, 1.0, s.basis.row_ptr(i), s.dim());
    const ExtremeEig e = sym_eig_extreme(g);
    if (!(e.lambda_min > 1e-20 * e.lambda_max))
        throw domain_error("make_subspace: basis is rank deficient");
    return s;
}

Subspace random_gaussian_subspace(int N, int n, double p, RngStream rng) {
    Mat b(N, n);
    for (double& v : b.a) v = rng.next_gaussian();
    return make_subspace(std::move(b), p);
}

Vec lewis_fixed_point_sweep(const Subspace& s, const Vec& weights) {
    const int N = s.ambient(), n = s.dim();
    const double p = s.p;
    Mat m(n, n);
    for (int i = 0; i < N; ++i)
        add_outer(m, std::pow(std::max(weights[i], 1e-14), 1.0 - 2.0 / p), s.basis.row_ptr(i), n);
    // jitter when near singular
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += m(i, i);
    Mat l;
    try {
        l = cholesky(m);
    } catch (const domain_error&) {
        for (int i = 0; i < n; ++i) m(i, i) += 1e-12 * tr / n;
        l = cholesky(m);
    }
    Vec next(N);
    for (int i = 0; i < N; ++i) {
        const Vec ai = s.basis.row(i);
        const double lev = dot(ai, chol_solve(l, ai));
        next[i] = std::pow(std::max(lev, 0.0), p / 2.0);
    }
    return next;
}

LewisDecomposition lewis_weights(const Subspace& s, double tol, int max_iter) {
    const int N = s.ambient(), n = s.dim();
    const double p = s.p;
    const double theta = (p < 4.0) ? 1.0 : 2.0 / p;

    Vec w(N, double(n) / N);
    double residual = 0.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        const Vec target = lewis_fixed_point_sweep(s, w);
        residual = 0.0;
        for (int i = 0; i < N; ++i) {
            double next = (theta == 1.0)
                              ? target[i]
                              : std::pow(w[i], 1.0 - theta) * std::pow(target[i], theta);
            next = std::max(next, 1e-14);
            residual = std::max(residual, std::fabs(next - w[i]) / std::max(w[i], 1e-14));
            w[i] = next;
        }
        if (residual <= tol) break;
    }
    if (residual > tol)
        throw numeric_error("lewis_weights: no convergence after " + std::to_string(max_iter) +
                            " sweeps (residual " + std::to_string(residual) + ")");

    // assemble the decomposition; the identity and unit-norm constraints hold
    // exactly for any weight vector, convergence shows up in the reconstruction
    Mat m(n, n);
    for (int i = 0; i < N; ++i)
        add_outer(m, std::pow(std::max(w[i], 1e-14), 1.0 - 2.0 / p), s.basis.row_ptr(i), n);
    const Mat m_inv_sqrt = sym_inv_sqrt(m);

    LewisDecomposition out;
    out.p = p;
    out.iterations = it + 1;
    out.fixed_point_residual = residual;
    out.change_of_basis = sym_sqrt(m);
    out.vectors = Mat(N, n);
    out.weights.assign(N, 0.0);
    for (int i = 0; i < N; ++i) {
        const Vec yt = matvec(m_inv_sqrt, s.basis.row(i));
        const double len = norm2(yt);
        const double lev = len * len; // a_i^T M^{-1} a_i
        const double wpow = std::pow(std::max(w[i], 1e-14), 1.0 - 2.0 / p);
        out.weights[i] = wpow * lev;
        for (int k = 0; k < n; ++k)
            out.vectors(i, k) = (len > 0.0) ? yt[k] / len : 0.0;
    }
    return out;
}

double LewisDecomposition::subspace_norm(const Vec& u) const {
    KahanSum sum;
    for (int i = 0; i < ambient(); ++i)
        sum.add(weights[i] * std::pow(std::fabs(dot(vectors.row_ptr(i), u)), p));
    return std::pow(sum.value(), 1.0 / p);
}

Vec LewisDecomposition::subspace_norm_grad(const Vec& u) const {
    const double norm = subspace_norm(u);
    Vec g(dim(), 0.0);
    if (norm == 0.0) return g;
    for (int i = 0; i < ambient(); ++i) {
        const double t = dot(vectors.row_ptr(i), u);
        const double w = weights[i] * std::pow(std::fabs(t), p - 1.0) * ((t >= 0.0) ? 1.0 : -1.0);
        for (int k = 0; k < dim(); ++k) g[k] += w * vectors(i, k);
    }
    const double scale = std::pow(norm, 1.0 - p);
    for (double& v : g) v *= scale;
    return g;
}

LewisDecomposition::Residuals LewisDecomposition::residuals() const {
    Residuals r{0.0, 0.0, 0.0};
    const int n = dim();
    for (int i = 0; i < ambient(); ++i)
        if (weights[i] > 1e-12)
            r.unit_norm = std::max(r.unit_norm, std::fabs(norm2(vectors.row(i)) - 1.0));
    Mat id_sum(n, n);
    for (int i = 0; i < ambient(); ++i) add_outer(id_sum, weights[i], vectors.row_ptr(i), n);
    r.identity = max_entry_diff(id_sum, Mat::identity(n));
    double tr = 0.0;
    for (double c : weights) tr += c;
    r.trace = std::fabs(tr - n);
    return r;
}

namespace {

double ambient_lp_norm(const Subspace& s, const Vec& z) {
    KahanSum sum;
    for (int i = 0; i < s.ambient(); ++i)
        sum.add(std::pow(std::fabs(dot(s.basis.row_ptr(i), z)), s.p));
    return std::pow(sum.value(), 1.0 / s.p);
}

} // namespace

double reconstruction_residual(const Subspace& s, const LewisDecomposition& l, int probes,
                               RngStream rng) {
    double worst = 0.0;
    for (int t = 0; t < probes; ++t) {
        Vec z(s.dim());
        for (double& v : z) v = rng.next_gaussian();
        const Vec u = matvec(l.change_of_basis, z);
        const double lhs = l.subspace_norm(u);
        const double rhs = ambient_lp_norm(s, z);
        worst = std::max(worst, std::fabs(lhs - rhs) / std::max(rhs, 1e-300));
    }
    return worst;
}

EmbeddingReport embed_sample(const LewisDecomposition& l, long m, RngStream rng,
                             const EmbedOptions& opts) {
    if (m < 1) throw domain_error("embed_sample: m must be >= 1");
    const int N = l.ambient(), n = l.dim();

    // atom draw counts (the empirical measure only charges the atoms)
    std::vector<long> counts(N, 0);
    if (opts.stratified) {
        // largest-remainder rounding to exactly m draws
        std::vector<double> exact(N);
        long base_total = 0;
        std::vector<std::pair<double, int>> rema(N);
        for (int i = 0; i < N; ++i) {
            exact[i] = double(m) * l.weights[i] / n;
            counts[i] = long(std::floor(exact[i]));
            base_total += counts[i];
            rema[i] = {exact[i] - std::floor(exact[i]), i};
        }
        std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (long k = 0; k < m - base_total; ++k) ++counts[rema[std::size_t(k) % N].second];
    } else {
        std::vector<double> cum(N);
        double acc = 0.0;
        for (int i = 0; i < N; ++i) {
            acc += l.weights[i] / n;
            cum[i] = acc;
        }
        cum[N - 1] = 1.0;
        for (long j = 0; j < m; ++j) {
            const double u = rng.next_uniform();
            int lo = 0, hi = N - 1;
            while (lo < hi) {
                const int mid = (lo + hi) / 2;
                if (cum[mid] > u) hi = mid;
                else lo = mid + 1;
            }
            ++counts[lo];
        }
    }

    EmbeddingReport rep;
    rep.m = m;
    rep.atom_counts = counts;
    rep.method = opts.stratified ? "stratified" : "iid";

    // spectral distortion of the second moment (exact)
    Mat emp(n, n);
    for (int i = 0; i < N; ++i)
        if (counts[i] > 0)
            add_outer(emp, double(n) * double(counts[i]) / double(m), l.vectors.row_ptr(i), n);
    const ExtremeEig e = sym_eig_extreme(emp);
    rep.eps_H = std::max(std::fabs(e.lambda_min - 1.0), std::fabs(e.lambda_max - 1.0));

    // p-th moment distortion over the unit sphere of the attached Euclidean
    // structure; both norms are 1-homogeneous so the ratio lives on the sphere
    const double p = l.p;
    auto sampled_norm = [&](const Vec& y) {
        KahanSum sum;
        for (int i = 0; i < N; ++i)
            if (counts[i] > 0)
                sum.add(double(counts[i]) *
                        std::pow(std::fabs(dot(l.vectors.row_ptr(i), y)), p));
        return std::pow(double(n) / double(m) * sum.value(), 1.0 / p);
    };
    auto ratio_dev = [&](const Vec& y) {
        const double denom = l.subspace_norm(y);
        if (denom == 0.0) return 0.0;
        return sampled_norm(y) / denom - 1.0;
    };

    const ConvexBody sphere_body = ConvexBody::euclid_ball(n);
    Objective obj;
    obj.value = [&](const Vec& y) {
        const double v = ratio_dev(y);
        return v * v;
    };
    obj.grad = [&](const Vec& y) {
        const double sn = sampled_norm(y);
        const double en = l.subspace_norm(y);
        if (en == 0.0 || sn == 0.0) return Vec(n, 0.0);
        // grad of sn: analogous weighted p-norm gradient over the counted atoms
        Vec gs(n, 0.0);
        for (int i = 0; i < N; ++i) {
            if (counts[i] == 0) continue;
            const double t = dot(l.vectors.row_ptr(i), y);
            const double w = double(n) * double(counts[i]) / double(m) *
                             std::pow(std::fabs(t), p - 1.0) * ((t >= 0.0) ? 1.0 : -1.0);
            for (int k = 0; k < n; ++k) gs[k] += w * l.vectors(i, k);
        }
        const double s1p = std::pow(sn, 1.0 - p);
        for (double& v : gs) v *= s1p;
        const Vec ge = l.subspace_norm_grad(y);
        const double r = sn / en;
        Vec g(n);
        for (int k = 0; k < n; ++k)
            g[k] = 2.0 * (r - 1.0) * (gs[k] / en - r * ge[k] / en);
        return g;
    };
    MaximizeOptions mo;
    mo.restarts = (opts.restarts > 0) ? opts.restarts : 50 * n;
    mo.sphere_only = true;
    std::vector<Vec> anchors;
    for (int i = 0; i < N; ++i) anchors.push_back(l.vectors.row(i));
    const MaximizeResult grad_r =
        maximize_over_body(sphere_body, obj, mo, rng.substream(0x0e75ull), anchors);
    double eps_e = std::fabs(ratio_dev(grad_r.argmax));
    if (opts.certify_with_net && n <= 3) {
        const MaximizeResult net_r = net_maximize(
            sphere_body, [&](const Vec& y) { return std::fabs(ratio_dev(y)); }, 2e-2, 12,
            /*interior_shells=*/false);
        eps_e = std::max(eps_e, std::fabs(ratio_dev(net_r.argmax)));
        rep.method += "+net";
    }
    rep.eps_E = eps_e;
    return rep;
}

std::vector<CalibrationRow> embedding_calibration_sweep(const Subspace& s, double eps,
                                                        int replicas, RngStream rng) {
    if (eps <= 0.0) throw domain_error("embedding_calibration_sweep: eps must be positive");
    const LewisDecomposition l = lewis_weights(s);
    const int n = s.dim();
    const double p = s.p;
    const double pstar = p / (p - 1.0);
    const double log_arg = std::max(1.0 + 1e-9, double(n) / std::pow(eps, 4.0 / p));
    const double log_factor = std::pow(std::log(log_arg), 2.0 / pstar);
    std::vector<CalibrationRow> rows;
    for (double khat : {1.0, 4.0, 16.0}) {
        const long m = std::max<long>(
            1, std::lround(khat / (eps * eps) * std::pow(double(n), p / 2.0) * log_factor));
        std::vector<double> ee(replicas), eh(replicas);
        long ok = 0;
        for (int r = 0; r < replicas; ++r) {
            const EmbeddingReport rep =
                embed_sample(l, m, rng.substream(std::uint64_t(khat) * 1000003ull + std::uint64_t(r)));
            ee[r] = rep.eps_E;
            eh[r] = rep.eps_H;
            if (rep.eps_E <= eps && rep.eps_H <= eps) ++ok;
        }
        std::sort(ee.begin(), ee.end());
        std::sort(eh.begin(), eh.end());
        rows.push_back({khat, m, double(ok) / replicas, ee[replicas / 2], eh[replicas / 2]});
    }
    return rows;
}

Subspace load_subspace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw domain_error("load_subspace_file: cannot open " + path);
    int N = 0, n = 0;
    double p = 0.0;
    if (!(in >> N >> n >> p) || N < 1 || n < 1)
        throw domain_error("load_subspace_file: bad header in " + path);
    Mat b(N, n);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < n; ++j)
            if (!(in >> b(i, j))) throw domain_error("load_subspace_file: truncated row");
    return make_subspace(std::move(b), p);
}

namespace {

void write_17g(std::ofstream& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

} // namespace

void save_subspace_file(const std::string& path, const Subspace& s) {
    std::ofstream out(path);
    out << s.ambient() << " " << s.dim() << " ";
    write_17g(out, s.p);
    out << "\n";
    for (int i = 0; i < s.ambient(); ++i) {
        for (int j = 0; j < s.dim(); ++j) {
            if (j) out << " ";
            write_17g(out, s.basis(i, j));
        }
        out << "\n";
    }
}

void save_decomposition_file(const std::string& path, const LewisDecomposition& l) {
    std::ofstream out(path);
    out << l.ambient() << " " << l.dim() << " ";
    write_17g(out, l.p);
    out << "\n";
    for (int i = 0; i < l.ambient(); ++i) {
        for (int j = 0; j < l.dim(); ++j) {
            if (j) out << " ";
            write_17g(out, l.vectors(i, j));
        }
        out << "\n";
    }
    for (int i = 0; i < l.ambient(); ++i) {
        if (i) out << " ";
        write_17g(out, l.weights[i]);
    }
    out << "\n";
}

LewisDecomposition load_decomposition_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw domain_error("load_decomposition_file: cannot open " + path);
    int N = 0, n = 0;
    double p = 0.0;
    if (!(in >> N >> n >> p) || N < 1 || n < 1)
        throw domain_error("load_decomposition_file: bad header");
    LewisDecomposition l;
    l.p = p;
    l.vectors = Mat(N, n);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < n; ++j)
            if (!(in >> l.vectors(i, j)))
                throw domain_error("load_decomposition_file: truncated vector row");
    l.weights.assign(N, 0.0);
    for (int i = 0; i < N; ++i)
        if (!(in >> l.weights[i])) throw domain_error("load_decomposition_file: missing weights");
    l.change_of_basis = Mat::identity(n);
    return l;
}

} // namespace mmoment
