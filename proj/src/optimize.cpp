#include "mmoment/optimize.hpp"
#include "mmoment/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mmoment {

namespace {

constexpr double kArmijo = 1e-4;

// Project onto the body (or its boundary in sphere mode).
Vec project(const ConvexBody& body, const Vec& y, bool sphere_only) {
    const double g = body.gauge(y);
    if (g == 0.0) return y;
    if (sphere_only || g > 1.0) return vscale(y, 1.0 / g);
    return y;
}

struct AscentResult {
    double value;
    Vec point;
};

AscentResult ascend(const ConvexBody& body, const Objective& obj, Vec y,
                    const MaximizeOptions& opts) {
    y = project(body, y, opts.sphere_only);
    double val = obj.value(y);
    double step = 1.0;
    for (int it = 0; it < opts.max_iters; ++it) {
        Vec g = obj.grad(y);
        const double gauge_y = body.gauge(y);
        const bool boundary = gauge_y >= 1.0 - 1e-12;
        if (boundary || opts.sphere_only) {
            // remove the outward normal component (always, in sphere mode)
            Vec nrm = body.gauge_grad(y);
            const double nn = norm2(nrm);
            if (nn > 0.0) {
                nrm = vscale(nrm, 1.0 / nn);
                const double out = dot(g, nrm);
                if (opts.sphere_only || out > 0.0) axpy(g, -out, nrm);
            }
        }
        const double gn = norm2(g);
        if (gn <= opts.grad_tol) break;

        bool moved = false;
        step = std::min(step * 2.0, 1e6 / std::max(gn, 1e-300));
        for (int bt = 0; bt < 60; ++bt) {
            Vec cand = y;
            axpy(cand, step, g);
            cand = project(body, cand, opts.sphere_only);
            const double cv = obj.value(cand);
            if (cv >= val + kArmijo * step * gn * gn) {
                y = std::move(cand);
                val = cv;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return {val, std::move(y)};
}

} // namespace

MaximizeResult maximize_over_body(const ConvexBody& body, const Objective& obj,
                                  const MaximizeOptions& opts, RngStream rng,
                                  const std::vector<Vec>& anchors) {
    const int n = body.dim();
    const int restarts = (opts.restarts > 0) ? opts.restarts : 50 * n;
    MaximizeResult best;
    best.value = -std::numeric_limits<double>::infinity();

    std::vector<Vec> starts;
    starts.reserve(restarts + opts.extra_starts.size());
    std::size_t anchor_idx = 0;
    for (int k = 0; k < restarts; ++k) {
        RngStream rk = rng.substream(std::uint64_t(k));
        if ((k % 2 == 1) && !anchors.empty()) {
            starts.push_back(anchors[anchor_idx % anchors.size()]);
            ++anchor_idx;
        } else {
            starts.push_back(sample_on_gauge_sphere(body, rk));
        }
    }
    for (const Vec& s : opts.extra_starts) starts.push_back(s);

    for (const Vec& s : starts) {
        AscentResult r = ascend(body, obj, s, opts);
        ++best.restarts_used;
        if (r.value > best.value) {
            best.value = r.value;
            best.argmax = std::move(r.point);
        }
    }
    return best;
}

namespace {

Vec dir2(double theta) { return {std::cos(theta), std::sin(theta)}; }

Vec dir3(double theta, double phi) {
    const double st = std::sin(theta);
    return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

struct Candidate {
    double value;
    Vec params; // angles
    double radius;
};

} // namespace

MaximizeResult net_maximize(const ConvexBody& body, const std::function<double(const Vec&)>& f,
                            double coarse_step, int zoom_levels, bool interior_shells) {
    const int n = body.dim();
    if (n < 1 || n > 3) throw domain_error("net_maximize: supported only for dim <= 3");

    const std::vector<double> shells =
        interior_shells ? std::vector<double>{0.25, 0.5, 0.75, 1.0} : std::vector<double>{1.0};

    auto eval_dir = [&](const Vec& x, double r) {
        return f(vscale(body.to_gauge_sphere(x), r));
    };

    MaximizeResult best;
    best.value = -std::numeric_limits<double>::infinity();
    auto consider = [&](const Vec& x, double r) {
        const double v = eval_dir(x, r);
        if (v > best.value) {
            best.value = v;
            best.argmax = vscale(body.to_gauge_sphere(x), r);
        }
        return v;
    };

    if (n == 1) {
        for (double r : shells) consider(Vec{1.0}, r);
        return best;
    }

    if (n == 2) {
        const int K = std::max(8, int(std::numbers::pi / coarse_step));
        std::vector<Candidate> cands;
        for (int k = 0; k < K; ++k) {
            const double th = (k + 0.5) * std::numbers::pi / K;
            for (double r : shells) {
                const double v = consider(dir2(th), r);
                cands.push_back({v, {th}, r});
            }
        }
        std::sort(cands.begin(), cands.end(),
                  [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
        const int keep = std::min<std::size_t>(24, cands.size());
        for (int c = 0; c < keep; ++c) {
            double center = cands[c].params[0];
            const double r = cands[c].radius;
            double w = 2.0 * std::numbers::pi / K;
            for (int level = 0; level < zoom_levels; ++level) {
                double loc_best = -std::numeric_limits<double>::infinity(), loc_th = center;
                for (int i = -5; i <= 5; ++i) {
                    const double th = center + i * (w / 10.0);
                    const double v = consider(dir2(th), r);
                    if (v > loc_best) {
                        loc_best = v;
                        loc_th = th;
                    }
                }
                center = loc_th;
                w /= 5.0;
            }
        }
        return best;
    }

    // n == 3: Fibonacci sphere coarse net, then tangent-grid zoom
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const int K = std::max(64, int(4.0 * std::numbers::pi / (coarse_step * coarse_step)));
    std::vector<Candidate> cands;
    cands.reserve(std::size_t(K) * shells.size());
    for (int k = 0; k < K; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / K;
        const double theta = std::acos(std::clamp(z, -1.0, 1.0));
        const double phi = k * golden;
        for (double r : shells) {
            const double v = consider(dir3(theta, phi), r);
            cands.push_back({v, {theta, phi}, r});
        }
    }
    std::sort(cands.begin(), cands.end(),
              [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
    const int keep = std::min<std::size_t>(48, cands.size());
    const double w0 = 2.0 * std::sqrt(4.0 * std::numbers::pi / K);
    for (int c = 0; c < keep; ++c) {
        double th = cands[c].params[0], ph = cands[c].params[1];
        const double r = cands[c].radius;
        double w = w0;
        for (int level = 0; level < zoom_levels; ++level) {
            double loc_best = -std::numeric_limits<double>::infinity();
            double bt = th, bp = ph;
            for (int i = -2; i <= 2; ++i)
                for (int j = -2; j <= 2; ++j) {
                    const double t2 = th + i * (w / 4.0);
                    // longitude step scaled by the local circumference
                    const double p2 = ph + j * (w / 4.0) / std::max(std::sin(th), 1e-3);
                    const double v = consider(dir3(t2, p2), r);
                    if (v > loc_best) {
                        loc_best = v;
                        bt = t2;
                        bp = p2;
                    }
                }
            th = bt;
            ph = bp;
            w /= 3.0;
        }
    }
    return best;
}

} // namespace mmoment
