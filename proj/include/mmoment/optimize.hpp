#pragma once

#include "mmoment/geometry.hpp"
#include "mmoment/linalg.hpp"
#include "mmoment/rng.hpp"

#include <functional>
#include <vector>

namespace mmoment {

// Maximization target: value and gradient at a point of the body.
struct Objective {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
};

struct MaximizeOptions {
    int restarts = 0;            // 0 -> 50 * dim
    double grad_tol = 1e-9;      // stop when the projected gradient is this small
    int max_iters = 600;         // per restart
    bool sphere_only = false;    // restrict to the gauge sphere instead of the body
    std::vector<Vec> extra_starts;
};

struct MaximizeResult {
    double value = 0.0;
    Vec argmax;
    int restarts_used = 0;
};

// Projected gradient ascent with Armijo backtracking (constant 1e-4).
// Restart k is a pure function of (rng, k), so enlarging the restart budget
// keeps the earlier trajectories and the running maximum is monotone.
// Odd restarts start from the supplied anchor points (cycled), even ones from
// random gauge-sphere directions.
MaximizeResult maximize_over_body(const ConvexBody& body, const Objective& obj,
                                  const MaximizeOptions& opts, RngStream rng,
                                  const std::vector<Vec>& anchors = {});

// Deterministic direction net over the gauge sphere for dim <= 3, with
// interior shells at radii {0.25, 0.5, 0.75, 1} and iterative local zoom
// around the best candidates. f is evaluated as-is (no gradient needed).
MaximizeResult net_maximize(const ConvexBody& body, const std::function<double(const Vec&)>& f,
                            double coarse_step = 2e-2, int zoom_levels = 14,
                            bool interior_shells = true);

} // namespace mmoment
