#pragma once

#include "mmoment/linalg.hpp"
#include "mmoment/rng.hpp"

#include <string>
#include <vector>

namespace mmoment {

// n-dimensional subspace of l_p^N given by a full-column-rank basis (N x n).
struct Subspace {
    Mat basis;
    double p = 2.0;

    int ambient() const { return basis.rows; }
    int dim() const { return basis.cols; }
};

Subspace make_subspace(Mat basis, double p);
Subspace random_gaussian_subspace(int N, int n, double p, RngStream rng);

// Weights c_i >= 0 and Euclidean-unit vectors y_i with
//   Id = sum_i c_i y_i (x) y_i   and   ||x||_E = (sum_i c_i |<x,y_i>|^p)^{1/p},
// where x is expressed in the coordinates of the attached Euclidean structure.
// change_of_basis maps a working coordinate z (the element is basis * z) to
// those coordinates.
struct LewisDecomposition {
    Vec weights;              // c_i, length N
    Mat vectors;              // N x n, row i = y_i
    Mat change_of_basis;      // n x n, symmetric PD
    double p = 2.0;
    int iterations = 0;
    double fixed_point_residual = 0.0; // max relative weight change at the last sweep

    int ambient() const { return vectors.rows; }
    int dim() const { return vectors.cols; }

    // (sum_i c_i |<u, y_i>|^p)^{1/p} for u in the attached coordinates.
    double subspace_norm(const Vec& u) const;
    Vec subspace_norm_grad(const Vec& u) const;

    struct Residuals {
        double unit_norm; // max | |y_i|_2 - 1 | over c_i > 0
        double identity;  // max-entry | sum c_i y_i y_i^T - Id |
        double trace;     // | sum c_i - n |
    };
    Residuals residuals() const;
};

// Max relative gap between the decomposition norm and the ambient l_p norm
// over random probe elements of the subspace (the convergence certificate).
double reconstruction_residual(const Subspace& s, const LewisDecomposition& l, int probes,
                               RngStream rng);

// Damped fixed-point iteration on the row weights (undamped for p < 4,
// geometric-mean damping theta = 2/p otherwise). Stops when the maximum
// relative weight change drops below tol; exceeding max_iter raises
// numeric_error, a rank-deficient basis raises domain_error.
LewisDecomposition lewis_weights(const Subspace& s, double tol = 1e-10, int max_iter = 5000);

// One sweep of the fixed-point map (for residual self-checks).
Vec lewis_fixed_point_sweep(const Subspace& s, const Vec& weights);

struct EmbeddingReport {
    long m = 0;
    double eps_E = 0.0; // max over the unit sphere of |(n/m sum |<y,x_j>|^p)^{1/p} / ||y||_E - 1|
    double eps_H = 0.0; // spectral distortion of (n/m) sum x_j x_j^T
    std::string method;
    std::vector<long> atom_counts;
};

struct EmbedOptions {
    bool stratified = false; // deterministic proportional counts instead of i.i.d. draws
    int restarts = 0;        // 0 -> 50 n
    bool certify_with_net = true; // n <= 3: take the max with the direction-net estimate
};

// Samples m points from the atom distribution (y_i with probability c_i / n)
// and measures both distortions of the rescaled empirical moments.
EmbeddingReport embed_sample(const LewisDecomposition& l, long m, RngStream rng,
                             const EmbedOptions& opts = {});

struct CalibrationRow {
    double calibration; // K
    long m;
    double success_fraction; // both eps_E and eps_H below eps
    double median_eps_e;
    double median_eps_h;
};

// Sweep over calibration constants K in {1, 4, 16}: sample size
// m = round(K eps^-2 n^{p/2} log(n / eps^{4/p})^{2/p*}), success fraction over
// the replicas. Reported, not asserted (the leading constant of the sample-size
// law is not pinned down).
std::vector<CalibrationRow> embedding_calibration_sweep(const Subspace& s, double eps,
                                                        int replicas, RngStream rng);

// Text format "N n p" + N rows of n reals; the decomposition adds a line of N
// weights. Values round-trip exactly via 17 significant digits.
Subspace load_subspace_file(const std::string& path);
void save_subspace_file(const std::string& path, const Subspace& s);
LewisDecomposition load_decomposition_file(const std::string& path);
void save_decomposition_file(const std::string& path, const LewisDecomposition& l);

} // namespace mmoment
