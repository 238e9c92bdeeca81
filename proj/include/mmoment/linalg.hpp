#pragma once

#include <cstddef>
#include <vector>

namespace mmoment {

using Vec = std::vector<double>;

// Dense row-major matrix. Everything here targets desk scale (n <= 64 columns,
// row counts up to 10^6 for sample blocks), so plain loops are enough.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(std::size_t(r) * std::size_t(c), 0.0) {}

    double& operator()(int i, int j) { return a[std::size_t(i) * cols + j]; }
    double operator()(int i, int j) const { return a[std::size_t(i) * cols + j]; }

    const double* row_ptr(int i) const { return a.data() + std::size_t(i) * cols; }
    double* row_ptr(int i) { return a.data() + std::size_t(i) * cols; }
    Vec row(int i) const { return Vec(row_ptr(i), row_ptr(i) + cols); }

    static Mat identity(int n);
};

// Compensated accumulator for long sums of mixed magnitudes.
struct KahanSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

double dot(const Vec& x, const Vec& y);
double dot(const double* x, const Vec& y);

// Overflow/underflow-safe Euclidean norm.
double norm2(const Vec& x);
double max_abs(const Vec& x);

Vec vadd(const Vec& x, const Vec& y);
Vec vsub(const Vec& x, const Vec& y);
Vec vscale(const Vec& x, double t);
// x += t*y
void axpy(Vec& x, double t, const Vec& y);

Vec matvec(const Mat& A, const Vec& x);
Vec matvec_t(const Mat& A, const Vec& x); // A^T x
Mat matmul(const Mat& A, const Mat& B);
Mat transpose(const Mat& A);
double max_entry_diff(const Mat& A, const Mat& B);

// result += w * x x^T (symmetric rank-one update)
void add_outer(Mat& S, double w, const Vec& x);
void add_outer(Mat& S, double w, const double* x, int n);

// Unit vector parallel to v; scale-invariant (handles entries near 1e-300).
// Zero vector -> domain_error.
Vec project_sphere(const Vec& v);

struct EigResult {
    Vec values;  // ascending
    Mat vectors; // column k is the eigenvector for values[k]
};

// Full spectrum of a symmetric matrix: Householder tridiagonalization followed
// by implicit-shift QL, iteration budget 100*n sweeps. Input must be symmetric
// to 1e-12 relative asymmetry (domain_error otherwise); exhausting the budget
// raises numeric_error.
EigResult sym_eig_all(const Mat& S);

struct ExtremeEig {
    double lambda_min, lambda_max;
    Vec v_min, v_max;
};
ExtremeEig sym_eig_extreme(const Mat& S);

// Cholesky factor L with S = L L^T; domain_error when a pivot dips below zero.
Mat cholesky(const Mat& S);
// Solve L L^T x = b given the factor L.
Vec chol_solve(const Mat& L, const Vec& b);
// Inverse of the lower-triangular factor.
Mat lower_tri_inverse(const Mat& L);

// W with W Sigma W^T = Id. Requires lambda_min(Sigma) > 1e-10; the thrown
// domain_error reports the offending eigenvalue.
Mat cholesky_whiten(const Mat& sigma);

// Symmetric square root / inverse square root via the spectral decomposition.
Mat sym_sqrt(const Mat& S);
Mat sym_inv_sqrt(const Mat& S);

Mat spd_inverse(const Mat& S);

} // namespace mmoment
