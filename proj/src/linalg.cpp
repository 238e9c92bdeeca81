#include "mmoment/linalg.hpp"
#include "mmoment/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mmoment {

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double dot(const Vec& x, const Vec& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double dot(const double* x, const Vec& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += x[i] * y[i];
    return s;
}

double max_abs(const Vec& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::fabs(v));
    return m;
}

double norm2(const Vec& x) {
    const double m = max_abs(x);
    if (m == 0.0) return 0.0;
    double s = 0.0;
    for (double v : x) {
        const double r = v / m;
        s += r * r;
    }
    return m * std::sqrt(s);
}

Vec vadd(const Vec& x, const Vec& y) {
    Vec r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] + y[i];
    return r;
}

Vec vsub(const Vec& x, const Vec& y) {
    Vec r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
    return r;
}

Vec vscale(const Vec& x, double t) {
    Vec r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] * t;
    return r;
}

void axpy(Vec& x, double t, const Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += t * y[i];
}

Vec matvec(const Mat& A, const Vec& x) {
    Vec r(A.rows, 0.0);
    for (int i = 0; i < A.rows; ++i) r[i] = dot(A.row_ptr(i), x);
    return r;
}

Vec matvec_t(const Mat& A, const Vec& x) {
    Vec r(A.cols, 0.0);
    for (int i = 0; i < A.rows; ++i) {
        const double* ai = A.row_ptr(i);
        for (int j = 0; j < A.cols; ++j) r[j] += ai[j] * x[i];
    }
    return r;
}

Mat matmul(const Mat& A, const Mat& B) {
    Mat C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int k = 0; k < A.cols; ++k) {
            const double aik = A(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < B.cols; ++j) C(i, j) += aik * B(k, j);
        }
    return C;
}

Mat transpose(const Mat& A) {
    Mat T(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
    return T;
}

double max_entry_diff(const Mat& A, const Mat& B) {
    double m = 0.0;
    for (std::size_t i = 0; i < A.a.size(); ++i) m = std::max(m, std::fabs(A.a[i] - B.a[i]));
    return m;
}

void add_outer(Mat& S, double w, const Vec& x) { add_outer(S, w, x.data(), int(x.size())); }

void add_outer(Mat& S, double w, const double* x, int n) {
    for (int i = 0; i < n; ++i) {
        const double wxi = w * x[i];
        double* row = S.row_ptr(i);
        for (int j = 0; j < n; ++j) row[j] += wxi * x[j];
    }
}

Vec project_sphere(const Vec& v) {
    const double m = max_abs(v);
    if (m == 0.0) throw domain_error("project_sphere: zero vector");
    Vec r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = v[i] / m;
    double s = 0.0;
    for (double x : r) s += x * x;
    const double inv = 1.0 / std::sqrt(s);
    for (double& x : r) x *= inv;
    return r;
}

namespace {

double sym_asymmetry(const Mat& S) {
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i < S.rows; ++i)
        for (int j = 0; j < S.cols; ++j) {
            scale = std::max(scale, std::fabs(S(i, j)));
            worst = std::max(worst, std::fabs(S(i, j) - S(j, i)));
        }
    return worst / std::max(scale, 1.0);
}

// Householder reduction to tridiagonal form, accumulating the transform in z.
void tridiagonalize(Mat& z, Vec& d, Vec& e) {
    const int n = z.rows;
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    for (int i = n - 1; i > 0; --i) {
        const int l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (int k = 0; k <= l; ++k) scale += std::fabs(z(i, k));
            if (scale == 0.0) {
                e[i] = z(i, l);
            } else {
                for (int k = 0; k <= l; ++k) {
                    z(i, k) /= scale;
                    h += z(i, k) * z(i, k);
                }
                double f = z(i, l);
                double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                z(i, l) = f - g;
                f = 0.0;
                for (int j = 0; j <= l; ++j) {
                    z(j, i) = z(i, j) / h;
                    g = 0.0;
                    for (int k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
                    for (int k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
                    e[j] = g / h;
                    f += e[j] * z(i, j);
                }
                const double hh = f / (h + h);
                for (int j = 0; j <= l; ++j) {
                    f = z(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (int k = 0; k <= j; ++k) z(j, k) -= f * e[k] + g * z(i, k);
                }
            }
        } else {
            e[i] = z(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (int i = 0; i < n; ++i) {
        const int l = i - 1;
        if (d[i] != 0.0) {
            for (int j = 0; j <= l; ++j) {
                double g = 0.0;
                for (int k = 0; k <= l; ++k) g += z(i, k) * z(k, j);
                for (int k = 0; k <= l; ++k) z(k, j) -= g * z(k, i);
            }
        }
        d[i] = z(i, i);
        z(i, i) = 1.0;
        for (int j = 0; j <= l; ++j) z(j, i) = z(i, j) = 0.0;
    }
}

double pythag(double a, double b) { return std::hypot(a, b); }

// Implicit-shift QL on the tridiagonal (d, e), eigenvectors accumulated in z.
void ql_implicit(Vec& d, Vec& e, Mat& z, int sweep_budget) {
    const int n = int(d.size());
    for (int i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    int sweeps = 0;
    for (int l = 0; l < n; ++l) {
        for (;;) {
            int m = l;
            for (; m < n - 1; ++m) {
                const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
                if (std::fabs(e[m]) <= 1e-300 || std::fabs(e[m]) <= 2.3e-16 * dd) break;
            }
            if (m == l) break;
            if (++sweeps > sweep_budget)
                throw numeric_error("sym_eig: QL iteration budget exhausted");
            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = pythag(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
            double s = 1.0, c = 1.0, p = 0.0;
            bool underflow = false;
            for (int i = m - 1; i >= l; --i) {
                double f = s * e[i];
                const double b = c * e[i];
                r = pythag(f, g);
                e[i + 1] = r;
                if (r == 0.0) {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for (int k = 0; k < n; ++k) {
                    f = z(k, i + 1);
                    z(k, i + 1) = s * z(k, i) + c * f;
                    z(k, i) = c * z(k, i) - s * f;
                }
            }
            if (underflow) continue;
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

} // namespace

EigResult sym_eig_all(const Mat& S) {
    if (S.rows != S.cols) throw domain_error("sym_eig: matrix not square");
    const double asym = sym_asymmetry(S);
    if (asym > 1e-12)
        throw domain_error("sym_eig: input asymmetric (relative asymmetry " +
                           std::to_string(asym) + ")");
    const int n = S.rows;
    Mat z(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) z(i, j) = 0.5 * (S(i, j) + S(j, i));
    Vec d, e;
    if (n == 1) {
        EigResult r;
        r.values = {z(0, 0)};
        r.vectors = Mat::identity(1);
        return r;
    }
    tridiagonalize(z, d, e);
    ql_implicit(d, e, z, 100 * n);

    // sort ascending, carrying columns
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return d[a] < d[b]; });
    EigResult r;
    r.values.resize(n);
    r.vectors = Mat(n, n);
    for (int k = 0; k < n; ++k) {
        r.values[k] = d[idx[k]];
        for (int i = 0; i < n; ++i) r.vectors(i, k) = z(i, idx[k]);
    }
    return r;
}

ExtremeEig sym_eig_extreme(const Mat& S) {
    const EigResult r = sym_eig_all(S);
    const int n = int(r.values.size());
    ExtremeEig e;
    e.lambda_min = r.values.front();
    e.lambda_max = r.values.back();
    e.v_min.resize(n);
    e.v_max.resize(n);
    for (int i = 0; i < n; ++i) {
        e.v_min[i] = r.vectors(i, 0);
        e.v_max[i] = r.vectors(i, n - 1);
    }
    return e;
}

Mat cholesky(const Mat& S) {
    const int n = S.rows;
    Mat L(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = S(i, j);
            for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            if (i == j) {
                if (s <= 0.0) throw domain_error("cholesky: matrix not positive definite");
                L(i, i) = std::sqrt(s);
            } else {
                L(i, j) = s / L(j, j);
            }
        }
    }
    return L;
}

Vec chol_solve(const Mat& L, const Vec& b) {
    const int n = L.rows;
    Vec y(n);
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= L(i, k) * y[k];
        y[i] = s / L(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = y[i];
        for (int k = i + 1; k < n; ++k) s -= L(k, i) * y[k];
        y[i] = s / L(i, i);
    }
    return y;
}

Mat lower_tri_inverse(const Mat& L) {
    const int n = L.rows;
    Mat M(n, n);
    for (int i = 0; i < n; ++i) {
        M(i, i) = 1.0 / L(i, i);
        for (int j = 0; j < i; ++j) {
            double s = 0.0;
            for (int k = j; k < i; ++k) s += L(i, k) * M(k, j);
            M(i, j) = -s / L(i, i);
        }
    }
    return M;
}

Mat cholesky_whiten(const Mat& sigma) {
    const ExtremeEig e = sym_eig_extreme(sigma);
    if (e.lambda_min <= 1e-10)
        throw domain_error("cholesky_whiten: covariance not PD (lambda_min = " +
                           std::to_string(e.lambda_min) + ")");
    return lower_tri_inverse(cholesky(sigma));
}

Mat sym_sqrt(const Mat& S) {
    const EigResult r = sym_eig_all(S);
    const int n = S.rows;
    Mat out(n, n);
    for (int k = 0; k < n; ++k) {
        if (r.values[k] < 0.0) throw domain_error("sym_sqrt: negative eigenvalue");
        const double s = std::sqrt(r.values[k]);
        for (int i = 0; i < n; ++i) {
            const double zik = r.vectors(i, k) * s;
            for (int j = 0; j < n; ++j) out(i, j) += zik * r.vectors(j, k);
        }
    }
    return out;
}

Mat sym_inv_sqrt(const Mat& S) {
    const EigResult r = sym_eig_all(S);
    const int n = S.rows;
    Mat out(n, n);
    for (int k = 0; k < n; ++k) {
        if (r.values[k] <= 0.0) throw domain_error("sym_inv_sqrt: non-positive eigenvalue");
        const double s = 1.0 / std::sqrt(r.values[k]);
        for (int i = 0; i < n; ++i) {
            const double zik = r.vectors(i, k) * s;
            for (int j = 0; j < n; ++j) out(i, j) += zik * r.vectors(j, k);
        }
    }
    return out;
}

Mat spd_inverse(const Mat& S) {
    const Mat L = cholesky(S);
    const Mat Linv = lower_tri_inverse(L);
    return matmul(transpose(Linv), Linv);
}

} // namespace mmoment
