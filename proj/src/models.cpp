#include "mmoment/models.hpp"
#include "mmoment/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mmoment {

RandomVectorModel RandomVectorModel::gaussian_iso(int n) {
    RandomVectorModel m;
    m.kind_ = ModelKind::gaussian_iso;
    m.dim_ = n;
    m.isotropized_ = true;
    return m;
}

RandomVectorModel RandomVectorModel::rademacher_cube(int n) {
    RandomVectorModel m;
    m.kind_ = ModelKind::rademacher_cube;
    m.dim_ = n;
    m.isotropized_ = true;
    return m;
}

RandomVectorModel RandomVectorModel::laplace_iso(int n) {
    RandomVectorModel m;
    m.kind_ = ModelKind::laplace_iso;
    m.dim_ = n;
    m.isotropized_ = true;
    return m;
}

RandomVectorModel RandomVectorModel::uniform_lq_ball(int n, double q) {
    if (q < 1.0) throw domain_error("uniform_lq_ball: q must be >= 1");
    RandomVectorModel m;
    m.kind_ = ModelKind::uniform_lq_ball;
    m.dim_ = n;
    m.q_ = q;
    if (q != 2.0) m.gn_table_ = std::make_shared<GammaQuantileTable>(1.0 / q);
    return m;
}

RandomVectorModel RandomVectorModel::discrete_atoms(std::vector<Vec> atoms,
                                                    std::vector<double> probs) {
    if (atoms.empty() || atoms.size() != probs.size())
        throw domain_error("discrete_atoms: atoms and probs must be non-empty and aligned");
    double total = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw domain_error("discrete_atoms: negative probability");
        total += p;
    }
    if (std::fabs(total - 1.0) > 1e-12)
        throw domain_error("discrete_atoms: probabilities sum to " + std::to_string(total));
    RandomVectorModel m;
    m.kind_ = ModelKind::discrete_atoms;
    m.dim_ = int(atoms.front().size());
    for (const Vec& a : atoms)
        if (int(a.size()) != m.dim_) throw domain_error("discrete_atoms: ragged atom list");
    m.atoms_ = std::move(atoms);
    m.probs_ = std::move(probs);
    m.cum_probs_.resize(m.probs_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < m.probs_.size(); ++i) {
        acc += m.probs_[i];
        m.cum_probs_[i] = acc;
    }
    m.cum_probs_.back() = 1.0;
    return m;
}

std::string RandomVectorModel::descriptor() const {
    std::ostringstream os;
    if (isotropized_ && kind_ != ModelKind::gaussian_iso && kind_ != ModelKind::rademacher_cube &&
        kind_ != ModelKind::laplace_iso)
        os << "isotropized_";
    switch (kind_) {
        case ModelKind::gaussian_iso: os << "gaussian_iso"; break;
        case ModelKind::rademacher_cube: os << "rademacher_cube"; break;
        case ModelKind::laplace_iso: os << "laplace_iso"; break;
        case ModelKind::uniform_lq_ball: os << "uniform_lq_ball(q=" << q_ << ")"; break;
        case ModelKind::discrete_atoms: os << "discrete_atoms(N=" << atoms_.size() << ")"; break;
    }
    return os.str();
}

Vec RandomVectorModel::draw_raw(RngStream& rng) const {
    const int n = dim_;
    Vec x(n);
    switch (kind_) {
        case ModelKind::gaussian_iso:
            for (int i = 0; i < n; ++i) x[i] = rng.next_gaussian();
            break;
        case ModelKind::rademacher_cube:
            for (int i = 0; i < n; ++i) x[i] = rng.next_sign();
            break;
        case ModelKind::laplace_iso: {
            // standard Laplace scaled to unit variance
            const double b = 1.0 / std::sqrt(2.0);
            for (int i = 0; i < n; ++i) {
                const double u = rng.next_uniform();
                x[i] = (u < 0.5) ? b * std::log(2.0 * std::max(u, 1e-300))
                                 : -b * std::log(2.0 * (1.0 - u));
            }
            break;
        }
        case ModelKind::uniform_lq_ball: {
            // generalized-normal representation: exact and rejection-free
            double total = 0.0;
            if (q_ == 2.0) {
                // density exp(-t^2) is a plain Gaussian
                for (int i = 0; i < n; ++i) {
                    const double y = rng.next_gaussian() / std::numbers::sqrt2;
                    x[i] = y;
                    total += y * y;
                }
            } else {
                for (int i = 0; i < n; ++i) {
                    const double g = gn_table_->eval(rng.next_uniform());
                    const double s = rng.next_sign();
                    x[i] = s * std::pow(g, 1.0 / q_);
                    total += g;
                }
            }
            total += rng.next_exponential();
            const double inv = 1.0 / std::pow(total, 1.0 / q_);
            for (int i = 0; i < n; ++i) x[i] *= inv;
            break;
        }
        case ModelKind::discrete_atoms: {
            const double u = rng.next_uniform();
            std::size_t lo = 0, hi = cum_probs_.size() - 1;
            while (lo < hi) {
                const std::size_t mid = (lo + hi) / 2;
                if (cum_probs_[mid] > u) hi = mid;
                else lo = mid + 1;
            }
            x = atoms_[lo];
            break;
        }
    }
    return x;
}

Vec RandomVectorModel::draw(RngStream& rng) const {
    Vec x = draw_raw(rng);
    if (scale_ != 1.0)
        for (double& v : x) v *= scale_;
    if (whiten_) x = matvec(*whiten_, x);
    return x;
}

Mat RandomVectorModel::raw_covariance() const {
    const int n = dim_;
    switch (kind_) {
        case ModelKind::gaussian_iso:
        case ModelKind::rademacher_cube:
        case ModelKind::laplace_iso:
            return Mat::identity(n);
        case ModelKind::uniform_lq_ball: {
            Mat c = Mat::identity(n);
            const double v = lq_ball_marginal_variance(n, q_);
            for (int i = 0; i < n; ++i) c(i, i) = v;
            return c;
        }
        case ModelKind::discrete_atoms: {
            Mat c(n, n);
            for (std::size_t i = 0; i < atoms_.size(); ++i) add_outer(c, probs_[i], atoms_[i]);
            return c;
        }
    }
    return Mat::identity(n);
}

Mat RandomVectorModel::covariance() const {
    Mat c = raw_covariance();
    if (scale_ != 1.0)
        for (double& v : c.a) v *= scale_ * scale_;
    if (whiten_) c = matmul(matmul(*whiten_, c), transpose(*whiten_));
    return c;
}

bool RandomVectorModel::exact_moment_available(double p) const {
    if (p == 2.0) return true;
    switch (kind_) {
        case ModelKind::gaussian_iso: return true;
        case ModelKind::rademacher_cube: return dim_ <= 20;
        case ModelKind::discrete_atoms: return true;
        default: return false;
    }
}

namespace {

double pow_abs(double t, double p) { return std::pow(std::fabs(t), p); }

} // namespace

std::optional<double> RandomVectorModel::raw_exact_moment(const Vec& y, double p) const {
    switch (kind_) {
        case ModelKind::gaussian_iso: {
            const double g = gaussian_abs_moment(p);
            return g * std::pow(norm2(y), p);
        }
        case ModelKind::rademacher_cube: {
            const int n = dim_;
            if (n > 20) break;
            // fix the last sign by symmetry and average over the half cube
            const std::uint64_t half = 1ull << (n - 1);
            KahanSum sum;
            for (std::uint64_t mask = 0; mask < half; ++mask) {
                double t = y[n - 1];
                for (int i = 0; i < n - 1; ++i)
                    t += ((mask >> i) & 1ull) ? y[i] : -y[i];
                sum.add(pow_abs(t, p));
            }
            return sum.value() / double(half);
        }
        case ModelKind::discrete_atoms: {
            KahanSum sum;
            for (std::size_t i = 0; i < atoms_.size(); ++i)
                sum.add(probs_[i] * pow_abs(dot(atoms_[i], y), p));
            return sum.value();
        }
        default: break;
    }
    if (p == 2.0) {
        const Mat c = raw_covariance();
        return dot(y, matvec(c, y));
    }
    return std::nullopt;
}

std::optional<Vec> RandomVectorModel::raw_exact_grad(const Vec& y, double p) const {
    switch (kind_) {
        case ModelKind::gaussian_iso: {
            const double g = gaussian_abs_moment(p);
            const double r = norm2(y);
            if (r == 0.0) return Vec(dim_, 0.0);
            return vscale(y, g * p * std::pow(r, p - 2.0));
        }
        case ModelKind::rademacher_cube: {
            const int n = dim_;
            if (n > 20) break;
            const std::uint64_t half = 1ull << (n - 1);
            Vec grad(n, 0.0);
            Vec eps(n);
            for (std::uint64_t mask = 0; mask < half; ++mask) {
                eps[n - 1] = 1.0;
                double t = y[n - 1];
                for (int i = 0; i < n - 1; ++i) {
                    eps[i] = ((mask >> i) & 1ull) ? 1.0 : -1.0;
                    t += eps[i] * y[i];
                }
                const double w = p * std::pow(std::fabs(t), p - 1.0) * ((t >= 0.0) ? 1.0 : -1.0);
                axpy(grad, w, eps);
            }
            for (double& v : grad) v /= double(half);
            return grad;
        }
        case ModelKind::discrete_atoms: {
            Vec grad(dim_, 0.0);
            for (std::size_t i = 0; i < atoms_.size(); ++i) {
                const double t = dot(atoms_[i], y);
                const double w =
                    probs_[i] * p * std::pow(std::fabs(t), p - 1.0) * ((t >= 0.0) ? 1.0 : -1.0);
                axpy(grad, w, atoms_[i]);
            }
            return grad;
        }
        default: break;
    }
    if (p == 2.0) {
        const Mat c = raw_covariance();
        return vscale(matvec(c, y), 2.0);
    }
    return std::nullopt;
}

std::optional<double> RandomVectorModel::exact_pth_moment(const Vec& y, double p) const {
    // E |<W X, y>|^p = E |<X, W^T y>|^p ; scalar scaling likewise
    Vec z = y;
    if (whiten_) z = matvec_t(*whiten_, y);
    if (scale_ != 1.0) z = vscale(z, scale_);
    return raw_exact_moment(z, p);
}

std::optional<Vec> RandomVectorModel::exact_pth_moment_grad(const Vec& y, double p) const {
    Vec z = y;
    if (whiten_) z = matvec_t(*whiten_, y);
    if (scale_ != 1.0) z = vscale(z, scale_);
    auto g = raw_exact_grad(z, p);
    if (!g) return std::nullopt;
    Vec gz = *g;
    if (scale_ != 1.0) gz = vscale(gz, scale_);
    if (whiten_) gz = matvec(*whiten_, gz);
    return gz;
}

RandomVectorModel RandomVectorModel::with_whitening(const Mat& w) const {
    RandomVectorModel m = *this;
    if (m.whiten_) {
        m.whiten_ = std::make_shared<Mat>(matmul(w, *m.whiten_));
    } else {
        m.whiten_ = std::make_shared<Mat>(w);
    }
    return m;
}

RandomVectorModel RandomVectorModel::with_scaling(double s) const {
    RandomVectorModel m = *this;
    m.scale_ *= s;
    return m;
}

SampleMatrix sample(const RandomVectorModel& model, int m, RngStream rng) {
    if (m < 1) throw domain_error("sample: m must be >= 1");
    SampleMatrix s;
    s.seed_info = rng;
    s.model_ref = model.descriptor();
    s.rows = Mat(m, model.dim());
    for (int j = 0; j < m; ++j) {
        const Vec x = model.draw(rng);
        for (int i = 0; i < model.dim(); ++i) s.rows(j, i) = x[i];
    }
    return s;
}

SampleMatrix sample_from_rows(std::vector<Vec> rows, const std::string& model_ref) {
    if (rows.empty()) throw domain_error("sample_from_rows: empty row list");
    SampleMatrix s;
    s.model_ref = model_ref;
    s.rows = Mat(int(rows.size()), int(rows.front().size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t i = 0; i < rows[j].size(); ++i) s.rows(int(j), int(i)) = rows[j][i];
    return s;
}

RandomVectorModel isotropize(const RandomVectorModel& model, int pilot_m, RngStream rng) {
    if (model.kind() == ModelKind::uniform_lq_ball && !model.isotropized()) {
        // closed-form scalar route: the covariance is a multiple of the identity
        const double v = lq_ball_marginal_variance(model.dim(), model.lq_exponent());
        RandomVectorModel m = model.with_scaling(1.0 / std::sqrt(v));
        m.isotropized_ = true;
        return m;
    }
    // pilot whitening
    Mat cov(model.dim(), model.dim());
    RngStream r = rng;
    for (int j = 0; j < pilot_m; ++j) {
        const Vec x = model.draw(r);
        add_outer(cov, 1.0 / pilot_m, x);
    }
    Mat w;
    try {
        w = cholesky_whiten(cov);
    } catch (const domain_error& e) {
        throw numeric_error(std::string("isotropize: pilot covariance not PD: ") + e.what());
    }
    RandomVectorModel m = model.with_whitening(w);
    m.isotropized_ = true;
    return m;
}

MomentEstimate euclid_norm_moment(const RandomVectorModel& model, double s, int m_mc,
                                  RngStream rng) {
    KahanSum sum, sumsq;
    RngStream r = rng;
    for (int j = 0; j < m_mc; ++j) {
        const Vec x = model.draw(r);
        const double v = std::pow(norm2(x), s);
        sum.add(v);
        sumsq.add(v * v);
    }
    const double mean = sum.value() / m_mc;
    const double var = std::max(0.0, sumsq.value() / m_mc - mean * mean);
    const double se_mean = std::sqrt(var / m_mc);
    const double value = std::pow(mean, 1.0 / s);
    // delta method for x -> x^{1/s}
    const double se = se_mean / (s * std::pow(mean, 1.0 - 1.0 / s));
    MomentEstimate est{value, se};
    est.beyond_stated_regime = s > 2.0 * std::sqrt(double(model.dim()));
    return est;
}

RandomVectorModel load_atoms_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw domain_error("load_atoms_file: cannot open " + path);
    int N = 0, n = 0;
    if (!(in >> N >> n) || N < 1 || n < 1)
        throw domain_error("load_atoms_file: bad header in " + path);
    std::vector<Vec> atoms(N, Vec(n));
    std::vector<double> probs(N);
    for (int k = 0; k < N; ++k) {
        for (int i = 0; i < n; ++i)
            if (!(in >> atoms[k][i])) throw domain_error("load_atoms_file: truncated atom row");
        if (!(in >> probs[k])) throw domain_error("load_atoms_file: missing probability");
    }
    return RandomVectorModel::discrete_atoms(std::move(atoms), std::move(probs));
}

void save_atoms_file(const std::string& path, const RandomVectorModel& model) {
    if (model.kind() != ModelKind::discrete_atoms)
        throw domain_error("save_atoms_file: model is not discrete_atoms");
    std::ofstream out(path);
    const auto& atoms = model.atoms();
    const auto& probs = model.atom_probs();
    out << atoms.size() << " " << model.dim() << "\n";
    char buf[64];
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        for (int i = 0; i < model.dim(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", atoms[k][i]);
            out << buf << " ";
        }
        std::snprintf(buf, sizeof buf, "%.17g", probs[k]);
        out << buf << "\n";
    }
}

} // namespace mmoment
