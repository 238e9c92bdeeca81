#pragma once

#include "mmoment/geometry.hpp"
#include "mmoment/models.hpp"
#include "mmoment/optimize.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mmoment {

enum class DeviationMethod { eig_exact, grad_restarts, net_bruteforce };

struct DeviationReport {
    double v_p = 0.0;
    Vec maximizer;
    DeviationMethod method = DeviationMethod::grad_restarts;
    int restarts_used = 0;
    std::optional<double> A; // bound-side quantity at C = 1
    double B = 0.0;
    double kappa = 0.0; // single-sample estimate (max_j |X_j|_2^p)^{1/p}
    std::optional<double> Q;
};

struct DeviationOptions {
    DeviationMethod method = DeviationMethod::grad_restarts;
    bool auto_method = true; // pick eig (p=2, Euclidean-type body) or net (n<=3)
    int restarts = 0;        // 0 -> 50 n
    double net_step = 2e-2;
    std::uint64_t seed = 0x6d6f6d656e74ull; // restart stream
    // optional inputs for the tail quantity Q
    std::optional<double> alpha;
    std::optional<double> psi_alpha_norm_x2; // ||X|_2 ||_{psi_alpha} estimate
    std::optional<double> mean_v_p;
    std::optional<double> precomputed_B; // skip the oracle maximization
    double constant_C = 1.0;
    double constant_c_alpha_p = 1.0;
};

// (1/m) sum_j |<X_j, y>|^p with compensated summation.
double empirical_pth_moment(const SampleMatrix& sample, const Vec& y, double p);
Vec empirical_pth_moment_grad(const SampleMatrix& sample, const Vec& y, double p);

// Maximal deviation sup_{y in K} |empirical - exact| of the p-th moment.
// Dispatch: exact spectral route for p = 2 on Euclidean-type bodies, direction
// net for n <= 3, projected gradient ascent with restarts otherwise (a
// certified lower bound on the sup).
DeviationReport deviation_sup(const SampleMatrix& sample, const RandomVectorModel& model,
                              const ConvexBody& body, double p, const DeviationOptions& opts = {});

// (E max_{j<=m} |X_j|_2^p)^{1/p} by Monte Carlo over independent replicas.
MomentEstimate kappa_pm(const RandomVectorModel& model, double p, int m, int replicas,
                        RngStream rng);

// Refined parameter (E max_j |X_j|_2^2 max_j ||X_j||_{K^o}^{p-2})^{1/p} on the
// same replica layout.
MomentEstimate kappa_prime(const RandomVectorModel& model, const ConvexBody& body, double p,
                           int m, int replicas, RngStream rng);

enum class PsiMethod { mgf_bisection, moment_ratio };

struct PsiNormEstimate {
    double alpha = 0.0;
    double value = 0.0;
    PsiMethod method = PsiMethod::mgf_bisection;
    long mc_samples = 0;
    double std_error = 0.0;
};

// Orlicz norm of a scalar sample: either bisection on the empirical
// exponential-moment equation E exp((|z|/lambda)^alpha) = 2, or the
// equivalent-norm route sup_r ||z||_r / r^{1/alpha} over r = 1..ceil(log m).
// with_std_error=false skips the subsampling spread estimate (the value is
// unchanged); useful when the caller replicates the whole estimator anyway.
PsiNormEstimate psi_alpha_norm(const std::vector<double>& sample, double alpha,
                               PsiMethod method = PsiMethod::mgf_bisection,
                               bool with_std_error = true);

struct PsiGrowthRow {
    long m = 0;
    double psi_of_max = 0.0;
    double ratio_to_log_power = 0.0; // psi / log(m)^{1/delta}; raw value at m = 1
};

// Growth of || max_{j<=m} |Z_j| ||_{psi_delta} across a list of sample sizes;
// Z is |X|_2 (default) or <X, y> for a supplied direction.
std::vector<PsiGrowthRow> max_psi_growth(const RandomVectorModel& model, double delta,
                                         const std::vector<long>& m_list, int replicas,
                                         RngStream rng,
                                         const std::optional<Vec>& functional = std::nullopt);

struct BoundQuantities {
    double a_base = 0.0; // A at C = 1
    double B = 0.0;
    std::optional<double> q_base; // Q at c_{alpha,p} = 1
    double A(double c_const, double p) const { return std::pow(c_const, p) * a_base; }
    double Q(double c_const) const { return q_base ? c_const * *q_base : 0.0; }
};

// Bound-side quantities: A from (log m)^{1/q*}/sqrt(m) (D kappa)^{p/2} times
// lambda^p, B = sup_K E|<X,y>|^p (closed form where possible, optimizer
// otherwise), Q from the tail inequality when psi/EV estimates are supplied.
BoundQuantities bound_quantities(const ConvexBody& body, const RandomVectorModel& model, double p,
                             long m, double kappa_estimate,
                             const std::optional<double>& psi_alpha_x2 = std::nullopt,
                             const std::optional<double>& alpha = std::nullopt,
                             const std::optional<double>& mean_v_p = std::nullopt,
                             const std::optional<double>& precomputed_B = std::nullopt);

// sup_{y in K} E |<X, y>|^p (exact oracle required).
double sup_exact_moment(const ConvexBody& body, const RandomVectorModel& model, double p,
                        RngStream rng);

std::string to_string(DeviationMethod m);

} // namespace mmoment
