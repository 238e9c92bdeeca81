#pragma once

#include "mmoment/linalg.hpp"
#include "mmoment/quadrature.hpp"
#include "mmoment/rng.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mmoment {

enum class ModelKind { gaussian_iso, rademacher_cube, uniform_lq_ball, discrete_atoms, laplace_iso };

// Immutable sampler descriptor. Draws are pure functions of an RngStream, so a
// model can be shared freely between workers.
class RandomVectorModel {
  public:
    static RandomVectorModel gaussian_iso(int n);
    static RandomVectorModel rademacher_cube(int n);
    static RandomVectorModel laplace_iso(int n);
    static RandomVectorModel uniform_lq_ball(int n, double q); // q >= 1
    static RandomVectorModel discrete_atoms(std::vector<Vec> atoms, std::vector<double> probs);

    ModelKind kind() const { return kind_; }
    int dim() const { return dim_; }
    double lq_exponent() const { return q_; }
    bool isotropized() const { return isotropized_; }
    std::string descriptor() const;

    const std::vector<Vec>& atoms() const { return atoms_; }
    const std::vector<double>& atom_probs() const { return probs_; }

    // One draw; consumes a fixed number of stream values per call.
    Vec draw(RngStream& rng) const;

    // Exact covariance E X X^T (known for every kind, including whitened ones).
    Mat covariance() const;

    bool exact_moment_available(double p) const;

    // E |<X, y>|^p where an exact route exists:
    //   gaussian (any p), rademacher n <= 20 (sign enumeration), discrete atoms,
    //   and p = 2 for everything via the covariance. Otherwise nullopt.
    std::optional<double> exact_pth_moment(const Vec& y, double p) const;
    // Gradient of the map y -> E |<X, y>|^p on the same availability domain.
    std::optional<Vec> exact_pth_moment_grad(const Vec& y, double p) const;

    // Model composed with a linear map (draws become W X); covariance stays exact.
    RandomVectorModel with_whitening(const Mat& w) const;
    RandomVectorModel with_scaling(double s) const;

  private:
    friend RandomVectorModel isotropize(const RandomVectorModel&, int, RngStream);

    RandomVectorModel() = default;

    Vec draw_raw(RngStream& rng) const;
    Mat raw_covariance() const;
    std::optional<double> raw_exact_moment(const Vec& y, double p) const;
    std::optional<Vec> raw_exact_grad(const Vec& y, double p) const;

    ModelKind kind_ = ModelKind::gaussian_iso;
    int dim_ = 0;
    double q_ = 2.0;
    bool isotropized_ = false;

    std::vector<Vec> atoms_;
    std::vector<double> probs_;
    std::vector<double> cum_probs_;

    // optional post-composition X -> W X (pilot whitening) or scalar scaling
    std::shared_ptr<const Mat> whiten_;
    double scale_ = 1.0;

    std::shared_ptr<const GammaQuantileTable> gn_table_; // for l_q sampling
};

// m i.i.d. draws, one per row, together with the stream that produced them.
struct SampleMatrix {
    Mat rows;            // m x n
    RngStream seed_info; // descriptor of the stream as handed in
    std::string model_ref;

    int count() const { return rows.rows; }
    int dim() const { return rows.cols; }
};

SampleMatrix sample(const RandomVectorModel& model, int m, RngStream rng);
SampleMatrix sample_from_rows(std::vector<Vec> rows, const std::string& model_ref);

// Composes the model with a whitening map so that the result is (approximately)
// isotropic: closed-form scalar for uniform_lq_ball, pilot-covariance whitening
// otherwise. Sets the isotropized flag.
RandomVectorModel isotropize(const RandomVectorModel& model, int pilot_m, RngStream rng);

struct MomentEstimate {
    double value;
    double std_error;
    bool beyond_stated_regime = false; // euclid_norm_moment: s > 2 sqrt(n)
};

// Monte Carlo estimate of (E |X|_2^s)^{1/s} with delta-method standard error.
MomentEstimate euclid_norm_moment(const RandomVectorModel& model, double s, int m_mc,
                                  RngStream rng);

// Text format: first line "N n", then N lines of n coordinates and a probability.
RandomVectorModel load_atoms_file(const std::string& path);
void save_atoms_file(const std::string& path, const RandomVectorModel& model);

} // namespace mmoment
