#pragma once

#include "mmoment/deviation.hpp"
#include "mmoment/geometry.hpp"
#include "mmoment/lewis.hpp"
#include "mmoment/models.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmoment {

enum class Scenario { deviation, tail, lewis, psi2, norms, fuzz };

struct ExperimentConfig {
    Scenario scenario = Scenario::deviation;
    std::string model;   // gaussian_iso | rademacher_cube | laplace_iso |
                         // [isotropized_]uniform_lq_ball | discrete_atoms |
                         // subspace_gaussian(N=..) for the lewis scenario
    std::string body;    // euclid_ball | lq_ball
    int n = 0;
    double p = 2.0;
    double q = 2.0;      // exponent for l_q bodies/models
    std::vector<long> m_list;
    int replicas = 1;
    double eps = 0.0;
    double alpha = 0.0;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string subspace_file;
    std::string atoms_file;
    double constant_C = 1.0;
    double constant_c_alpha_p = 1.0;
};

struct ResultRow {
    std::string scenario;
    std::string model;
    std::string body;
    int n = 0;
    double p = 0.0;
    long m = 0;
    long replica = 0; // -1 for aggregate rows
    std::uint64_t seed = 0;
    std::string metric_name;
    double metric_value = 0.0;
    double std_error = 0.0;
    double runtime_ms = 0.0;
};

// Line-oriented "key = value" format; unknown keys are rejected. Validation is
// complete before any sampling starts.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
void validate_config(const ExperimentConfig& cfg);

std::string scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

// RFC-4180, header row, shortest round-trip decimals, LF endings.
std::string to_csv(const std::vector<ResultRow>& rows);
// CSV with the runtime_ms column cleared (reproducibility comparisons).
std::string to_csv_stable(const std::vector<ResultRow>& rows);

std::vector<ResultRow> run_deviation(const ExperimentConfig& cfg);
std::vector<ResultRow> run_tail(const ExperimentConfig& cfg);
std::vector<ResultRow> run_lewis(const ExperimentConfig& cfg);
std::vector<ResultRow> run_psi2(const ExperimentConfig& cfg);
std::vector<ResultRow> run_norms(const ExperimentConfig& cfg);
std::vector<ResultRow> run_fuzz(const ExperimentConfig& cfg);

std::vector<ResultRow> run_scenario(const ExperimentConfig& cfg);

// True when a fuzz run recorded violations (CLI exit code 4).
bool has_property_violation(const std::vector<ResultRow>& rows);
// True when a scenario surfaced a solver failure as an error row (exit code 3).
bool has_numeric_error_row(const std::vector<ResultRow>& rows);

// Deterministic fan-out: task k runs on some worker but writes slot k, so the
// result order is independent of the thread count.
std::vector<std::vector<ResultRow>> run_tasks(int task_count, int threads,
                                              const std::function<std::vector<ResultRow>(int)>& fn);

// Model/body construction from the config strings (shared with tests).
RandomVectorModel model_from_config(const ExperimentConfig& cfg);
ConvexBody body_from_config(const ExperimentConfig& cfg);

} // namespace mmoment
