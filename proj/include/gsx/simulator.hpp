#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gsx/evaluator.hpp"
#include "gsx/rng.hpp"

namespace gsx {

enum class Estimation { ML, REML };
enum class BoundaryAdjustment { None, QuantileSubstitution };

/// The four analysis procedures of the small-sample study: ML/REML
/// estimation, with or without quantile-substitution boundary adjustment.
struct AnalysisProcedure {
    Estimation estimation = Estimation::ML;
    BoundaryAdjustment adjustment = BoundaryAdjustment::None;

    static AnalysisProcedure from_index(int index);  ///< 1..4
    int index() const;
    std::string label() const;
};

/// Generative model parameters, on original treatment labels.
struct TrueParameters {
    double mu0 = 0.0;
    std::vector<double> period;  ///< pi_2..pi_D
    std::vector<double> tau;     ///< tau_1..tau_{D-1}
    VarianceComponents vc;

    void validate(int n_treatments) const;
};

/// One patient's stage of crossover data. Treatments carry original labels;
/// responses are ordered by period.
struct PatientRecord {
    long id = 0;  ///< unique within a stage's batch
    int stage = 0;
    int sequence_index = 0;
    std::vector<int> treatments;
    Eigen::VectorXd responses;
};

struct FitResult {
    Eigen::VectorXd beta_hat;  ///< (mu0, pi_2..pi_D, tau_1..tau_{D-1})
    double sigma_b_sq_hat = 0.0;
    double sigma_e_sq_hat = 0.0;
    Eigen::VectorXd tau_hat;
    Eigen::VectorXd observed_information;  ///< per experimental treatment
    bool sigma_b_at_zero = false;
    bool converged = true;
};

struct TrialOutcome {
    StoppingPath path;  ///< original treatment labels
    long patients = 0;
    long observations = 0;
    int stages_run = 0;
    bool fit_failed = false;
    bool sigma_b_at_zero = false;
};

struct SimulationReport {
    std::string procedure_label;
    long replicates = 0;
    long fit_failures = 0;       ///< excluded from every rate denominator
    long sigma_b_at_zero = 0;    ///< replicates with a boundary variance estimate
    double reject_any_rate = 0.0;
    double reject_any_se = 0.0;
    std::vector<double> reject_rate;     ///< per experimental treatment
    std::vector<double> reject_rate_se;
    std::vector<long> stop_stage_counts;           ///< by last stage run
    std::map<std::vector<int>, long> path_counts;  ///< key: per-arm code 2(omega-1)+psi
    double expected_n = 0.0;
    double expected_o = 0.0;
    std::uint64_t seed = 0;
};

/// Patient data for one stage: group_size patients split equally over the
/// sequence set for the remaining treatments (original labels, control
/// first), responses drawn from the linear mixed model.
std::vector<PatientRecord> generate_stage_data(const TrialDesign& design,
                                               const TrueParameters& params,
                                               const std::vector<int>& remaining, int stage,
                                               CounterRng& rng);

/// Linear mixed model fit on all accumulated data by profiled ML or REML:
/// golden-section search on log(sigma_b^2/sigma_e^2) with sigma_e^2 and the
/// fixed effects profiled in closed form.
FitResult fit_lmm(const std::vector<PatientRecord>& data, int n_treatments, Estimation estimation);

/// Generalized least squares with the variance components fixed at truth;
/// the test statistics then follow the canonical joint distribution exactly.
FitResult fit_gls_known_variance(const std::vector<PatientRecord>& data, int n_treatments,
                                 const VarianceComponents& vc);

/// Student-t quantile at the normal cumulative probability of `boundary`.
double quantile_substitute(double boundary, double df);

/// Residual degrees of freedom of the within-subject stratum in the
/// balanced multilevel ANOVA decomposition: observations minus subjects
/// minus active non-intercept fixed effects, floored at 1.
long anova_df(const std::vector<PatientRecord>& data, int n_treatments);

TrialOutcome run_trial(const TrialDesign& design, const TrueParameters& params,
                       const AnalysisProcedure& procedure, std::uint64_t seed,
                       std::uint64_t replicate);

/// run_trial with estimation skipped (known-variance cross-validation).
TrialOutcome run_trial_known_variance(const TrialDesign& design, const TrueParameters& params,
                                      std::uint64_t seed, std::uint64_t replicate);

SimulationReport simulate(const TrialDesign& design, const TrueParameters& params,
                          const AnalysisProcedure& procedure, long replicates, std::uint64_t seed,
                          int threads = 0);

SimulationReport simulate_known_variance(const TrialDesign& design, const TrueParameters& params,
                                         long replicates, std::uint64_t seed, int threads = 0);

}  // namespace gsx
