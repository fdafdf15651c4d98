#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "gsx/covariance.hpp"
#include "gsx/mvn.hpp"
#include "gsx/sequences.hpp"

namespace gsx {

/// Complete description of a group sequential crossover trial.
struct TrialDesign {
    int n_treatments = 0;  ///< D, including the control
    int stages = 0;        ///< L
    long group_size = 0;   ///< n, patients recruited per stage
    std::vector<double> futility;  ///< f_1..f_L
    std::vector<double> efficacy;  ///< e_1..e_L
    VarianceComponents vc;         ///< sigma_b_sq may be zero outside simulation
    SequenceFamily family = SequenceFamily::Williams;
    double delta = 0.0;  ///< clinically relevant difference
    double alpha = 0.0;
    double beta = 0.0;

    void validate() const;
    long max_patients() const { return group_size * stages; }
    long max_observations() const { return group_size * stages * n_treatments; }
};

/// One trial realization: the analysis at which each experimental treatment
/// left the trial and whether it left for efficacy (1) or futility (0).
struct StoppingPath {
    std::vector<int> omega;
    std::vector<int> psi;

    bool any_rejection() const;
    int last_stage() const;  ///< max over omega
};

struct OperatingCharacteristics {
    double theta = 0.0;        ///< common treatment effect the row was evaluated at
    double reject_h01 = 0.0;
    double reject_any = 0.0;   ///< familywise error rate when theta <= 0
    double expected_n = 0.0;
    double expected_o = 0.0;
    long max_n = 0;
    long max_o = 0;
    double total_probability = 0.0;  ///< path-sum sanity value, should be ~1
    double error_bound = 0.0;        ///< summed per-path integration error bounds
};

/// All (2L)^(D-1) stopping paths in a fixed deterministic order.
std::vector<StoppingPath> enumerate_paths(int n_treatments, int stages);

/// Integration limits for one path over all L(D-1) statistic coordinates:
/// continuation stages get [f_l, e_l), the drop stage gets [e, inf) or
/// (-inf, f) by drop reason, and later stages get (-inf, inf).
std::pair<Eigen::VectorXd, Eigen::VectorXd> path_bounds(const StoppingPath& path,
                                                        const TrialDesign& design);

/// Rectangle problem for pr(omega, psi | tau) under the canonical joint
/// distribution, mean entry tau_d * sqrt(I_dl).
RectangleProblem path_problem(const StoppingPath& path, const TrialDesign& design,
                              const Eigen::VectorXd& tau);

double path_probability(const StoppingPath& path, const TrialDesign& design,
                        const Eigen::VectorXd& tau, double tol, std::uint64_t seed);

/// Sum of path probabilities over every path rejecting at least one null.
double familywise_error(const TrialDesign& design, const Eigen::VectorXd& tau, double tol,
                        std::uint64_t seed, int threads = 0);

/// Complement route to the same quantity: one minus the probability that no
/// treatment is ever dropped for efficacy. Sums L^(D-1) integrals instead of
/// (2L)^(D-1) - L^(D-1).
double any_rejection_probability(const TrialDesign& design, const Eigen::VectorXd& tau,
                                 double tol, std::uint64_t seed, int threads = 0);

/// Reject-any probability at the global null for raw boundary vectors;
/// independent of the group size. Used by the boundary solver while n is
/// still fractional.
double any_rejection_probability_null(int n_treatments, const std::vector<double>& futility,
                                      const std::vector<double>& efficacy, double tol,
                                      std::uint64_t seed, int threads = 0);

/// Rejection probability of a single treatment's sequential test with mean
/// drift[l-1] = E[Z_l] and the canonical sqrt(l1/l2) correlation.
double sequential_rejection_probability(const std::vector<double>& futility,
                                        const std::vector<double>& efficacy,
                                        const std::vector<double>& drift, double tol,
                                        std::uint64_t seed);

/// Probability H_01 is rejected, computed on the single-treatment
/// restriction of (Lambda, I); independent of the other treatment effects.
double rejection_probability_h01(const TrialDesign& design, double tau_1, double tol,
                                 std::uint64_t seed);

/// Probability-weighted expected patient and observation counts.
std::pair<double, double> expected_counts(const TrialDesign& design, const Eigen::VectorXd& tau,
                                          double tol, std::uint64_t seed, int threads = 0);

/// Everything above in one pass over the path set, at tau = (theta,...,theta).
OperatingCharacteristics operating_characteristics(const TrialDesign& design, double theta,
                                                   double tol, std::uint64_t seed,
                                                   int threads = 0);

std::vector<OperatingCharacteristics> characteristics_curve(const TrialDesign& design,
                                                            const std::vector<double>& theta_grid,
                                                            double tol, std::uint64_t seed,
                                                            int threads = 0);

/// Default curve grid: [-delta/2, 3 delta/2] with the given point count.
std::vector<double> default_theta_grid(double delta, int points = 101);

}  // namespace gsx
