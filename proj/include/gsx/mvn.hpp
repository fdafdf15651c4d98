#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace gsx {

/// MVN probability over a hyper-rectangle. Infinite limits are encoded as
/// +/-std::numeric_limits<double>::infinity(), never as large sentinels.
struct RectangleProblem {
    Eigen::VectorXd mean;
    Eigen::MatrixXd correlation;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    int dimension() const { return static_cast<int>(mean.size()); }
    void validate() const;
};

struct IntegrationResult {
    double value = 0.0;
    double error_estimate = 0.0;  ///< stopping bound, 3 x QMC standard error
    long evaluations = 0;
    bool psd_repaired = false;
};

/// Drops every dimension whose limits are (-inf, +inf); the probability is
/// unchanged by marginalization.
RectangleProblem marginalize(const RectangleProblem& problem);

/// Estimates P(lower <= X <= upper), X ~ N(mean, correlation), by the
/// separation-of-variables transform with truncation-ordered Cholesky and a
/// shift-randomized Richtmyer lattice rule. Stops once the error bound
/// drops below tol or the evaluation budget is exhausted; reproducible for
/// a fixed seed.
IntegrationResult mvn_rectangle(const RectangleProblem& problem, double tol, std::uint64_t seed,
                                int n_shifts = 12);

}  // namespace gsx
