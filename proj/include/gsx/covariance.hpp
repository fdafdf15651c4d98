#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gsx/sequences.hpp"

namespace gsx {

struct VarianceComponents {
    double sigma_b_sq = 0.0;  ///< between-subject variance
    double sigma_e_sq = 0.0;  ///< within-subject variance

    void validate() const;
};

/// Number of completed stages with exactly r treatments remaining,
/// counts[r-1] for r = 1..D. counts[0] is identically zero because a stage
/// is only run with at least one experimental treatment present.
struct StageAllocation {
    std::vector<long> counts;

    static StageAllocation no_drops(int n_treatments, int stages_completed);
    long stages_completed() const;
    void validate(int n_treatments) const;
};

/// Covariance of the fixed-effects estimates at one analysis, ordered
/// (mu0, pi_2..pi_D, tau_1..tau_{D-1}).
struct FixedEffectsCovariance {
    int n_treatments = 0;
    Eigen::MatrixXd matrix;

    /// cov(tau_d1_hat, tau_d2_hat) for experimental treatments d in 1..D-1.
    double tau_cov(int d1, int d2) const;
};

/// Information vector and correlation matrix of all L(D-1) standardized
/// statistics under the canonical joint distribution. Entry (d, l) lives at
/// flat index (l-1)(D-1) + (d-1).
struct JointDistribution {
    int n_treatments = 0;
    int stages = 0;
    Eigen::VectorXd information;
    Eigen::MatrixXd correlation;

    int index(int treatment, int stage) const {
        return (stage - 1) * (n_treatments - 1) + (treatment - 1);
    }
    int dimension() const { return stages * (n_treatments - 1); }
};

/// Response covariance for one patient on r treatments: compound symmetric,
/// sigma_b^2 everywhere plus sigma_e^2 on the diagonal.
Eigen::MatrixXd sigma_r(int r, const VarianceComponents& vc);

/// Closed-form inverse of sigma_r.
Eigen::MatrixXd sigma_r_inverse(int r, const VarianceComponents& vc);

/// Fisher information contributed by one stage run with r of D treatments:
/// sum over the sequence set of (n/|S_r|) X^T Sigma_r^{-1} X, assembled from
/// its closed-form blocks. Rows/columns of effects absent at this stage are
/// zero.
Eigen::MatrixXd stage_information(int r, int n_treatments, long group_size,
                                  const VarianceComponents& vc, const SequenceSet& seqs);

/// Inverse of the accumulated information over a stage allocation. The
/// result is identical for every period-balanced family, so the family
/// argument only documents intent. Throws std::invalid_argument when the
/// allocation leaves the information matrix singular (reciprocal condition
/// number below 1e-12).
FixedEffectsCovariance fixed_effects_covariance(const StageAllocation& alloc, int n_treatments,
                                                long group_size, const VarianceComponents& vc,
                                                SequenceFamily family);

/// Canonical joint distribution of the standardized statistics:
/// I_dl = l n / (2 sigma_e^2) and corr = (1/2) sqrt(l1/l2) (1 + delta_d1d2).
JointDistribution joint_distribution(int n_treatments, int stages, long group_size,
                                     const VarianceComponents& vc);

}  // namespace gsx
