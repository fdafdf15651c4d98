#include "gsx/covariance.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gsx {

void VarianceComponents::validate() const {
    if (!(sigma_b_sq > 0.0) || !(sigma_e_sq > 0.0)) {
        throw std::invalid_argument("variance components must be strictly positive");
    }
}

StageAllocation StageAllocation::no_drops(int n_treatments, int stages_completed) {
    StageAllocation alloc;
    alloc.counts.assign(n_treatments, 0);
    alloc.counts[n_treatments - 1] = stages_completed;
    return alloc;
}

long StageAllocation::stages_completed() const {
    return std::accumulate(counts.begin(), counts.end(), 0L);
}

void StageAllocation::validate(int n_treatments) const {
    if (static_cast<int>(counts.size()) != n_treatments) {
        throw std::invalid_argument("stage allocation must have one count per treatment total");
    }
    if (counts[0] != 0) {
        throw std::invalid_argument("a stage is never run with only the control remaining");
    }
    for (long c : counts) {
        if (c < 0) throw std::invalid_argument("stage counts must be non-negative");
    }
    if (stages_completed() < 1) {
        throw std::invalid_argument("at least one completed stage required");
    }
}

double FixedEffectsCovariance::tau_cov(int d1, int d2) const {
    const int D = n_treatments;
    if (d1 < 1 || d1 >= D || d2 < 1 || d2 >= D) {
        throw std::invalid_argument("treatment index out of range");
    }
    return matrix(D - 1 + d1, D - 1 + d2);
}

Eigen::MatrixXd sigma_r(int r, const VarianceComponents& vc) {
    if (r < 1) throw std::invalid_argument("r must be positive");
    vc.validate();
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(r, r, vc.sigma_b_sq);
    m.diagonal().array() += vc.sigma_e_sq;
    return m;
}

Eigen::MatrixXd sigma_r_inverse(int r, const VarianceComponents& vc) {
    if (r < 1) throw std::invalid_argument("r must be positive");
    vc.validate();
    const double se = vc.sigma_e_sq, sb = vc.sigma_b_sq;
    const double denom = se * (se + r * sb);
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(r, r, -sb / denom);
    m.diagonal().array() += (se + r * sb) / denom;
    return m;
}

namespace {

// Closed-form information blocks; valid for any positive weight because the
// sequence-set size cancels out of every entry.
Eigen::MatrixXd stage_information_closed(int r, int n_treatments, double group_size,
                                         const VarianceComponents& vc) {
    const int D = n_treatments;
    if (r < 2 || r > D) throw std::invalid_argument("r must lie in [2, D]");
    vc.validate();

    const double se = vc.sigma_e_sq, sb = vc.sigma_b_sq;
    const double denom = se * (se + r * sb);
    const double a = r * se / denom;
    const double b = se / denom;
    const double c_diag = (se + (r - 1) * sb) / denom;
    const double c_off = -sb / denom;
    const double e = se / (r * denom);

    // Active effects: pi_2..pi_r at columns 1..r-1, tau_1..tau_{r-1} at
    // columns D..D+r-2. Everything else stays zero when r < D.
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(2 * D - 1, 2 * D - 1);
    info(0, 0) = a;
    for (int p = 0; p < r - 1; ++p) {
        const int pi_p = 1 + p;
        const int tau_p = D + p;
        info(0, pi_p) = info(pi_p, 0) = b;
        info(0, tau_p) = info(tau_p, 0) = b;
        for (int q = 0; q < r - 1; ++q) {
            const int pi_q = 1 + q;
            const int tau_q = D + q;
            const double c = (p == q) ? c_diag : c_off;
            info(pi_p, pi_q) = c;
            info(tau_p, tau_q) = c;
            info(pi_p, tau_q) = e;
            info(tau_p, pi_q) = e;
        }
    }
    return group_size * info;
}

}  // namespace

Eigen::MatrixXd stage_information(int r, int n_treatments, long group_size,
                                  const VarianceComponents& vc, const SequenceSet& seqs) {
    if (seqs.r != r) throw std::invalid_argument("sequence set was generated for a different r");
    if (group_size < 1 || group_size % seqs.size() != 0) {
        throw std::invalid_argument("group size must be divisible by the sequence count");
    }
    return stage_information_closed(r, n_treatments, static_cast<double>(group_size), vc);
}

FixedEffectsCovariance fixed_effects_covariance(const StageAllocation& alloc, int n_treatments,
                                                long group_size, const VarianceComponents& vc,
                                                SequenceFamily /*family*/) {
    const int D = n_treatments;
    alloc.validate(D);
    vc.validate();
    if (group_size < 1) throw std::invalid_argument("group size must be positive");

    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(2 * D - 1, 2 * D - 1);
    for (int r = 2; r <= D; ++r) {
        if (alloc.counts[r - 1] == 0) continue;
        info += static_cast<double>(alloc.counts[r - 1]) *
                stage_information_closed(r, D, static_cast<double>(group_size), vc);
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    const auto& vals = eig.eigenvalues();
    const double lmax = vals.maxCoeff();
    if (!(lmax > 0.0) || vals.minCoeff() < 1e-12 * lmax) {
        throw std::invalid_argument(
            "information matrix is singular for this stage allocation "
            "(a full-treatment stage is required)");
    }

    FixedEffectsCovariance cov;
    cov.n_treatments = D;
    cov.matrix = eig.eigenvectors() * vals.cwiseInverse().asDiagonal() *
                 eig.eigenvectors().transpose();
    return cov;
}

JointDistribution joint_distribution(int n_treatments, int stages, long group_size,
                                     const VarianceComponents& vc) {
    if (n_treatments < 2) throw std::invalid_argument("need at least 2 treatments");
    if (stages < 1) throw std::invalid_argument("need at least 1 stage");
    if (group_size < 1) throw std::invalid_argument("group size must be positive");
    vc.validate();

    JointDistribution jd;
    jd.n_treatments = n_treatments;
    jd.stages = stages;
    const int k = jd.dimension();
    jd.information.resize(k);
    jd.correlation.resize(k, k);

    for (int l = 1; l <= stages; ++l) {
        for (int d = 1; d < n_treatments; ++d) {
            jd.information(jd.index(d, l)) = l * group_size / (2.0 * vc.sigma_e_sq);
        }
    }
    for (int l1 = 1; l1 <= stages; ++l1) {
        for (int d1 = 1; d1 < n_treatments; ++d1) {
            for (int l2 = 1; l2 <= stages; ++l2) {
                for (int d2 = 1; d2 < n_treatments; ++d2) {
                    const int a = std::min(l1, l2), b = std::max(l1, l2);
                    const double same = (d1 == d2) ? 1.0 : 0.0;
                    jd.correlation(jd.index(d1, l1), jd.index(d2, l2)) =
                        0.5 * std::sqrt(static_cast<double>(a) / b) * (1.0 + same);
                }
            }
        }
    }
    return jd;
}

}  // namespace gsx
