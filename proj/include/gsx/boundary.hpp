#pragma once

#include <cstdint>

#include "gsx/evaluator.hpp"

namespace gsx {

/// Inputs of a power-family boundary determination.
struct PowerFamilySpec {
    double alpha = 0.05;
    double beta = 0.2;
    double delta = 0.0;       ///< clinically relevant difference, > 0
    double sigma_e_sq = 0.0;  ///< within-subject variance
    int stages = 1;           ///< L
    double shape = 0.0;       ///< Delta
    int n_treatments = 2;     ///< D
    SequenceFamily family = SequenceFamily::Williams;

    /// Single-stage designs round n to an integer only; set to also force
    /// divisibility by the sequence-set least common multiple.
    bool force_divisible_single_stage = false;

    double solver_tol = 2e-6;  ///< integrator tolerance for error-rate evaluations
    std::uint64_t seed = 0x9e3779b9;

    void validate() const;
};

struct BoundarySolution {
    TrialDesign design;
    double exact_n = 0.0;         ///< unrounded group size from the closure constraint
    double efficacy_scale = 0.0;  ///< C_e at the rounded n
    double futility_scale = 0.0;  ///< C_f at the rounded n
    double achieved_alpha = 0.0;  ///< reject-any probability at the global null
    double achieved_power = 0.0;  ///< pr(reject H_01) at tau_1 = delta
};

/// Power-family scale factor (l/L)^(Delta - 1/2); equals 1 at l = L.
double boundary_shape(int stage, int stages, double shape);

/// Scales and implied group size of the exact (unrounded) solve: the
/// closure f_L = e_L ties n to C_e + C_f, and (C_e, C_f) are root-found so
/// the familywise error rate at the global null is alpha and the rejection
/// probability of H_01 at delta is 1 - beta.
struct ExactScales {
    double efficacy_scale = 0.0;
    double futility_scale = 0.0;
    double exact_n = 0.0;
};
ExactScales solve_exact_scales(const PowerFamilySpec& spec);

/// Boundaries for given scales at a fixed group size:
/// e_l = C_e (l/L)^(Delta-1/2), f_l = delta sqrt(I_l) - C_f (l/L)^(Delta-1/2),
/// truncated to f_l <= e_l.
void power_family_boundaries(const PowerFamilySpec& spec, double n, double efficacy_scale,
                             double futility_scale, std::vector<double>* futility,
                             std::vector<double>* efficacy);

/// Full determination: solve (C_e, C_f) and the implied exact n for
/// (alpha, 1-beta), round n up to the divisibility requirement, then
/// re-solve the scales at the rounded n holding alpha exact.
BoundarySolution solve_boundaries(const PowerFamilySpec& spec);

/// The alpha-anchored solve at a caller-fixed group size (no rounding).
BoundarySolution solve_boundaries_fixed_n(const PowerFamilySpec& spec, long group_size);

/// Convenience wrapper; requires spec.stages == 1.
BoundarySolution single_stage_design(const PowerFamilySpec& spec);

}  // namespace gsx
