// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "gsx/boundary.hpp"
#include "gsx/design_io.hpp"
#include "gsx/evaluator.hpp"
#include "gsx/simulator.hpp"
#include "gsx/version.hpp"
#include "oracles.hpp"

using namespace gsx;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

class Criterion {
  public:
    explicit Criterion(std::string name) : name_(std::move(name)), start_(Clock::now()) {}

    void require(bool ok, const std::string& what) {
        if (!ok) {
            failed_.push_back(what);
        }
        ++checks_;
    }

    void finish() {
        const double secs =
            std::chrono::duration<double>(Clock::now() - start_).count();
        if (failed_.empty()) {
            std::printf("[PASS] %s (%d checks, %.1f s)\n", name_.c_str(), checks_, secs);
        } else {
            ++g_failures;
            std::printf("[FAIL] %s (%zu of %d checks failed, %.1f s)\n", name_.c_str(),
                        failed_.size(), checks_, secs);
            for (const auto& what : failed_) {
                std::printf("       %s\n", what.c_str());
            }
        }
    }

  private:
    std::string name_;
    Clock::time_point start_;
    int checks_ = 0;
    std::vector<std::string> failed_;
};

std::string describe(const char* what, double got, double want, double tol) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s: got %.6f, wanted %.6f +/- %.4g", what, got, want, tol);
    return buf;
}

bool close(double got, double want, double tol) { return std::abs(got - want) <= tol; }

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------
// 1. Closed-form covariance algebra
// ---------------------------------------------------------------------------
void criterion_algebra() {
    Criterion c("criterion 1: closed-form algebra, D in 2..6, both families, 20 variance pairs");
    const auto pairs = gsx_test::random_variance_pairs(20);
    bool inverse_ok = true, info_ok = true, closed_ok = true, invariance_ok = true,
         determinant_ok = true;

    for (const auto& vc : pairs) {
        for (int r = 1; r <= 8; ++r) {
            const Eigen::MatrixXd prod = sigma_r(r, vc) * sigma_r_inverse(r, vc);
            inverse_ok = inverse_ok &&
                         max_abs(prod - Eigen::MatrixXd::Identity(r, r)) <= 1e-12;
        }
        for (auto family : {SequenceFamily::Latin, SequenceFamily::Williams}) {
            for (int D = 2; D <= 6; ++D) {
                const long n = 2 * lcm_group_size(D, family);
                for (int r = 2; r <= D; ++r) {
                    const auto seqs = generate_sequence_set(r, family);
                    info_ok = info_ok &&
                              max_abs(stage_information(r, D, n, vc, seqs) -
                                      gsx_test::brute_force_stage_information(r, D, n, vc,
                                                                              seqs)) <= 1e-10;
                }

                for (int l : {1, 3}) {
                    const auto cov = fixed_effects_covariance(
                        StageAllocation::no_drops(D, l), D, n, vc, family);
                    // No-drop covariance closed form.
                    Eigen::MatrixXd expected(2 * D - 1, 2 * D - 1);
                    const double F = vc.sigma_b_sq + (2.0 * D - 1.0) / D * vc.sigma_e_sq;
                    expected(0, 0) = F;
                    for (int i = 1; i < 2 * D - 1; ++i) {
                        expected(0, i) = expected(i, 0) = -vc.sigma_e_sq;
                    }
                    for (int i = 1; i < D; ++i) {
                        for (int j = 1; j < D; ++j) {
                            const double h = vc.sigma_e_sq * (1.0 + (i == j ? 1.0 : 0.0));
                            expected(i, j) = h;
                            expected(D - 1 + i, D - 1 + j) = h;
                            expected(i, D - 1 + j) = expected(D - 1 + i, j) = 0.0;
                        }
                    }
                    expected /= static_cast<double>(l) * n;
                    closed_ok = closed_ok && max_abs(cov.matrix - expected) <= 1e-10;
                }

                // Sub-block invariance under drops.
                for (int q = 2; q < D; ++q) {
                    StageAllocation alloc;
                    alloc.counts.assign(D, 0);
                    alloc.counts[D - 1] = 1;
                    alloc.counts[q - 1] = 1;
                    const auto dropped = fixed_effects_covariance(alloc, D, n, vc, family);
                    const auto reference = fixed_effects_covariance(
                        StageAllocation::no_drops(D, 2), D, n, vc, family);
                    std::vector<int> kept, others;
                    for (int j = 2; j <= q; ++j) kept.push_back(j - 1);
                    for (int d = 1; d <= q - 1; ++d) kept.push_back(D - 1 + d);
                    for (int j = q + 1; j <= D; ++j) others.push_back(j - 1);
                    for (int d = q; d <= D - 1; ++d) others.push_back(D - 1 + d);
                    for (int a : kept) {
                        for (int b : kept) {
                            invariance_ok = invariance_ok &&
                                             std::abs(dropped.matrix(a, b) -
                                                      reference.matrix(a, b)) <= 1e-10;
                        }
                        for (int b : others) {
                            invariance_ok = invariance_ok &&
                                             std::abs(dropped.matrix(a, b) -
                                                      reference.matrix(a, b)) <= 1e-10;
                        }
                    }
                }

                // Positive determinant of leading sub-blocks.
                const auto cov1 = fixed_effects_covariance(StageAllocation::no_drops(D, 1), D,
                                                           n, vc, family);
                for (int t = 2; t <= D; ++t) {
                    std::vector<int> idx = {0};
                    for (int j = 2; j <= t; ++j) idx.push_back(j - 1);
                    for (int d = 1; d <= t - 1; ++d) idx.push_back(D - 1 + d);
                    Eigen::MatrixXd sub(idx.size(), idx.size());
                    for (std::size_t a = 0; a < idx.size(); ++a) {
                        for (std::size_t b = 0; b < idx.size(); ++b) {
                            sub(a, b) = cov1.matrix(idx[a], idx[b]);
                        }
                    }
                    determinant_ok = determinant_ok && sub.determinant() > 0.0;
                }
            }
        }
    }
    c.require(inverse_ok, "response-covariance inverse identity exceeded 1e-12");
    c.require(info_ok, "stage information differed from brute-force accumulation beyond 1e-10");
    c.require(closed_ok, "no-drop covariance differed from the closed form beyond 1e-10");
    c.require(invariance_ok, "drop-case sub-blocks were not invariant to 1e-10");
    c.require(determinant_ok, "a leading covariance sub-block had a non-positive determinant");
    c.finish();
}

// ---------------------------------------------------------------------------
// 2. Canonical joint distribution
// ---------------------------------------------------------------------------
void criterion_joint_distribution() {
    Criterion c("criterion 2: canonical joint distribution and worked 4x4 matrix");

    bool formulas = true;
    for (int D : {2, 3, 4, 5}) {
        const long n = lcm_group_size(D, SequenceFamily::Williams);
        const VarianceComponents vc{10.12, 6.51};
        const auto direct = joint_distribution(D, 3, n, vc);
        const auto assembled = gsx_test::joint_distribution_via_covariance(
            D, 3, n, vc, SequenceFamily::Williams);
        formulas = formulas &&
                   (direct.information - assembled.information).cwiseAbs().maxCoeff() <=
                       1e-10 * direct.information.maxCoeff();
        formulas = formulas && max_abs(direct.correlation - assembled.correlation) <= 1e-10;
        for (int l = 1; l <= 3; ++l) {
            for (int d = 1; d < D; ++d) {
                formulas = formulas &&
                           std::abs(direct.information(direct.index(d, l)) -
                                    l * n / (2.0 * vc.sigma_e_sq)) <= 1e-10 * l * n;
            }
        }
    }
    c.require(formulas, "information or correlation disagreed with the covariance route");

    const auto jd = joint_distribution(3, 2, 12, {10.12, 6.51});
    const double r2 = std::sqrt(0.5);
    Eigen::MatrixXd worked(4, 4);
    worked << 1.0, 0.5, r2, 0.5 * r2,
              0.5, 1.0, 0.5 * r2, r2,
              r2, 0.5 * r2, 1.0, 0.5,
              0.5 * r2, r2, 0.5, 1.0;
    c.require(max_abs(jd.correlation - worked) == 0.0,
              "worked two-stage three-treatment matrix was not reproduced exactly");
    c.finish();
}

// ---------------------------------------------------------------------------
// 3. Integrator
// ---------------------------------------------------------------------------
void criterion_integrator(const TrialDesign& flat_zero_design) {
    Criterion c("criterion 3: integrator orthants and total probability over 216 paths");

    for (double rho : {-0.6, -0.2, 0.3, 0.5, 0.8}) {
        RectangleProblem p;
        p.mean = Eigen::VectorXd::Zero(2);
        p.correlation.resize(2, 2);
        p.correlation << 1.0, rho, rho, 1.0;
        p.lower = Eigen::VectorXd::Constant(2, -std::numeric_limits<double>::infinity());
        p.upper = Eigen::VectorXd::Zero(2);
        const double expected = 0.25 + std::asin(rho) / (2.0 * M_PI);
        const double got = mvn_rectangle(p, 1e-6, 97).value;
        c.require(close(got, expected, 1e-6),
                  describe("orthant probability", got, expected, 1e-6));
    }

    const auto paths = enumerate_paths(4, 3);
    c.require(paths.size() == 216, "path count was not 216");
    double total = 0.0;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    for (std::size_t i = 0; i < paths.size(); ++i) {
        total += path_probability(paths[i], flat_zero_design, zero, 1e-6, 1000 + i);
    }
    c.require(close(total, 1.0, 1e-4), describe("total probability", total, 1.0, 1e-4));
    c.finish();
}

// ---------------------------------------------------------------------------
// 4. Boundary solver fidelity
// ---------------------------------------------------------------------------
PowerFamilySpec small_sample_spec() {
    PowerFamilySpec spec;
    spec.alpha = 0.05;
    spec.beta = 0.2;
    spec.delta = 2.2;
    spec.sigma_e_sq = 6.51;
    spec.stages = 2;
    spec.shape = 0.0;
    spec.n_treatments = 4;
    return spec;
}

BoundarySolution criterion_boundary_fidelity() {
    Criterion c("criterion 4: two-stage boundary triple at n = 12");
    const auto sol = solve_boundaries_fixed_n(small_sample_spec(), 12);
    c.require(close(sol.design.futility[0], 0.768, 0.01),
              describe("f_1", sol.design.futility[0], 0.768, 0.01));
    c.require(close(sol.design.futility[1], 2.036, 0.01),
              describe("f_2 = e_2", sol.design.futility[1], 2.036, 0.01));
    c.require(close(sol.design.efficacy[0], 2.879, 0.01),
              describe("e_1", sol.design.efficacy[0], 2.879, 0.01));
    c.require(sol.design.efficacy[1] == sol.design.futility[1],
              "final boundaries did not close");
    c.finish();
    return sol;
}

// ---------------------------------------------------------------------------
// 5 and 6. Example designs table and the headline observation reduction
// ---------------------------------------------------------------------------
struct TableRow {
    double shape;
    long n;
    double power;
    double e_n0, e_nd, e_o0, e_od;
};

std::vector<BoundarySolution> criterion_table(const std::vector<BoundarySolution>& solutions) {
    Criterion c("criterion 5: example-design table across four shape parameters");
    const std::vector<TableRow> expected = {
        {-0.25, 36, 0.85, 76.8, 100.3, 269.3, 367.2},
        {0.00, 36, 0.83, 70.0, 95.7, 240.3, 341.8},
        {0.25, 48, 0.90, 82.6, 110.7, 283.1, 380.4},
        {0.50, 48, 0.83, 69.6, 98.9, 244.5, 327.7},
    };

    std::vector<BoundarySolution> out = solutions;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const TableRow& row = expected[i];
        const BoundarySolution& sol = solutions[i];
        char label[64];
        std::snprintf(label, sizeof(label), "shape %+0.2f", row.shape);
        const std::string tag(label);

        c.require(sol.design.group_size == row.n,
                  tag + describe(": n", sol.design.group_size, row.n, 0));
        c.require(close(sol.achieved_alpha, 0.05, 0.002),
                  tag + describe(": familywise error", sol.achieved_alpha, 0.05, 0.002));
        c.require(close(sol.achieved_power, row.power, 0.02),
                  tag + describe(": power at delta", sol.achieved_power, row.power, 0.02));
        c.require(sol.design.max_patients() == 3 * row.n,
                  tag + ": max patients was not 3n");
        c.require(sol.design.max_observations() == 12 * row.n,
                  tag + ": max observations was not 12n");

        const auto oc0 = operating_characteristics(sol.design, 0.0, 1e-6, 501 + i);
        const auto ocd = operating_characteristics(sol.design, 1.11, 1e-6, 601 + i);
        c.require(close(oc0.expected_n, row.e_n0, 1.0),
                  tag + describe(": E(N | null)", oc0.expected_n, row.e_n0, 1.0));
        c.require(close(oc0.expected_o, row.e_o0, 1.0),
                  tag + describe(": E(O | null)", oc0.expected_o, row.e_o0, 1.0));
        c.require(close(ocd.expected_n, row.e_nd, 1.0),
                  tag + describe(": E(N | delta)", ocd.expected_n, row.e_nd, 1.0));
        c.require(close(ocd.expected_o, row.e_od, 1.0),
                  tag + describe(": E(O | delta)", ocd.expected_o, row.e_od, 1.0));
    }

    // The group-size trend on exact (unrounded) values.
    bool monotone = true;
    for (std::size_t i = 1; i < solutions.size(); ++i) {
        monotone = monotone && solutions[i].exact_n >= solutions[i - 1].exact_n - 1e-6;
    }
    c.require(monotone, "exact maximal sample size was not monotone in the shape parameter");
    c.finish();
    return out;
}

void criterion_headline(const BoundarySolution& flat_zero) {
    Criterion c("criterion 6: expected observations under the null vs the 360 comparator");
    const auto oc0 = operating_characteristics(flat_zero.design, 0.0, 1e-6, 777);
    const double ratio = oc0.expected_o / 360.0;
    c.require(ratio <= 0.67, describe("E(O | null) / 360", ratio, 0.67, 0.0));
    c.finish();
}

// ---------------------------------------------------------------------------
// 7. Small-sample simulation study
// ---------------------------------------------------------------------------
void criterion_simulation(const TrialDesign& small_design) {
    Criterion c("criterion 7: simulation study rates for procedures 1-4");
    TrueParameters params;
    params.mu0 = 0.0;
    params.period = {0.0, 0.0, 0.0};
    params.tau = {0.0, 0.0, 0.0};
    params.vc = {10.12, 6.51};

    const double expected[4] = {0.077, 0.062, 0.055, 0.051};
    for (int proc = 1; proc <= 4; ++proc) {
        const auto report = simulate(small_design, params,
                                     AnalysisProcedure::from_index(proc), 10000, 2024);
        char label[64];
        std::snprintf(label, sizeof(label), "procedure %d reject-any rate", proc);
        c.require(close(report.reject_any_rate, expected[proc - 1], 0.008),
                  describe(label, report.reject_any_rate, expected[proc - 1], 0.008));
        c.require(report.fit_failures == 0, "fit failures occurred");
    }
    c.finish();
}

// ---------------------------------------------------------------------------
// 8. Analytic versus Monte-Carlo path frequencies
// ---------------------------------------------------------------------------
void criterion_cross_validation(const TrialDesign& small_design) {
    Criterion c("criterion 8: known-variance path frequencies vs analytic probabilities");
    TrueParameters params;
    params.mu0 = 0.0;
    params.period = {0.0, 0.0, 0.0};
    params.tau = {0.0, 0.0, 0.0};
    params.vc = {10.12, 6.51};

    const long reps = 100000;
    const auto report = simulate_known_variance(small_design, params, reps, 4242);
    c.require(report.fit_failures == 0, "fit failures occurred");

    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    int compared = 0;
    bool all_close = true;
    std::string first_violation;
    for (const auto& path : enumerate_paths(4, 2)) {
        const double p = path_probability(path, small_design, zero, 1e-7, 3131);
        if (p <= 0.001) continue;
        ++compared;
        std::vector<int> key(3);
        for (int d = 0; d < 3; ++d) key[d] = (path.omega[d] - 1) * 2 + path.psi[d];
        const auto it = report.path_counts.find(key);
        const double freq =
            it == report.path_counts.end() ? 0.0 : static_cast<double>(it->second) / reps;
        const double se = std::sqrt(p * (1.0 - p) / reps);
        if (std::abs(freq - p) > 3.0 * se + 1e-6) {
            all_close = false;
            if (first_violation.empty()) {
                first_violation = describe("path frequency", freq, p, 3.0 * se);
            }
        }
    }
    c.require(compared > 10, "too few paths above the comparison threshold");
    c.require(all_close, "a path frequency missed its 3-sigma band: " + first_violation);
    c.finish();
}

// ---------------------------------------------------------------------------
// 9. Determinism of seeded outputs
// ---------------------------------------------------------------------------
void criterion_determinism(const TrialDesign& small_design) {
    Criterion c("criterion 9: byte-identical outputs under fixed seeds");
    TrueParameters params;
    params.mu0 = 0.0;
    params.period = {0.0, 0.0, 0.0};
    params.tau = {0.0, 0.0, 0.0};
    params.vc = {10.12, 6.51};

    const auto curve_text = [&]() {
        const auto rows = characteristics_curve(small_design, {0.0, 1.1, 2.2}, 1e-5, 55);
        std::ostringstream os;
        write_curve_csv(os, rows, small_design, 1e-5, 55);
        return os.str();
    };
    c.require(curve_text() == curve_text(), "curve CSV differed between seeded runs");

    const auto report_text = [&]() {
        const auto report =
            simulate(small_design, params, AnalysisProcedure::from_index(2), 2000, 99);
        std::ostringstream os;
        write_simulation_report(os, report);
        return os.str();
    };
    c.require(report_text() == report_text(), "simulation report differed between seeded runs");

    RectangleProblem p;
    p.mean = Eigen::VectorXd::Zero(5);
    p.correlation = Eigen::MatrixXd::Constant(5, 5, 0.5);
    p.correlation.diagonal().setOnes();
    p.lower = Eigen::VectorXd::Constant(5, -1.0);
    p.upper = Eigen::VectorXd::Constant(5, 2.0);
    const auto a = mvn_rectangle(p, 1e-6, 7);
    const auto b = mvn_rectangle(p, 1e-6, 7);
    c.require(a.value == b.value && a.evaluations == b.evaluations,
              "integrator results differed between identical calls");
    c.finish();
}

}  // namespace

int main() {
    std::printf("acceptance suite, tool version %s\n", kVersion);
    const auto started = Clock::now();

    criterion_algebra();
    criterion_joint_distribution();

    // Solve the four table designs once; several criteria share them.
    std::vector<BoundarySolution> solutions;
    for (double shape : {-0.25, 0.0, 0.25, 0.5}) {
        PowerFamilySpec spec;
        spec.alpha = 0.05;
        spec.beta = 0.2;
        spec.delta = 1.11;
        spec.sigma_e_sq = 6.51;
        spec.stages = 3;
        spec.shape = shape;
        spec.n_treatments = 4;
        solutions.push_back(solve_boundaries(spec));
    }

    criterion_integrator(solutions[1].design);
    const BoundarySolution small = criterion_boundary_fidelity();
    criterion_table(solutions);
    criterion_headline(solutions[1]);
    criterion_simulation(small.design);
    criterion_cross_validation(small.design);
    criterion_determinism(small.design);

    const double total = std::chrono::duration<double>(Clock::now() - started).count();
    std::printf("%s: %d criterion(s) failed (%.1f s total)\n",
                g_failures == 0 ? "SUCCESS" : "FAILURE", g_failures, total);
    return g_failures == 0 ? 0 : 1;
}
