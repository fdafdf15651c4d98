#include "gsx/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "gsx/errors.hpp"
#include "gsx/normal.hpp"
#include "gsx/rng.hpp"

namespace gsx {

namespace {

// Safeguarded secant/bisection root finder for a monotone residual. The
// initial bracket is expanded geometrically if both endpoints share a sign.
double solve_monotone(const std::function<double(double)>& residual, double lo, double hi,
                      double f_tol, const char* what) {
    double flo = residual(lo);
    if (std::abs(flo) <= f_tol) return lo;
    double fhi = residual(hi);
    if (std::abs(fhi) <= f_tol) return hi;

    for (int expand = 0; flo * fhi > 0.0; ++expand) {
        if (expand >= 24) {
            throw convergence_error(std::string("failed to bracket a root for ") + what);
        }
        const double width = hi - lo;
        if (std::abs(flo) < std::abs(fhi)) {
            lo -= width;
            flo = residual(lo);
        } else {
            hi += width;
            fhi = residual(hi);
        }
    }

    for (int iter = 0; iter < 200; ++iter) {
        double mid = 0.5 * (lo + hi);
        const double denom = fhi - flo;
        if (denom != 0.0) {
            const double secant = lo - flo * (hi - lo) / denom;
            if (secant > lo + 1e-12 && secant < hi - 1e-12) mid = secant;
        }
        const double fmid = residual(mid);
        if (std::abs(fmid) <= f_tol || hi - lo < 1e-10) return mid;
        if (fmid * flo < 0.0) {
            hi = mid;
            fhi = fmid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    throw convergence_error(std::string("root search did not converge for ") + what);
}

struct ScaleResiduals {
    double fwer;   ///< reject-any at the global null minus alpha
    double power;  ///< pr(reject H_01 | delta) minus (1 - beta)
};

// Residuals in the exact-n regime: the closure f_L = e_L ties the group
// size to the scales, delta sqrt(I_l) = (C_e + C_f) sqrt(l/L), so both
// error rates are functions of (C_e, C_f) alone.
class ExactSolve {
  public:
    explicit ExactSolve(const PowerFamilySpec& spec) : spec_(spec) {}

    ScaleResiduals residuals(double ce, double cf) const {
        const int L = spec_.stages;
        const double sum = ce + cf;
        std::vector<double> futility(L), efficacy(L), drift(L);
        for (int l = 1; l <= L; ++l) {
            const double s = boundary_shape(l, L, spec_.shape);
            const double root = std::sqrt(static_cast<double>(l) / L);
            efficacy[l - 1] = ce * s;
            futility[l - 1] = std::min(sum * root - cf * s, efficacy[l - 1]);
            drift[l - 1] = sum * root;
        }
        futility[L - 1] = efficacy[L - 1];

        ScaleResiduals r;
        r.fwer = any_rejection_probability_null(spec_.n_treatments, futility, efficacy,
                                                spec_.solver_tol, spec_.seed) -
                 spec_.alpha;
        r.power = sequential_rejection_probability(futility, efficacy, drift, spec_.solver_tol,
                                                   mix_seed(spec_.seed, 7)) -
                  (1.0 - spec_.beta);
        return r;
    }

  private:
    const PowerFamilySpec& spec_;
};

// Damped 2-D Newton on (C_e, C_f) with a forward-difference Jacobian;
// falls back to alternating monotone 1-D solves when a step stalls.
std::pair<double, double> solve_scales_exact(const PowerFamilySpec& spec) {
    const ExactSolve system(spec);
    const double f_tol = 4e-6;
    double ce = norm_quantile(1.0 - spec.alpha / (spec.n_treatments - 1));
    double cf = std::max(0.2, norm_quantile(1.0 - spec.beta));

    ScaleResiduals r = system.residuals(ce, cf);
    double norm = std::max(std::abs(r.fwer), std::abs(r.power));

    for (int iter = 0; iter < 40 && norm > f_tol; ++iter) {
        const double h = 1e-4;
        const ScaleResiduals re = system.residuals(ce + h, cf);
        const ScaleResiduals rf = system.residuals(ce, cf + h);
        const double j11 = (re.fwer - r.fwer) / h, j12 = (rf.fwer - r.fwer) / h;
        const double j21 = (re.power - r.power) / h, j22 = (rf.power - r.power) / h;
        const double det = j11 * j22 - j12 * j21;
        if (det == 0.0 || !std::isfinite(det)) break;
        const double step_ce = (-r.fwer * j22 + r.power * j12) / det;
        const double step_cf = (-j11 * r.power + j21 * r.fwer) / det;

        bool accepted = false;
        for (double damp = 1.0; damp >= 1.0 / 64; damp *= 0.5) {
            const double nce = std::max(0.05, ce + damp * step_ce);
            const double ncf = cf + damp * step_cf;
            if (nce + ncf <= 0.05) continue;
            const ScaleResiduals rn = system.residuals(nce, ncf);
            const double nnorm = std::max(std::abs(rn.fwer), std::abs(rn.power));
            if (nnorm < norm) {
                ce = nce;
                cf = ncf;
                r = rn;
                norm = nnorm;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }

    // Alternating sweeps mop up whatever Newton left (or everything, if it
    // stalled immediately).
    for (int sweep = 0; sweep < 20 && norm > f_tol; ++sweep) {
        ce = solve_monotone(
            [&](double x) { return system.residuals(x, cf).fwer; }, std::max(0.05, ce - 0.5),
            ce + 0.5, 0.5 * f_tol, "the efficacy scale");
        cf = solve_monotone(
            [&](double x) { return system.residuals(ce, x).power; }, cf - 0.5, cf + 0.5,
            0.5 * f_tol, "the futility scale");
        r = system.residuals(ce, cf);
        norm = std::max(std::abs(r.fwer), std::abs(r.power));
    }
    if (norm > f_tol) {
        throw convergence_error("boundary scale search did not reach the error-rate targets");
    }
    return {ce, cf};
}

TrialDesign assemble_design(const PowerFamilySpec& spec, long n, double ce, double cf) {
    TrialDesign design;
    design.n_treatments = spec.n_treatments;
    design.stages = spec.stages;
    design.group_size = n;
    design.vc = {0.0, spec.sigma_e_sq};
    design.family = spec.family;
    design.delta = spec.delta;
    design.alpha = spec.alpha;
    design.beta = spec.beta;
    power_family_boundaries(spec, static_cast<double>(n), ce, cf, &design.futility,
                            &design.efficacy);
    design.futility[spec.stages - 1] = design.efficacy[spec.stages - 1];
    return design;
}

}  // namespace

void PowerFamilySpec::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0)) {
        throw std::invalid_argument("error rates must lie in (0, 1)");
    }
    if (!(delta > 0.0)) throw std::invalid_argument("clinically relevant difference must be positive");
    if (!(sigma_e_sq > 0.0)) throw std::invalid_argument("within-subject variance must be positive");
    if (stages < 1) throw std::invalid_argument("need at least 1 stage");
    if (n_treatments < 2) throw std::invalid_argument("need at least 2 treatments");
    if (!(solver_tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
}

double boundary_shape(int stage, int stages, double shape) {
    if (stage < 1 || stage > stages) throw std::invalid_argument("stage out of range");
    return std::pow(static_cast<double>(stage) / stages, shape - 0.5);
}

void power_family_boundaries(const PowerFamilySpec& spec, double n, double efficacy_scale,
                             double futility_scale, std::vector<double>* futility,
                             std::vector<double>* efficacy) {
    const int L = spec.stages;
    futility->resize(L);
    efficacy->resize(L);
    for (int l = 1; l <= L; ++l) {
        const double s = boundary_shape(l, L, spec.shape);
        const double info = l * n / (2.0 * spec.sigma_e_sq);
        (*efficacy)[l - 1] = efficacy_scale * s;
        (*futility)[l - 1] =
            std::min(spec.delta * std::sqrt(info) - futility_scale * s, (*efficacy)[l - 1]);
    }
}

ExactScales solve_exact_scales(const PowerFamilySpec& spec) {
    spec.validate();
    const auto [ce, cf] = solve_scales_exact(spec);
    const double sum = ce + cf;
    return {ce, cf,
            2.0 * spec.sigma_e_sq * sum * sum / (spec.delta * spec.delta * spec.stages)};
}

BoundarySolution solve_boundaries_fixed_n(const PowerFamilySpec& spec, long group_size) {
    spec.validate();
    if (group_size < 1) throw std::invalid_argument("group size must be positive");

    const int L = spec.stages;
    const double info_final = L * group_size / (2.0 * spec.sigma_e_sq);
    const double scale_sum = spec.delta * std::sqrt(info_final);  // C_e + C_f under closure

    auto boundaries_for = [&](double ce, std::vector<double>* f, std::vector<double>* e) {
        power_family_boundaries(spec, static_cast<double>(group_size), ce, scale_sum - ce, f, e);
        (*f)[L - 1] = (*e)[L - 1];
    };

    const double ce = solve_monotone(
        [&](double x) {
            std::vector<double> f, e;
            boundaries_for(x, &f, &e);
            return any_rejection_probability_null(spec.n_treatments, f, e, spec.solver_tol,
                                                  spec.seed) -
                   spec.alpha;
        },
        0.5, 4.0, 2e-6, "the efficacy scale at fixed n");

    BoundarySolution sol;
    sol.design = assemble_design(spec, group_size, ce, scale_sum - ce);
    sol.exact_n = static_cast<double>(group_size);
    sol.efficacy_scale = ce;
    sol.futility_scale = scale_sum - ce;
    sol.achieved_alpha = any_rejection_probability_null(
        spec.n_treatments, sol.design.futility, sol.design.efficacy, spec.solver_tol, spec.seed);
    sol.achieved_power =
        rejection_probability_h01(sol.design, spec.delta, spec.solver_tol, mix_seed(spec.seed, 7));
    return sol;
}

BoundarySolution solve_boundaries(const PowerFamilySpec& spec) {
    spec.validate();

    const auto [ce, cf] = solve_scales_exact(spec);
    const double sum = ce + cf;
    const double exact_n =
        2.0 * spec.sigma_e_sq * sum * sum / (spec.delta * spec.delta * spec.stages);

    long n;
    if (spec.stages == 1 && !spec.force_divisible_single_stage) {
        n = static_cast<long>(std::ceil(exact_n - 1e-9));
    } else {
        const long lcm = lcm_group_size(spec.n_treatments, spec.family);
        n = lcm * static_cast<long>(std::ceil(exact_n / lcm - 1e-9));
    }
    n = std::max(n, 1L);

    BoundarySolution sol = solve_boundaries_fixed_n(spec, n);
    sol.exact_n = exact_n;
    return sol;
}

BoundarySolution single_stage_design(const PowerFamilySpec& spec) {
    if (spec.stages != 1) throw std::invalid_argument("single-stage design requires L = 1");
    return solve_boundaries(spec);
}

}  // namespace gsx
