#include "gsx/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "gsx/rng.hpp"
#include "gsx/threading.hpp"

namespace gsx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-treatment path code in {0..2L-1}: omega = code/2 + 1, psi = code % 2.
// Path index i maps to codes via base-2L digits, treatment 1 least
// significant; enumeration order is fixed by this encoding.
int code_omega(int code) { return code / 2 + 1; }
int code_psi(int code) { return code % 2; }

std::vector<int> path_codes(const StoppingPath& path) {
    std::vector<int> codes(path.omega.size());
    for (std::size_t d = 0; d < codes.size(); ++d) {
        codes[d] = (path.omega[d] - 1) * 2 + path.psi[d];
    }
    return codes;
}

struct EvalContext {
    int arms = 0;    ///< D - 1
    int stages = 0;  ///< L
    std::vector<double> futility;
    std::vector<double> efficacy;
    Eigen::MatrixXd corr;   ///< canonical Lambda, L*arms square
    Eigen::MatrixXd drift;  ///< E[Z_dl], arms x L

    static EvalContext raw(int n_treatments, int stages, std::vector<double> futility,
                           std::vector<double> efficacy, Eigen::MatrixXd drift) {
        EvalContext ctx;
        ctx.arms = n_treatments - 1;
        ctx.stages = stages;
        ctx.futility = std::move(futility);
        ctx.efficacy = std::move(efficacy);
        ctx.drift = std::move(drift);
        const int k = ctx.arms * stages;
        ctx.corr.resize(k, k);
        for (int l1 = 1; l1 <= stages; ++l1) {
            for (int d1 = 1; d1 <= ctx.arms; ++d1) {
                for (int l2 = 1; l2 <= stages; ++l2) {
                    for (int d2 = 1; d2 <= ctx.arms; ++d2) {
                        const int a = std::min(l1, l2), b = std::max(l1, l2);
                        ctx.corr(ctx.index(d1, l1), ctx.index(d2, l2)) =
                            0.5 * std::sqrt(static_cast<double>(a) / b) *
                            (d1 == d2 ? 2.0 : 1.0);
                    }
                }
            }
        }
        return ctx;
    }

    static EvalContext from_design(const TrialDesign& design, const Eigen::VectorXd& tau) {
        if (tau.size() != design.n_treatments - 1) {
            throw std::invalid_argument("effect vector must have one entry per experimental arm");
        }
        const double info_unit = design.group_size / (2.0 * design.vc.sigma_e_sq);
        Eigen::MatrixXd drift(design.n_treatments - 1, design.stages);
        for (int d = 0; d < design.n_treatments - 1; ++d) {
            for (int l = 1; l <= design.stages; ++l) {
                drift(d, l - 1) = tau(d) * std::sqrt(l * info_unit);
            }
        }
        return raw(design.n_treatments, design.stages, design.futility, design.efficacy,
                   std::move(drift));
    }

    int index(int treatment, int stage) const { return (stage - 1) * arms + (treatment - 1); }

    bool exchangeable() const {
        for (int d = 1; d < arms; ++d) {
            if ((drift.row(d) - drift.row(0)).cwiseAbs().maxCoeff() != 0.0) return false;
        }
        return true;
    }

    RectangleProblem problem(const std::vector<int>& codes) const {
        RectangleProblem p;
        const int k = arms * stages;
        p.mean.resize(k);
        p.lower.resize(k);
        p.upper.resize(k);
        p.correlation = corr;
        for (int d = 1; d <= arms; ++d) {
            const int omega = code_omega(codes[d - 1]);
            const int psi = code_psi(codes[d - 1]);
            for (int l = 1; l <= stages; ++l) {
                const int idx = index(d, l);
                p.mean(idx) = drift(d - 1, l - 1);
                if (l < omega) {
                    p.lower(idx) = futility[l - 1];
                    p.upper(idx) = efficacy[l - 1];
                } else if (l == omega) {
                    p.lower(idx) = psi ? efficacy[l - 1] : -kInf;
                    p.upper(idx) = psi ? kInf : futility[l - 1];
                } else {
                    p.lower(idx) = -kInf;
                    p.upper(idx) = kInf;
                }
            }
        }
        return p;
    }
};

struct PathTerm {
    std::vector<int> codes;  ///< canonical representative
    double multiplicity = 1.0;
    std::uint64_t salt = 0;
};

std::uint64_t fold_codes(std::uint64_t seed, const std::vector<int>& codes) {
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        h = mix_seed(h, (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(codes[i]));
    }
    return h;
}

// Enumerates path terms, merging paths equivalent under treatment
// permutation when the drift is exchangeable. keep_path filters on the code
// vector (e.g. rejection paths only).
template <typename Keep>
std::vector<PathTerm> collect_terms(int arms, int stages, bool exchangeable, std::uint64_t seed,
                                    Keep keep_path) {
    const int n_codes = 2 * stages;
    long total = 1;
    for (int d = 0; d < arms; ++d) total *= n_codes;

    std::map<std::vector<int>, double> groups;
    std::vector<int> codes(arms);
    for (long i = 0; i < total; ++i) {
        long rem = i;
        for (int d = 0; d < arms; ++d) {
            codes[d] = static_cast<int>(rem % n_codes);
            rem /= n_codes;
        }
        if (!keep_path(codes)) continue;
        std::vector<int> key = codes;
        if (exchangeable) std::sort(key.begin(), key.end());
        groups[key] += 1.0;
    }

    std::vector<PathTerm> terms;
    terms.reserve(groups.size());
    for (const auto& [key, count] : groups) {
        terms.push_back({key, count, fold_codes(seed, key)});
    }
    return terms;
}

struct TermEstimates {
    std::vector<double> prob;
    std::vector<double> error;
};

TermEstimates evaluate_terms(const EvalContext& ctx, const std::vector<PathTerm>& terms,
                             double tol, int threads) {
    TermEstimates est;
    est.prob.assign(terms.size(), 0.0);
    est.error.assign(terms.size(), 0.0);
    parallel_for(terms.size(), threads, [&](std::size_t i) {
        const IntegrationResult r = mvn_rectangle(ctx.problem(terms[i].codes), tol, terms[i].salt);
        est.prob[i] = r.value;
        est.error[i] = r.error_estimate;
    });
    return est;
}

long patients_used(const std::vector<int>& codes, long group_size) {
    int last = 1;
    for (int c : codes) last = std::max(last, code_omega(c));
    return group_size * last;
}

// Observations: every conducted stage costs one series on the control plus
// one per experimental treatment still present. Stages after the last drop
// are not run.
long observations_used(const std::vector<int>& codes, long group_size) {
    int last = 1;
    for (int c : codes) last = std::max(last, code_omega(c));
    long obs = 0;
    for (int l = 1; l <= last; ++l) {
        long present = 1;
        for (int c : codes) {
            if (code_omega(c) >= l) ++present;
        }
        obs += group_size * present;
    }
    return obs;
}

}  // namespace

void TrialDesign::validate() const {
    if (n_treatments < 2) throw std::invalid_argument("need at least 2 treatments");
    if (stages < 1) throw std::invalid_argument("need at least 1 stage");
    if (static_cast<int>(futility.size()) != stages ||
        static_cast<int>(efficacy.size()) != stages) {
        throw std::invalid_argument("boundary vectors must have one entry per stage");
    }
    for (int l = 0; l < stages; ++l) {
        if (!(futility[l] <= efficacy[l])) {
            throw std::invalid_argument("futility boundary exceeds efficacy boundary");
        }
    }
    if (std::abs(futility[stages - 1] - efficacy[stages - 1]) > 1e-9) {
        throw std::invalid_argument("final boundaries must close (f_L = e_L)");
    }
    if (!(vc.sigma_e_sq > 0.0)) {
        throw std::invalid_argument("within-subject variance must be positive");
    }
    if (group_size < 1) throw std::invalid_argument("group size must be positive");
    // Divisibility binds group sequential designs only; a single-stage trial
    // may use any n (single-stage comparators often recruit, say, 90 patients
    // on Williams squares).
    if (stages >= 2) {
        const long lcm = lcm_group_size(n_treatments, family);
        if (group_size % lcm != 0) {
            throw std::invalid_argument("group size must be a multiple of " +
                                        std::to_string(lcm));
        }
    }
}

bool StoppingPath::any_rejection() const {
    return std::any_of(psi.begin(), psi.end(), [](int p) { return p == 1; });
}

int StoppingPath::last_stage() const {
    return *std::max_element(omega.begin(), omega.end());
}

std::vector<StoppingPath> enumerate_paths(int n_treatments, int stages) {
    const int arms = n_treatments - 1;
    const int n_codes = 2 * stages;
    long total = 1;
    for (int d = 0; d < arms; ++d) total *= n_codes;

    std::vector<StoppingPath> paths;
    paths.reserve(total);
    for (long i = 0; i < total; ++i) {
        StoppingPath path;
        path.omega.resize(arms);
        path.psi.resize(arms);
        long rem = i;
        for (int d = 0; d < arms; ++d) {
            const int code = static_cast<int>(rem % n_codes);
            rem /= n_codes;
            path.omega[d] = code_omega(code);
            path.psi[d] = code_psi(code);
        }
        paths.push_back(std::move(path));
    }
    return paths;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> path_bounds(const StoppingPath& path,
                                                        const TrialDesign& design) {
    RectangleProblem p = path_problem(path, design, Eigen::VectorXd::Zero(design.n_treatments - 1));
    return {p.lower, p.upper};
}

RectangleProblem path_problem(const StoppingPath& path, const TrialDesign& design,
                              const Eigen::VectorXd& tau) {
    return EvalContext::from_design(design, tau).problem(path_codes(path));
}

double path_probability(const StoppingPath& path, const TrialDesign& design,
                        const Eigen::VectorXd& tau, double tol, std::uint64_t seed) {
    design.validate();
    return mvn_rectangle(path_problem(path, design, tau), tol, seed).value;
}

double familywise_error(const TrialDesign& design, const Eigen::VectorXd& tau, double tol,
                        std::uint64_t seed, int threads) {
    design.validate();
    EvalContext ctx = EvalContext::from_design(design, tau);
    auto terms = collect_terms(ctx.arms, ctx.stages, ctx.exchangeable(), seed,
                               [](const std::vector<int>& c) {
                                   return std::any_of(c.begin(), c.end(),
                                                      [](int code) { return code_psi(code) == 1; });
                               });
    const TermEstimates est = evaluate_terms(ctx, terms, tol, threads);
    double sum = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) sum += terms[i].multiplicity * est.prob[i];
    return sum;
}

double any_rejection_probability(const TrialDesign& design, const Eigen::VectorXd& tau,
                                 double tol, std::uint64_t seed, int threads) {
    design.validate();
    EvalContext ctx = EvalContext::from_design(design, tau);
    auto terms = collect_terms(ctx.arms, ctx.stages, ctx.exchangeable(), seed,
                               [](const std::vector<int>& c) {
                                   return std::all_of(c.begin(), c.end(),
                                                      [](int code) { return code_psi(code) == 0; });
                               });
    const TermEstimates est = evaluate_terms(ctx, terms, tol, threads);
    double sum = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) sum += terms[i].multiplicity * est.prob[i];
    return 1.0 - sum;
}

double any_rejection_probability_null(int n_treatments, const std::vector<double>& futility,
                                      const std::vector<double>& efficacy, double tol,
                                      std::uint64_t seed, int threads) {
    const int stages = static_cast<int>(futility.size());
    EvalContext ctx = EvalContext::raw(n_treatments, stages, futility, efficacy,
                                       Eigen::MatrixXd::Zero(n_treatments - 1, stages));
    auto terms = collect_terms(ctx.arms, ctx.stages, true, seed, [](const std::vector<int>& c) {
        return std::all_of(c.begin(), c.end(), [](int code) { return code_psi(code) == 0; });
    });
    const TermEstimates est = evaluate_terms(ctx, terms, tol, threads);
    double sum = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) sum += terms[i].multiplicity * est.prob[i];
    return 1.0 - sum;
}

double sequential_rejection_probability(const std::vector<double>& futility,
                                        const std::vector<double>& efficacy,
                                        const std::vector<double>& drift, double tol,
                                        std::uint64_t seed) {
    const int stages = static_cast<int>(futility.size());
    if (static_cast<int>(efficacy.size()) != stages ||
        static_cast<int>(drift.size()) != stages) {
        throw std::invalid_argument("boundary and drift vectors must share a length");
    }
    double total = 0.0;
    for (int omega = 1; omega <= stages; ++omega) {
        RectangleProblem p;
        p.mean.resize(omega);
        p.lower.resize(omega);
        p.upper.resize(omega);
        p.correlation.resize(omega, omega);
        for (int l = 1; l <= omega; ++l) {
            p.mean(l - 1) = drift[l - 1];
            if (l < omega) {
                p.lower(l - 1) = futility[l - 1];
                p.upper(l - 1) = efficacy[l - 1];
            } else {
                p.lower(l - 1) = efficacy[l - 1];
                p.upper(l - 1) = kInf;
            }
            for (int m = 1; m <= omega; ++m) {
                p.correlation(l - 1, m - 1) =
                    std::sqrt(static_cast<double>(std::min(l, m)) / std::max(l, m));
            }
        }
        total += mvn_rectangle(p, tol, mix_seed(seed, omega)).value;
    }
    return total;
}

double rejection_probability_h01(const TrialDesign& design, double tau_1, double tol,
                                 std::uint64_t seed) {
    design.validate();
    const double info_unit = design.group_size / (2.0 * design.vc.sigma_e_sq);
    std::vector<double> drift(design.stages);
    for (int l = 1; l <= design.stages; ++l) {
        drift[l - 1] = tau_1 * std::sqrt(l * info_unit);
    }
    return sequential_rejection_probability(design.futility, design.efficacy, drift, tol, seed);
}

std::pair<double, double> expected_counts(const TrialDesign& design, const Eigen::VectorXd& tau,
                                          double tol, std::uint64_t seed, int threads) {
    design.validate();
    EvalContext ctx = EvalContext::from_design(design, tau);
    auto terms = collect_terms(ctx.arms, ctx.stages, ctx.exchangeable(), seed,
                               [](const std::vector<int>&) { return true; });
    const TermEstimates est = evaluate_terms(ctx, terms, tol, threads);
    double e_n = 0.0, e_o = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const double w = terms[i].multiplicity * est.prob[i];
        e_n += w * patients_used(terms[i].codes, design.group_size);
        e_o += w * observations_used(terms[i].codes, design.group_size);
    }
    return {e_n, e_o};
}

OperatingCharacteristics operating_characteristics(const TrialDesign& design, double theta,
                                                   double tol, std::uint64_t seed, int threads) {
    design.validate();
    Eigen::VectorXd tau = Eigen::VectorXd::Constant(design.n_treatments - 1, theta);

    EvalContext ctx = EvalContext::from_design(design, tau);
    auto terms = collect_terms(ctx.arms, ctx.stages, true, seed,
                               [](const std::vector<int>&) { return true; });
    const TermEstimates est = evaluate_terms(ctx, terms, tol, threads);

    OperatingCharacteristics oc;
    oc.theta = theta;
    oc.max_n = design.max_patients();
    oc.max_o = design.max_observations();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const double w = terms[i].multiplicity * est.prob[i];
        oc.error_bound += terms[i].multiplicity * est.error[i];
        oc.total_probability += w;
        const bool rejects = std::any_of(terms[i].codes.begin(), terms[i].codes.end(),
                                         [](int c) { return code_psi(c) == 1; });
        if (rejects) oc.reject_any += w;
        oc.expected_n += w * patients_used(terms[i].codes, design.group_size);
        oc.expected_o += w * observations_used(terms[i].codes, design.group_size);
    }
    oc.reject_h01 = rejection_probability_h01(design, theta, tol, mix_seed(seed, 0x1701));
    return oc;
}

std::vector<OperatingCharacteristics> characteristics_curve(const TrialDesign& design,
                                                            const std::vector<double>& theta_grid,
                                                            double tol, std::uint64_t seed,
                                                            int threads) {
    std::vector<OperatingCharacteristics> rows;
    rows.reserve(theta_grid.size());
    for (std::size_t i = 0; i < theta_grid.size(); ++i) {
        rows.push_back(operating_characteristics(design, theta_grid[i], tol,
                                                 mix_seed(seed, 0x2000 + i), threads));
    }
    return rows;
}

std::vector<double> default_theta_grid(double delta, int points) {
    if (points < 1) throw std::invalid_argument("grid needs at least one point");
    std::vector<double> grid(points);
    const double lo = -0.5 * delta, hi = 1.5 * delta;
    for (int i = 0; i < points; ++i) {
        grid[i] = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
    }
    return grid;
}

}  // namespace gsx
