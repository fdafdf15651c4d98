#include "gsx/simulator.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gsx/normal.hpp"
#include "gsx/threading.hpp"

namespace gsx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sufficient statistics for one (stage, sequence) group of patients, who
// share the fixed-effects block X. Enough to evaluate the profiled
// likelihood at any variance ratio without touching raw data again.
struct GroupStats {
    int r = 0;
    long m = 0;
    Eigen::MatrixXd xtx;
    Eigen::VectorXd xt1;
    Eigen::VectorXd xty_sum;
    double sum_1ty = 0.0;
    double sum_yty = 0.0;
    double sum_1ty_sq = 0.0;
};

struct Sufficient {
    int p = 0;
    long n_obs = 0;
    long n_subjects = 0;
    std::vector<GroupStats> groups;
};

Eigen::MatrixXd record_design(const PatientRecord& rec, int D) {
    const int r = static_cast<int>(rec.treatments.size());
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(r, 2 * D - 1);
    for (int j = 0; j < r; ++j) {
        X(j, 0) = 1.0;
        if (j >= 1) X(j, j) = 1.0;  // pi_{j+1} column
        const int t = rec.treatments[j];
        if (t >= 1) X(j, D - 1 + t) = 1.0;
    }
    return X;
}

Sufficient build_sufficient(const std::vector<PatientRecord>& data, int D) {
    Sufficient s;
    s.p = 2 * D - 1;
    std::map<std::pair<int, int>, std::size_t> index;
    for (const auto& rec : data) {
        const int r = static_cast<int>(rec.treatments.size());
        if (static_cast<int>(rec.responses.size()) != r) {
            throw std::invalid_argument("record responses disagree with its treatment count");
        }
        const auto key = std::make_pair(rec.stage, rec.sequence_index);
        auto [it, fresh] = index.try_emplace(key, s.groups.size());
        if (fresh) {
            GroupStats g;
            g.r = r;
            const Eigen::MatrixXd X = record_design(rec, D);
            g.xtx = X.transpose() * X;
            g.xt1 = X.transpose() * Eigen::VectorXd::Ones(r);
            g.xty_sum = Eigen::VectorXd::Zero(s.p);
            s.groups.push_back(std::move(g));
        }
        GroupStats& g = s.groups[it->second];
        const Eigen::MatrixXd X = record_design(rec, D);
        const double oty = rec.responses.sum();
        g.m += 1;
        g.xty_sum += X.transpose() * rec.responses;
        g.sum_1ty += oty;
        g.sum_yty += rec.responses.squaredNorm();
        g.sum_1ty_sq += oty * oty;
        s.n_obs += r;
        s.n_subjects += 1;
    }
    return s;
}

struct ProfileState {
    Eigen::MatrixXd info;  ///< X^T W^{-1} X at the current ratio
    Eigen::VectorXd beta;
    double rss = 0.0;
    double logdet_w = 0.0;
    bool ok = false;
};

ProfileState profile_at(const Sufficient& s, double rho) {
    ProfileState st;
    st.info = Eigen::MatrixXd::Zero(s.p, s.p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s.p);
    double quad = 0.0;
    for (const auto& g : s.groups) {
        const double c = rho / (1.0 + g.r * rho);
        st.info += g.m * (g.xtx - c * (g.xt1 * g.xt1.transpose()));
        rhs += g.xty_sum - c * g.xt1 * g.sum_1ty;
        quad += g.sum_yty - c * g.sum_1ty_sq;
        st.logdet_w += g.m * std::log(1.0 + g.r * rho);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(st.info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return st;
    st.beta = ldlt.solve(rhs);
    st.rss = std::max(quad - st.beta.dot(rhs), 0.0);
    st.ok = true;
    return st;
}

double neg2_profile_loglik(const Sufficient& s, double rho, Estimation estimation) {
    const ProfileState st = profile_at(s, rho);
    if (!st.ok) return kInf;
    const double rss = std::max(st.rss, 1e-300);
    if (estimation == Estimation::ML) {
        return s.n_obs * std::log(rss / s.n_obs) + st.logdet_w;
    }
    const long dof = s.n_obs - s.p;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(st.info);
    double logdet_info = 0.0;
    for (int i = 0; i < s.p; ++i) logdet_info += std::log(ldlt.vectorD()(i));
    return dof * std::log(rss / dof) + st.logdet_w + logdet_info;
}

double golden_minimize(const std::function<double(double)>& fn, double lo, double hi, int iters) {
    const double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = fn(x1), f2 = fn(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = fn(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = fn(x2);
        }
    }
    return f1 <= f2 ? x1 : x2;
}

FitResult finalize_fit(const Sufficient& s, int D, double rho, double sigma_e_sq,
                       bool at_zero) {
    const ProfileState st = profile_at(s, rho);
    FitResult fit;
    if (!st.ok || !(sigma_e_sq > 0.0)) {
        fit.converged = false;
        return fit;
    }
    fit.beta_hat = st.beta;
    fit.sigma_e_sq_hat = sigma_e_sq;
    fit.sigma_b_sq_hat = rho * sigma_e_sq;
    fit.sigma_b_at_zero = at_zero;
    fit.tau_hat = st.beta.tail(D - 1);

    const Eigen::MatrixXd cov =
        sigma_e_sq * st.info.ldlt().solve(Eigen::MatrixXd::Identity(s.p, s.p));
    fit.observed_information.resize(D - 1);
    for (int d = 1; d < D; ++d) {
        const double v = cov(D - 1 + d, D - 1 + d);
        if (!(v > 0.0)) {
            fit.converged = false;
            return fit;
        }
        fit.observed_information(d - 1) = 1.0 / v;
    }
    return fit;
}

struct StageDecision {
    double futility;
    double efficacy;
};

StageDecision stage_boundaries(const TrialDesign& design, int stage,
                               const AnalysisProcedure& procedure,
                               const std::vector<PatientRecord>& accumulated) {
    StageDecision d{design.futility[stage - 1], design.efficacy[stage - 1]};
    if (procedure.adjustment == BoundaryAdjustment::QuantileSubstitution) {
        const double df = static_cast<double>(anova_df(accumulated, design.n_treatments));
        d.futility = quantile_substitute(d.futility, df);
        d.efficacy = quantile_substitute(d.efficacy, df);
    }
    return d;
}

template <typename Fitter>
TrialOutcome run_trial_impl(const TrialDesign& design, const TrueParameters& params,
                            const AnalysisProcedure& procedure, std::uint64_t seed,
                            std::uint64_t replicate, Fitter fitter) {
    design.validate();
    params.validate(design.n_treatments);
    const int D = design.n_treatments;
    const int arms = D - 1;

    TrialOutcome out;
    out.path.omega.assign(arms, design.stages);
    out.path.psi.assign(arms, 0);

    std::vector<int> remaining(D);
    for (int d = 0; d < D; ++d) remaining[d] = d;

    std::vector<PatientRecord> accumulated;
    for (int l = 1; l <= design.stages; ++l) {
        CounterRng rng(seed, replicate * 64 + l);
        auto stage_data = generate_stage_data(design, params, remaining, l, rng);
        out.observations += design.group_size * static_cast<long>(remaining.size());
        for (auto& rec : stage_data) accumulated.push_back(std::move(rec));
        out.stages_run = l;

        const FitResult fit = fitter(accumulated);
        if (!fit.converged) {
            out.fit_failed = true;
            break;
        }
        out.sigma_b_at_zero = out.sigma_b_at_zero || fit.sigma_b_at_zero;

        const StageDecision bounds = stage_boundaries(design, l, procedure, accumulated);
        std::vector<int> survivors = {0};
        for (std::size_t i = 1; i < remaining.size(); ++i) {
            const int t = remaining[i];
            const double z =
                fit.tau_hat(t - 1) * std::sqrt(fit.observed_information(t - 1));
            if (z >= bounds.efficacy) {
                out.path.omega[t - 1] = l;
                out.path.psi[t - 1] = 1;
            } else if (z < bounds.futility) {
                out.path.omega[t - 1] = l;
                out.path.psi[t - 1] = 0;
            } else {
                survivors.push_back(t);
            }
        }
        remaining = std::move(survivors);
        if (remaining.size() == 1) break;
    }

    out.patients = design.group_size * out.stages_run;
    return out;
}

SimulationReport aggregate(const TrialDesign& design, const std::vector<TrialOutcome>& outcomes,
                           std::uint64_t seed, std::string label) {
    const int arms = design.n_treatments - 1;
    SimulationReport rep;
    rep.procedure_label = std::move(label);
    rep.replicates = static_cast<long>(outcomes.size());
    rep.seed = seed;
    rep.reject_rate.assign(arms, 0.0);
    rep.reject_rate_se.assign(arms, 0.0);
    rep.stop_stage_counts.assign(design.stages, 0);

    long kept = 0, any = 0;
    std::vector<long> per_arm(arms, 0);
    double sum_n = 0.0, sum_o = 0.0;
    for (const auto& out : outcomes) {
        if (out.fit_failed) {
            ++rep.fit_failures;
            continue;
        }
        ++kept;
        if (out.sigma_b_at_zero) ++rep.sigma_b_at_zero;
        if (out.path.any_rejection()) ++any;
        std::vector<int> key(arms);
        for (int d = 0; d < arms; ++d) {
            if (out.path.psi[d] == 1) ++per_arm[d];
            key[d] = (out.path.omega[d] - 1) * 2 + out.path.psi[d];
        }
        ++rep.path_counts[key];
        ++rep.stop_stage_counts[out.stages_run - 1];
        sum_n += out.patients;
        sum_o += out.observations;
    }

    if (kept > 0) {
        auto rate = [&](long count) { return static_cast<double>(count) / kept; };
        auto se = [&](double p) { return std::sqrt(p * (1.0 - p) / kept); };
        rep.reject_any_rate = rate(any);
        rep.reject_any_se = se(rep.reject_any_rate);
        for (int d = 0; d < arms; ++d) {
            rep.reject_rate[d] = rate(per_arm[d]);
            rep.reject_rate_se[d] = se(rep.reject_rate[d]);
        }
        rep.expected_n = sum_n / kept;
        rep.expected_o = sum_o / kept;
    }
    return rep;
}

template <typename RunOne>
SimulationReport simulate_impl(const TrialDesign& design, long replicates, std::uint64_t seed,
                               int threads, std::string label, RunOne run_one) {
    if (replicates < 1) throw std::invalid_argument("need at least one replicate");
    std::vector<TrialOutcome> outcomes(replicates);
    parallel_for(static_cast<std::size_t>(replicates), threads,
                 [&](std::size_t i) { outcomes[i] = run_one(static_cast<std::uint64_t>(i)); });
    return aggregate(design, outcomes, seed, std::move(label));
}

}  // namespace

AnalysisProcedure AnalysisProcedure::from_index(int index) {
    switch (index) {
        case 1: return {Estimation::ML, BoundaryAdjustment::None};
        case 2: return {Estimation::ML, BoundaryAdjustment::QuantileSubstitution};
        case 3: return {Estimation::REML, BoundaryAdjustment::None};
        case 4: return {Estimation::REML, BoundaryAdjustment::QuantileSubstitution};
        default: throw std::invalid_argument("analysis procedure index must lie in 1..4");
    }
}

int AnalysisProcedure::index() const {
    const int base = estimation == Estimation::ML ? 1 : 3;
    return base + (adjustment == BoundaryAdjustment::QuantileSubstitution ? 1 : 0);
}

std::string AnalysisProcedure::label() const {
    std::string s = estimation == Estimation::ML ? "ML" : "REML";
    s += adjustment == BoundaryAdjustment::QuantileSubstitution ? ", quantile substitution"
                                                                : ", unadjusted";
    return s;
}

void TrueParameters::validate(int n_treatments) const {
    if (static_cast<int>(period.size()) != n_treatments - 1 ||
        static_cast<int>(tau.size()) != n_treatments - 1) {
        throw std::invalid_argument("period and treatment effects need D-1 entries each");
    }
    vc.validate();
}

std::vector<PatientRecord> generate_stage_data(const TrialDesign& design,
                                               const TrueParameters& params,
                                               const std::vector<int>& remaining, int stage,
                                               CounterRng& rng) {
    params.validate(design.n_treatments);
    const int r = static_cast<int>(remaining.size());
    if (r < 2 || remaining[0] != 0) {
        throw std::invalid_argument("remaining set must hold the control plus at least one arm");
    }
    const SequenceSet seqs = generate_sequence_set(r, design.family);
    if (design.group_size % seqs.size() != 0) {
        throw std::invalid_argument("group size is not divisible by the sequence count");
    }
    const long per_seq = design.group_size / seqs.size();
    const double sd_b = std::sqrt(params.vc.sigma_b_sq);
    const double sd_e = std::sqrt(params.vc.sigma_e_sq);

    std::vector<PatientRecord> records;
    records.reserve(design.group_size);
    long next_id = 0;
    for (int i = 0; i < seqs.size(); ++i) {
        for (long patient = 0; patient < per_seq; ++patient) {
            PatientRecord rec;
            rec.id = next_id++;
            rec.stage = stage;
            rec.sequence_index = i;
            rec.treatments.resize(r);
            rec.responses.resize(r);
            const double subject = sd_b * rng.next_normal();
            for (int j = 0; j < r; ++j) {
                const int original = remaining[seqs.sequences[i][j]];
                rec.treatments[j] = original;
                double mean = params.mu0 + subject;
                if (j >= 1) mean += params.period[j - 1];
                if (original >= 1) mean += params.tau[original - 1];
                rec.responses(j) = mean + sd_e * rng.next_normal();
            }
            records.push_back(std::move(rec));
        }
    }
    return records;
}

FitResult fit_lmm(const std::vector<PatientRecord>& data, int n_treatments,
                  Estimation estimation) {
    if (data.empty()) throw std::invalid_argument("no data to fit");
    const Sufficient s = build_sufficient(data, n_treatments);
    if (s.n_obs <= s.p) {
        FitResult fit;
        fit.converged = false;
        return fit;
    }

    auto objective = [&](double t) { return neg2_profile_loglik(s, std::exp(t), estimation); };
    const double t_hat = golden_minimize(objective, -12.0, 12.0, 48);
    double rho = std::exp(t_hat);
    bool at_zero = false;
    if (neg2_profile_loglik(s, 0.0, estimation) <= objective(t_hat) || t_hat <= -11.9) {
        rho = 0.0;
        at_zero = true;
    }

    const ProfileState st = profile_at(s, rho);
    if (!st.ok) {
        FitResult fit;
        fit.converged = false;
        return fit;
    }
    const double denom =
        estimation == Estimation::ML ? static_cast<double>(s.n_obs) : static_cast<double>(s.n_obs - s.p);
    return finalize_fit(s, n_treatments, rho, st.rss / denom, at_zero);
}

FitResult fit_gls_known_variance(const std::vector<PatientRecord>& data, int n_treatments,
                                 const VarianceComponents& vc) {
    if (data.empty()) throw std::invalid_argument("no data to fit");
    vc.validate();
    const Sufficient s = build_sufficient(data, n_treatments);
    return finalize_fit(s, n_treatments, vc.sigma_b_sq / vc.sigma_e_sq, vc.sigma_e_sq, false);
}

double quantile_substitute(double boundary, double df) {
    if (!(df >= 1.0)) throw std::invalid_argument("degrees of freedom must be at least 1");
    if (std::isinf(boundary)) return boundary;
    const boost::math::students_t dist(df);
    return boost::math::quantile(dist, norm_cdf(boundary));
}

long anova_df(const std::vector<PatientRecord>& data, int n_treatments) {
    const int D = n_treatments;
    long obs = 0;
    long subjects = 0;
    std::vector<bool> period_active(D - 1, false), treat_active(D - 1, false);
    for (const auto& rec : data) {
        const int r = static_cast<int>(rec.treatments.size());
        obs += r;
        ++subjects;
        for (int j = 2; j <= r; ++j) period_active[j - 2] = true;
        for (int t : rec.treatments) {
            if (t >= 1) treat_active[t - 1] = true;
        }
    }
    long active = 0;
    for (int i = 0; i < D - 1; ++i) {
        active += period_active[i] ? 1 : 0;
        active += treat_active[i] ? 1 : 0;
    }
    return std::max(obs - subjects - active, 1L);
}

TrialOutcome run_trial(const TrialDesign& design, const TrueParameters& params,
                       const AnalysisProcedure& procedure, std::uint64_t seed,
                       std::uint64_t replicate) {
    return run_trial_impl(design, params, procedure, seed, replicate,
                          [&](const std::vector<PatientRecord>& acc) {
                              return fit_lmm(acc, design.n_treatments, procedure.estimation);
                          });
}

TrialOutcome run_trial_known_variance(const TrialDesign& design, const TrueParameters& params,
                                      std::uint64_t seed, std::uint64_t replicate) {
    const AnalysisProcedure unadjusted{Estimation::ML, BoundaryAdjustment::None};
    return run_trial_impl(design, params, unadjusted, seed, replicate,
                          [&](const std::vector<PatientRecord>& acc) {
                              return fit_gls_known_variance(acc, design.n_treatments, params.vc);
                          });
}

SimulationReport simulate(const TrialDesign& design, const TrueParameters& params,
                          const AnalysisProcedure& procedure, long replicates, std::uint64_t seed,
                          int threads) {
    return simulate_impl(design, replicates, seed, threads, procedure.label(),
                         [&](std::uint64_t i) { return run_trial(design, params, procedure, seed, i); });
}

SimulationReport simulate_known_variance(const TrialDesign& design, const TrueParameters& params,
                                         long replicates, std::uint64_t seed, int threads) {
    return simulate_impl(design, replicates, seed, threads, "known variance",
                         [&](std::uint64_t i) {
                             return run_trial_known_variance(design, params, seed, i);
                         });
}

}  // namespace gsx
