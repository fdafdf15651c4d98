// gsxover: design, evaluate and simulate group sequential crossover trials.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gsx/design_io.hpp"
#include "gsx/errors.hpp"
#include "gsx/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitIo = 4;

std::vector<double> parse_vector(const std::string& text, int expected, const char* flag) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            values.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string(flag) + ": '" + cell + "' is not a number");
        }
    }
    if (expected > 0 && static_cast<int>(values.size()) != expected) {
        throw std::invalid_argument(std::string(flag) + ": expected " + std::to_string(expected) +
                                    " comma-separated values");
    }
    return values;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot open " + path + " for writing");
    return out;
}

void print_design_summary(const gsx::DesignFile& file) {
    const auto& d = file.design;
    std::cout << "design: D=" << d.n_treatments << " L=" << d.stages << " n=" << d.group_size
              << " family=" << to_string(d.family) << "\n";
    std::cout << "stage     futility    efficacy\n";
    for (int l = 1; l <= d.stages; ++l) {
        std::printf("%5d %11.4f %11.4f\n", l, d.futility[l - 1], d.efficacy[l - 1]);
    }
    std::printf("max N = %ld patients, max O = %ld observations\n", d.max_patients(),
                d.max_observations());
    if (file.solver.present) {
        std::printf("exact n = %.4f, achieved alpha = %.5f, power at delta = %.5f\n",
                    file.solver.exact_n, file.solver.achieved_alpha,
                    file.solver.achieved_power);
    }
}

int run(int argc, char** argv) {
    CLI::App app{"group sequential crossover trial designer"};
    app.set_version_flag("--version", gsx::kVersion);
    app.require_subcommand(1);

    gsx::PowerFamilySpec spec;
    std::string family = "williams";
    std::string design_out;
    bool divisible_single = false;
    auto* design = app.add_subcommand("design", "solve power-family boundaries and group size");
    design->add_option("--alpha", spec.alpha, "familywise error rate at the global null")
        ->check(CLI::Range(1e-6, 0.999));
    design->add_option("--beta", spec.beta, "type-II error at the clinically relevant difference")
        ->check(CLI::Range(1e-6, 0.999));
    design->add_option("--delta", spec.delta, "clinically relevant difference")
        ->default_val(1.11)
        ->check(CLI::PositiveNumber);
    design->add_option("--sigma-e2", spec.sigma_e_sq, "within-subject variance")
        ->default_val(6.51)
        ->check(CLI::PositiveNumber);
    design->add_option("--stages", spec.stages, "maximum number of stages L")
        ->default_val(3)
        ->check(CLI::Range(1, 10));
    design->add_option("--shape", spec.shape, "power-family shape parameter")->default_val(0.0);
    design->add_option("--treatments", spec.n_treatments, "number of treatments incl. control")
        ->default_val(4)
        ->check(CLI::Range(2, 8));
    design->add_option("--family", family, "sequence family: latin or williams");
    design->add_option("--seed", spec.seed, "integrator seed");
    design->add_option("--tol", spec.solver_tol, "integrator tolerance for the solver");
    design->add_flag("--divisible-single-stage", divisible_single,
                     "force sequence-count divisibility even when L = 1");
    design->add_option("--out", design_out, "design file to write")->required();

    std::string eval_design, eval_out, tau_text;
    double theta_min = 0.0, theta_max = 0.0, eval_tol = 1e-6;
    int points = 101, eval_threads = 0;
    std::uint64_t eval_seed = 1;
    auto* evaluate = app.add_subcommand("evaluate", "operating characteristics of a design");
    evaluate->add_option("--design", eval_design, "design file")->required();
    auto* opt_min = evaluate->add_option("--theta-min", theta_min, "curve lower endpoint");
    auto* opt_max = evaluate->add_option("--theta-max", theta_max, "curve upper endpoint");
    evaluate->add_option("--points", points, "curve point count");
    evaluate->add_option("--tau", tau_text, "evaluate one effect vector (comma separated)");
    evaluate->add_option("--tol", eval_tol, "per-integral tolerance");
    evaluate->add_option("--seed", eval_seed, "integrator seed");
    evaluate->add_option("--threads", eval_threads, "worker threads (0 = machine)");
    evaluate->add_option("--out", eval_out, "CSV output path");

    std::string sim_design, sim_out, periods_text, sim_tau_text;
    int procedure_index = 4, sim_threads = 0;
    long replicates = 10000;
    double mu0 = 0.0, sigma_b2 = 10.12;
    std::uint64_t sim_seed = 1;
    bool known_variance = false;
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo trial execution");
    simulate->add_option("--design", sim_design, "design file")->required();
    simulate->add_option("--replicates", replicates, "number of simulated trials")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--procedure", procedure_index,
                         "analysis procedure 1-4: ML/REML x unadjusted/quantile-substituted")
        ->check(CLI::Range(1, 4));
    simulate->add_flag("--known-variance", known_variance,
                       "skip estimation; test statistics use the true variances");
    simulate->add_option("--mu0", mu0, "true intercept");
    simulate->add_option("--periods", periods_text, "true period effects pi_2..pi_D");
    simulate->add_option("--tau", sim_tau_text, "true treatment effects tau_1..tau_{D-1}");
    simulate->add_option("--sigma-b2", sigma_b2, "true between-subject variance");
    simulate->add_option("--seed", sim_seed, "simulation seed");
    simulate->add_option("--threads", sim_threads, "worker threads (0 = machine)");
    simulate->add_option("--out", sim_out, "report JSON path");

    int mat_treatments = 4;
    double mat_b2 = 1.0, mat_e2 = 1.0;
    std::string mat_out;
    auto* matrices = app.add_subcommand("matrices", "dump the closed-form covariance quartet");
    matrices->add_option("--treatments", mat_treatments, "number of treatments incl. control");
    matrices->add_option("--sigma-b2", mat_b2, "between-subject variance");
    matrices->add_option("--sigma-e2", mat_e2, "within-subject variance");
    matrices->add_option("--out", mat_out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    if (design->parsed()) {
        spec.family = gsx::sequence_family_from_string(family);
        spec.force_divisible_single_stage = divisible_single;
        spec.validate();
        const gsx::BoundarySolution solution = gsx::solve_boundaries(spec);
        const gsx::DesignFile file = gsx::make_design_file(solution, spec);
        gsx::save_design_file(design_out, file);
        print_design_summary(file);
        std::cout << "wrote " << design_out << "\n";
        return kExitOk;
    }

    if (evaluate->parsed()) {
        const gsx::DesignFile file = gsx::load_design_file(eval_design);
        const auto& d = file.design;
        if (!tau_text.empty()) {
            const auto tau_values =
                parse_vector(tau_text, d.n_treatments - 1, "--tau");
            Eigen::VectorXd tau =
                Eigen::Map<const Eigen::VectorXd>(tau_values.data(), tau_values.size());
            gsx::OperatingCharacteristics oc;
            oc.theta = tau_values[0];
            oc.max_n = d.max_patients();
            oc.max_o = d.max_observations();
            oc.reject_any = gsx::familywise_error(d, tau, eval_tol, eval_seed, eval_threads);
            oc.reject_h01 = gsx::rejection_probability_h01(d, tau(0), eval_tol,
                                                           gsx::mix_seed(eval_seed, 0x1701));
            std::tie(oc.expected_n, oc.expected_o) =
                gsx::expected_counts(d, tau, eval_tol, gsx::mix_seed(eval_seed, 3), eval_threads);
            std::printf("reject any: %.6f\nreject H01: %.6f\nE(N): %.4f\nE(O): %.4f\n"
                        "max N: %ld\nmax O: %ld\n",
                        oc.reject_any, oc.reject_h01, oc.expected_n, oc.expected_o, oc.max_n,
                        oc.max_o);
            if (!eval_out.empty()) {
                auto out = open_output(eval_out);
                gsx::write_curve_csv(out, {oc}, d, eval_tol, eval_seed);
            }
            return kExitOk;
        }

        std::vector<double> grid;
        if (*opt_min || *opt_max) {
            if (points < 1) throw std::invalid_argument("--points: must be at least 1");
            for (int i = 0; i < points; ++i) {
                grid.push_back(points == 1 ? theta_min
                                           : theta_min + (theta_max - theta_min) * i / (points - 1));
            }
        } else {
            grid = gsx::default_theta_grid(d.delta, points);
        }
        const auto rows = gsx::characteristics_curve(d, grid, eval_tol, eval_seed, eval_threads);
        if (!eval_out.empty()) {
            auto out = open_output(eval_out);
            gsx::write_curve_csv(out, rows, d, eval_tol, eval_seed);
            std::cout << "wrote " << rows.size() << " rows to " << eval_out << "\n";
        } else {
            gsx::write_curve_csv(std::cout, rows, d, eval_tol, eval_seed);
        }
        return kExitOk;
    }

    if (simulate->parsed()) {
        const gsx::DesignFile file = gsx::load_design_file(sim_design);
        const auto& d = file.design;
        gsx::TrueParameters params;
        params.mu0 = mu0;
        params.period = periods_text.empty()
                            ? std::vector<double>(d.n_treatments - 1, 0.0)
                            : parse_vector(periods_text, d.n_treatments - 1, "--periods");
        params.tau = sim_tau_text.empty()
                         ? std::vector<double>(d.n_treatments - 1, 0.0)
                         : parse_vector(sim_tau_text, d.n_treatments - 1, "--tau");
        params.vc = {sigma_b2, d.vc.sigma_e_sq};

        gsx::SimulationReport report;
        if (known_variance) {
            report = gsx::simulate_known_variance(d, params, replicates, sim_seed, sim_threads);
        } else {
            const auto procedure = gsx::AnalysisProcedure::from_index(procedure_index);
            report = gsx::simulate(d, params, procedure, replicates, sim_seed, sim_threads);
        }
        std::printf("procedure: %s\nreplicates: %ld (failures: %ld)\n"
                    "reject any: %.4f (se %.4f)\nE(N): %.2f  E(O): %.2f\n",
                    report.procedure_label.c_str(), report.replicates, report.fit_failures,
                    report.reject_any_rate, report.reject_any_se, report.expected_n,
                    report.expected_o);
        if (!sim_out.empty()) {
            auto out = open_output(sim_out);
            gsx::write_simulation_report(out, report);
            std::cout << "wrote " << sim_out << "\n";
        }
        return kExitOk;
    }

    if (matrices->parsed()) {
        const gsx::VarianceComponents vc{mat_b2, mat_e2};
        if (mat_treatments < 2) throw std::invalid_argument("--treatments: need at least 2");
        vc.validate();
        if (!mat_out.empty()) {
            auto out = open_output(mat_out);
            gsx::dump_matrices(out, mat_treatments, vc);
            std::cout << "wrote " << mat_out << "\n";
        } else {
            gsx::dump_matrices(std::cout, mat_treatments, vc);
        }
        return kExitOk;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const gsx::convergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}
