#include "gsx/design_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "gsx/version.hpp"

namespace gsx {

using nlohmann::json;

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    // trim to the shortest representation that still round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char probe[32];
        std::snprintf(probe, sizeof(probe), "%.*g", prec, value);
        if (std::strtod(probe, nullptr) == value) return probe;
    }
    return buf;
}

DesignFile make_design_file(const BoundarySolution& solution, const PowerFamilySpec& spec) {
    DesignFile file;
    file.design = solution.design;
    file.solver.present = true;
    file.solver.exact_n = solution.exact_n;
    file.solver.efficacy_scale = solution.efficacy_scale;
    file.solver.futility_scale = solution.futility_scale;
    file.solver.achieved_alpha = solution.achieved_alpha;
    file.solver.achieved_power = solution.achieved_power;
    file.solver.shape = spec.shape;
    file.solver.seed = spec.seed;
    return file;
}

void save_design_file(const std::string& path, const DesignFile& file) {
    json j;
    j["tool"] = "gsxover";
    j["tool_version"] = kVersion;
    json d;
    d["treatments"] = file.design.n_treatments;
    d["stages"] = file.design.stages;
    d["group_size"] = file.design.group_size;
    d["futility"] = file.design.futility;
    d["efficacy"] = file.design.efficacy;
    d["sigma_b_sq"] = file.design.vc.sigma_b_sq;
    d["sigma_e_sq"] = file.design.vc.sigma_e_sq;
    d["family"] = to_string(file.design.family);
    d["delta"] = file.design.delta;
    d["alpha"] = file.design.alpha;
    d["beta"] = file.design.beta;
    j["design"] = d;
    if (file.solver.present) {
        json s;
        s["exact_n"] = file.solver.exact_n;
        s["efficacy_scale"] = file.solver.efficacy_scale;
        s["futility_scale"] = file.solver.futility_scale;
        s["achieved_alpha"] = file.solver.achieved_alpha;
        s["achieved_power"] = file.solver.achieved_power;
        s["shape"] = file.solver.shape;
        s["seed"] = file.solver.seed;
        j["solver"] = s;
    }

    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw std::ios_base::failure("failed writing " + path);
}

DesignFile load_design_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument(path + " is not a valid design file: " + e.what());
    }

    DesignFile file;
    try {
        const json& d = j.at("design");
        file.design.n_treatments = d.at("treatments").get<int>();
        file.design.stages = d.at("stages").get<int>();
        file.design.group_size = d.at("group_size").get<long>();
        file.design.futility = d.at("futility").get<std::vector<double>>();
        file.design.efficacy = d.at("efficacy").get<std::vector<double>>();
        file.design.vc.sigma_b_sq = d.at("sigma_b_sq").get<double>();
        file.design.vc.sigma_e_sq = d.at("sigma_e_sq").get<double>();
        file.design.family = sequence_family_from_string(d.at("family").get<std::string>());
        file.design.delta = d.at("delta").get<double>();
        file.design.alpha = d.at("alpha").get<double>();
        file.design.beta = d.at("beta").get<double>();
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            file.solver.present = true;
            file.solver.exact_n = s.at("exact_n").get<double>();
            file.solver.efficacy_scale = s.at("efficacy_scale").get<double>();
            file.solver.futility_scale = s.at("futility_scale").get<double>();
            file.solver.achieved_alpha = s.at("achieved_alpha").get<double>();
            file.solver.achieved_power = s.at("achieved_power").get<double>();
            file.solver.shape = s.at("shape").get<double>();
            file.solver.seed = s.at("seed").get<std::uint64_t>();
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(path + " is missing design fields: " + e.what());
    }
    file.design.validate();
    return file;
}

void write_curve_csv(std::ostream& os, const std::vector<OperatingCharacteristics>& rows,
                     const TrialDesign& design, double tol, std::uint64_t seed) {
    os << "# gsxover " << kVersion << " operating characteristics\n";
    os << "# design: D=" << design.n_treatments << " L=" << design.stages
       << " n=" << design.group_size << " family=" << to_string(design.family)
       << " sigma_e_sq=" << format_double(design.vc.sigma_e_sq) << "\n";
    os << "# integrator: tol=" << format_double(tol) << " seed=" << seed << "\n";
    os << "# theta in response units; expected_n in patients; expected_o in observations\n";
    os << "theta,reject_h01,reject_any,expected_n,expected_o\n";
    for (const auto& row : rows) {
        os << format_double(row.theta) << ',' << format_double(row.reject_h01) << ','
           << format_double(row.reject_any) << ',' << format_double(row.expected_n) << ','
           << format_double(row.expected_o) << "\n";
    }
}

void write_simulation_report(std::ostream& os, const SimulationReport& report) {
    json j;
    j["tool"] = "gsxover";
    j["tool_version"] = kVersion;
    j["procedure"] = report.procedure_label;
    j["df_convention"] =
        "stage-specific, recomputed from accumulated data: observations - subjects - "
        "active non-intercept fixed effects, floored at 1";
    j["replicates"] = report.replicates;
    j["fit_failures"] = report.fit_failures;
    j["sigma_b_at_zero"] = report.sigma_b_at_zero;
    j["seed"] = report.seed;
    j["reject_any"] = {{"rate", report.reject_any_rate}, {"se", report.reject_any_se}};
    json arms = json::array();
    for (std::size_t d = 0; d < report.reject_rate.size(); ++d) {
        arms.push_back({{"treatment", d + 1},
                        {"rate", report.reject_rate[d]},
                        {"se", report.reject_rate_se[d]}});
    }
    j["reject_per_treatment"] = arms;
    j["stop_stage_counts"] = report.stop_stage_counts;
    j["expected_n"] = report.expected_n;
    j["expected_o"] = report.expected_o;
    json paths = json::array();
    for (const auto& [codes, count] : report.path_counts) {
        json entry;
        std::vector<int> omega(codes.size()), psi(codes.size());
        for (std::size_t d = 0; d < codes.size(); ++d) {
            omega[d] = codes[d] / 2 + 1;
            psi[d] = codes[d] % 2;
        }
        entry["omega"] = omega;
        entry["psi"] = psi;
        entry["count"] = count;
        paths.push_back(entry);
    }
    j["paths"] = paths;
    os << j.dump(2) << "\n";
}

namespace {

void write_matrix(std::ostream& os, const std::string& name, const Eigen::MatrixXd& m) {
    os << "matrix " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            os << (j ? "," : "") << format_double(m(i, j));
        }
        os << "\n";
    }
}

}  // namespace

void dump_matrices(std::ostream& os, int n_treatments, const VarianceComponents& vc) {
    const int D = n_treatments;
    os << "# gsxover " << kVersion << " covariance matrices\n";
    os << "# D=" << D << " sigma_b_sq=" << format_double(vc.sigma_b_sq)
       << " sigma_e_sq=" << format_double(vc.sigma_e_sq) << "\n";
    os << "# effect order: mu0, pi_2..pi_D, tau_1..tau_{D-1}\n";
    os << "# stage_information is per patient (n = 1); no_drop_covariance is for ln = 1\n";
    const long lcm = lcm_group_size(D, SequenceFamily::Williams);
    for (int r = D; r >= 2; --r) {
        write_matrix(os, "sigma_r r=" + std::to_string(r), sigma_r(r, vc));
        write_matrix(os, "sigma_r_inverse r=" + std::to_string(r), sigma_r_inverse(r, vc));
        const SequenceSet seqs = generate_sequence_set(r, SequenceFamily::Williams);
        write_matrix(os, "stage_information r=" + std::to_string(r),
                     stage_information(r, D, lcm, vc, seqs) / static_cast<double>(lcm));
    }
    const auto cov = fixed_effects_covariance(StageAllocation::no_drops(D, 1), D, lcm, vc,
                                              SequenceFamily::Williams);
    write_matrix(os, "no_drop_covariance", static_cast<double>(lcm) * cov.matrix);
}

std::map<std::string, Eigen::MatrixXd> parse_matrix_dump(std::istream& is) {
    std::map<std::string, Eigen::MatrixXd> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream head(line);
        std::string tag;
        head >> tag;
        if (tag != "matrix") throw std::invalid_argument("unexpected line in matrix dump: " + line);
        std::vector<std::string> fields;
        std::string field;
        while (head >> field) fields.push_back(field);
        if (fields.size() < 3) throw std::invalid_argument("malformed matrix header: " + line);
        const int cols = std::stoi(fields.back());
        fields.pop_back();
        const int rows = std::stoi(fields.back());
        fields.pop_back();
        std::string name = fields[0];
        for (std::size_t i = 1; i < fields.size(); ++i) name += " " + fields[i];

        Eigen::MatrixXd m(rows, cols);
        for (int i = 0; i < rows; ++i) {
            if (!std::getline(is, line)) throw std::invalid_argument("truncated matrix dump");
            std::istringstream row(line);
            std::string cell;
            for (int j = 0; j < cols; ++j) {
                if (!std::getline(row, cell, ',')) {
                    throw std::invalid_argument("short row in matrix dump");
                }
                m(i, j) = std::stod(cell);
            }
        }
        out.emplace(std::move(name), std::move(m));
    }
    return out;
}

}  // namespace gsx
