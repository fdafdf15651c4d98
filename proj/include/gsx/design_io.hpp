#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gsx/boundary.hpp"
#include "gsx/evaluator.hpp"
#include "gsx/simulator.hpp"

namespace gsx {

/// Inputs and solver metadata stored alongside a solved design so that a
/// design file reproduces its own derivation.
struct SolverProvenance {
    bool present = false;
    double exact_n = 0.0;
    double efficacy_scale = 0.0;
    double futility_scale = 0.0;
    double achieved_alpha = 0.0;
    double achieved_power = 0.0;
    double shape = 0.0;
    std::uint64_t seed = 0;
};

struct DesignFile {
    TrialDesign design;
    SolverProvenance solver;
};

DesignFile make_design_file(const BoundarySolution& solution, const PowerFamilySpec& spec);

/// JSON, all numerics at round-trip precision.
void save_design_file(const std::string& path, const DesignFile& file);
DesignFile load_design_file(const std::string& path);

/// CSV with '#' metadata lines: theta, reject_h01, reject_any, expected
/// patients and observations per row.
void write_curve_csv(std::ostream& os, const std::vector<OperatingCharacteristics>& rows,
                     const TrialDesign& design, double tol, std::uint64_t seed);

void write_simulation_report(std::ostream& os, const SimulationReport& report);

/// Numeric rendering of the closed-form quartet for r = 2..D: the response
/// covariance, its inverse, the per-patient stage information and the
/// one-stage per-patient fixed-effects covariance.
void dump_matrices(std::ostream& os, int n_treatments, const VarianceComponents& vc);

/// Parses dump_matrices output back into named matrices ("sigma_r r=3", ...).
std::map<std::string, Eigen::MatrixXd> parse_matrix_dump(std::istream& is);

/// Shortest round-trip decimal rendering used across all file formats.
std::string format_double(double value);

}  // namespace gsx
