#pragma once

#include <Eigen/Dense>
#include <vector>

namespace gsx {

enum class SequenceFamily { Latin, Williams };

const char* to_string(SequenceFamily family);
SequenceFamily sequence_family_from_string(const std::string& name);

/// Complete-block, period-balanced sequence set over canonical treatment
/// labels {0, ..., r-1}. Each inner vector lists the treatment received in
/// periods 1..r.
struct SequenceSet {
    int r = 0;
    std::vector<std::vector<int>> sequences;

    int size() const { return static_cast<int>(sequences.size()); }
};

/// Generates the sequence set for r remaining treatments.
///
/// Latin: cyclic square, r sequences. Williams: row-cyclic square from the
/// interleaved first row (r sequences for even r; the square plus its
/// reverse, 2r sequences, for odd r).
SequenceSet generate_sequence_set(int r, SequenceFamily family);

/// Single-patient fixed-effects design matrix, r periods by 2D-1 effects in
/// the order (mu0, pi_2..pi_D, tau_1..tau_{D-1}). Effects absent when fewer
/// than D treatments remain give all-zero columns.
Eigen::MatrixXd design_matrix(const std::vector<int>& sequence, int n_treatments);

/// Smallest group size divisible by |S_2|, ..., |S_D| for the family.
long lcm_group_size(int n_treatments, SequenceFamily family);

}  // namespace gsx
