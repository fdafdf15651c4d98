#include "gsx/sequences.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace gsx {

const char* to_string(SequenceFamily family) {
    return family == SequenceFamily::Latin ? "latin" : "williams";
}

SequenceFamily sequence_family_from_string(const std::string& name) {
    if (name == "latin") return SequenceFamily::Latin;
    if (name == "williams") return SequenceFamily::Williams;
    throw std::invalid_argument("unknown sequence family: " + name);
}

namespace {

std::vector<int> williams_first_row(int r) {
    // 0, 1, r-1, 2, r-2, ... interleaves low and high labels so that the
    // cyclic shifts are balanced for first-order carryover.
    std::vector<int> row;
    row.reserve(r);
    int lo = 0, hi = r - 1;
    row.push_back(lo++);
    while (static_cast<int>(row.size()) < r) {
        row.push_back(lo++);
        if (static_cast<int>(row.size()) < r) row.push_back(hi--);
    }
    return row;
}

}  // namespace

SequenceSet generate_sequence_set(int r, SequenceFamily family) {
    if (r < 2) throw std::invalid_argument("sequence set requires at least 2 treatments");

    SequenceSet set;
    set.r = r;

    if (family == SequenceFamily::Latin) {
        for (int i = 0; i < r; ++i) {
            std::vector<int> seq(r);
            for (int j = 0; j < r; ++j) seq[j] = (i + j) % r;
            set.sequences.push_back(std::move(seq));
        }
        return set;
    }

    const std::vector<int> base = williams_first_row(r);
    for (int i = 0; i < r; ++i) {
        std::vector<int> seq(r);
        for (int j = 0; j < r; ++j) seq[j] = (base[j] + i) % r;
        set.sequences.push_back(std::move(seq));
    }
    if (r % 2 == 1) {
        const int n = set.size();
        for (int i = 0; i < n; ++i) {
            std::vector<int> rev(set.sequences[i].rbegin(), set.sequences[i].rend());
            set.sequences.push_back(std::move(rev));
        }
    }
    return set;
}

Eigen::MatrixXd design_matrix(const std::vector<int>& sequence, int n_treatments) {
    const int r = static_cast<int>(sequence.size());
    const int D = n_treatments;
    if (r < 1 || r > D) throw std::invalid_argument("sequence length must lie in [1, D]");

    std::unordered_set<int> seen;
    for (int t : sequence) {
        if (t < 0 || t >= r) throw std::invalid_argument("sequence labels must lie in {0..r-1}");
        if (!seen.insert(t).second) throw std::invalid_argument("sequence repeats a treatment");
    }

    // Columns: 0 = mu0; 1..D-1 = pi_2..pi_D; D..2D-2 = tau_1..tau_{D-1}.
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(r, 2 * D - 1);
    for (int p = 0; p < r; ++p) {
        X(p, 0) = 1.0;
        if (p >= 1) X(p, p) = 1.0;
        const int d = sequence[p];
        if (d >= 1) X(p, D - 1 + d) = 1.0;
    }
    return X;
}

long lcm_group_size(int n_treatments, SequenceFamily family) {
    if (n_treatments < 2) throw std::invalid_argument("need at least 2 treatments");
    long acc = 1;
    for (int r = 2; r <= n_treatments; ++r) {
        long size = generate_sequence_set(r, family).size();
        acc = std::lcm(acc, size);
    }
    return acc;
}

}  // namespace gsx
