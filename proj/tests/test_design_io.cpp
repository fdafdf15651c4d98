#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gsx/design_io.hpp"

using namespace gsx;

namespace {

DesignFile sample_file() {
    DesignFile file;
    file.design.n_treatments = 4;
    file.design.stages = 2;
    file.design.group_size = 12;
    file.design.futility = {0.76637429817406913, 2.0353554545625876};
    file.design.efficacy = {2.8784356079206151, 2.0353554545625876};
    file.design.vc = {10.12, 6.51};
    file.design.family = SequenceFamily::Williams;
    file.design.delta = 2.2;
    file.design.alpha = 0.05;
    file.design.beta = 0.2;
    file.solver.present = true;
    file.solver.exact_n = 11.981264;
    file.solver.efficacy_scale = 2.0353554545625876;
    file.solver.futility_scale = 0.95155;
    file.solver.achieved_alpha = 0.0500003;
    file.solver.achieved_power = 0.800701;
    file.solver.shape = 0.0;
    file.solver.seed = 2654435769u;
    return file;
}

struct TempPath {
    std::string path;
    explicit TempPath(const std::string& name)
        : path(std::string("gsx_io_test_") + name) {}
    ~TempPath() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("design files round-trip losslessly") {
    const DesignFile file = sample_file();
    TempPath tmp("design.json");
    save_design_file(tmp.path, file);
    const DesignFile loaded = load_design_file(tmp.path);
    CHECK(loaded.design.n_treatments == 4);
    CHECK(loaded.design.group_size == 12);
    CHECK(loaded.design.futility == file.design.futility);
    CHECK(loaded.design.efficacy == file.design.efficacy);
    CHECK(loaded.design.vc.sigma_e_sq == 6.51);
    CHECK(loaded.design.family == SequenceFamily::Williams);
    CHECK(loaded.solver.present);
    CHECK(loaded.solver.exact_n == file.solver.exact_n);
    CHECK(loaded.solver.seed == file.solver.seed);
}

TEST_CASE("saving twice produces identical bytes") {
    const DesignFile file = sample_file();
    TempPath a("design_a.json"), b("design_b.json");
    save_design_file(a.path, file);
    save_design_file(b.path, file);
    std::ifstream fa(a.path), fb(b.path);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(!sa.str().empty());
}

TEST_CASE("broken design files raise validation errors") {
    TempPath tmp("broken.json");
    {
        std::ofstream out(tmp.path);
        out << "{\"design\": {\"treatments\": 4}}\n";
    }
    CHECK_THROWS_AS(load_design_file(tmp.path), std::invalid_argument);
    CHECK_THROWS_AS(load_design_file("does_not_exist.json"), std::ios_base::failure);
    {
        std::ofstream out(tmp.path);
        out << "not json at all\n";
    }
    CHECK_THROWS_AS(load_design_file(tmp.path), std::invalid_argument);
}

TEST_CASE("curve csv carries metadata and full-precision rows") {
    OperatingCharacteristics row;
    row.theta = 0.3333333333333333;
    row.reject_h01 = 0.25;
    row.reject_any = 0.5;
    row.expected_n = 70.0123456789;
    row.expected_o = 240.25;
    std::ostringstream os;
    write_curve_csv(os, {row}, sample_file().design, 1e-6, 42);
    const std::string text = os.str();
    CHECK(text.find("theta,reject_h01,reject_any,expected_n,expected_o") != std::string::npos);
    CHECK(text.find("0.3333333333333333,0.25,0.5,70.0123456789,240.25") != std::string::npos);
    CHECK(text.find("seed=42") != std::string::npos);
    CHECK(text[0] == '#');
}

TEST_CASE("simulation report serializes rates and path counts") {
    SimulationReport rep;
    rep.procedure_label = "REML, quantile substitution";
    rep.replicates = 100;
    rep.reject_any_rate = 0.05;
    rep.reject_any_se = 0.0218;
    rep.reject_rate = {0.01, 0.02, 0.02};
    rep.reject_rate_se = {0.001, 0.002, 0.002};
    rep.stop_stage_counts = {40, 60};
    rep.path_counts[{0, 0, 1}] = 60;
    rep.expected_n = 19.2;
    rep.expected_o = 70.1;
    rep.seed = 7;
    std::ostringstream os;
    write_simulation_report(os, rep);
    const std::string text = os.str();
    CHECK(text.find("\"rate\": 0.05") != std::string::npos);
    CHECK(text.find("\"count\": 60") != std::string::npos);
    CHECK(text.find("REML") != std::string::npos);
}

TEST_CASE("matrix dump round-trips and satisfies the closed forms") {
    std::ostringstream os;
    dump_matrices(os, 4, {1.0, 1.0});
    std::istringstream is(os.str());
    const auto parsed = parse_matrix_dump(is);

    REQUIRE(parsed.count("sigma_r r=2") == 1);
    const Eigen::MatrixXd& s2 = parsed.at("sigma_r r=2");
    CHECK(s2(0, 0) == 2.0);
    CHECK(s2(0, 1) == 1.0);
    CHECK(s2(1, 0) == 1.0);
    CHECK(s2(1, 1) == 2.0);

    for (int r = 2; r <= 4; ++r) {
        const auto& s = parsed.at("sigma_r r=" + std::to_string(r));
        const auto& inv = parsed.at("sigma_r_inverse r=" + std::to_string(r));
        CHECK((s * inv - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff() < 1e-12);
        const auto& info = parsed.at("stage_information r=" + std::to_string(r));
        const SequenceSet seqs = generate_sequence_set(r, SequenceFamily::Williams);
        const long n = 2 * 12;
        const Eigen::MatrixXd expected =
            stage_information(r, 4, n, {1.0, 1.0}, seqs) / static_cast<double>(n);
        CHECK((info - expected).cwiseAbs().maxCoeff() < 1e-12);
    }

    const auto& cov = parsed.at("no_drop_covariance");
    const auto reference =
        fixed_effects_covariance(StageAllocation::no_drops(4, 1), 4, 12, {1.0, 1.0},
                                 SequenceFamily::Williams);
    CHECK((cov - 12.0 * reference.matrix).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("two-treatment dump contains only the pair covariance") {
    std::ostringstream os;
    dump_matrices(os, 2, {3.0, 2.0});
    std::istringstream is(os.str());
    const auto parsed = parse_matrix_dump(is);
    CHECK(parsed.count("sigma_r r=2") == 1);
    CHECK(parsed.count("sigma_r r=3") == 0);
    CHECK(parsed.at("sigma_r r=2")(0, 0) == 5.0);
}

TEST_CASE("doubles render at shortest round-trip precision") {
    CHECK(format_double(0.05) == "0.05");
    CHECK(format_double(2.0353554545625876) == "2.0353554545625876");
    CHECK(format_double(-1.0) == "-1");
    const double value = 0.1 + 0.2;
    CHECK(std::strtod(format_double(value).c_str(), nullptr) == value);
}
