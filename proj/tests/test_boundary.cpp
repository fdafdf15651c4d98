#include <doctest.h>

#include <cmath>

#include "gsx/boundary.hpp"
#include "gsx/errors.hpp"

using namespace gsx;

namespace {

PowerFamilySpec small_sample_spec() {
    PowerFamilySpec spec;
    spec.alpha = 0.05;
    spec.beta = 0.2;
    spec.delta = 2.2;
    spec.sigma_e_sq = 6.51;
    spec.stages = 2;
    spec.shape = 0.0;
    spec.n_treatments = 4;
    spec.family = SequenceFamily::Williams;
    return spec;
}

}  // namespace

TEST_CASE("boundary shape factors") {
    CHECK(boundary_shape(3, 3, -0.25) == 1.0);
    CHECK(boundary_shape(5, 5, 0.7) == 1.0);
    CHECK(boundary_shape(1, 4, 0.5) == 1.0);
    CHECK(boundary_shape(2, 4, 0.5) == 1.0);  // flat family
    CHECK(boundary_shape(1, 2, 0.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK_THROWS_AS(boundary_shape(0, 3, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(boundary_shape(4, 3, 0.0), std::invalid_argument);
}

TEST_CASE("two-stage small-sample boundaries at a fixed group size") {
    const auto sol = solve_boundaries_fixed_n(small_sample_spec(), 12);
    // Published values 0.768, 2.036, 2.879 to 3 dp.
    CHECK(sol.design.futility[0] == doctest::Approx(0.768).epsilon(0.013));
    CHECK(sol.design.futility[1] == doctest::Approx(2.036).epsilon(0.005));
    CHECK(sol.design.efficacy[0] == doctest::Approx(2.879).epsilon(0.0035));
    CHECK(sol.design.efficacy[1] == sol.design.futility[1]);
    CHECK(sol.achieved_alpha == doctest::Approx(0.05).epsilon(1e-4));
    CHECK(sol.achieved_power > 0.8 - 1e-3);
    sol.design.validate();
}

TEST_CASE("full solve recovers the smallest divisible group size") {
    const auto sol = solve_boundaries(small_sample_spec());
    CHECK(sol.exact_n == doctest::Approx(12.0).epsilon(0.01));
    CHECK(sol.design.group_size == 12);
    CHECK(sol.design.futility[0] == doctest::Approx(0.768).epsilon(0.013));
    CHECK(sol.achieved_alpha == doctest::Approx(0.05).epsilon(1e-4));
}

TEST_CASE("flat three-stage design rounds up to 48") {
    PowerFamilySpec spec;
    spec.delta = 1.11;
    spec.sigma_e_sq = 6.51;
    spec.stages = 3;
    spec.shape = 0.5;
    spec.n_treatments = 4;
    const auto sol = solve_boundaries(spec);
    CHECK(sol.design.group_size == 48);
    CHECK(sol.exact_n > 36.0);
    CHECK(sol.exact_n <= 48.0);
    // Flat shape: constant efficacy boundary.
    CHECK(sol.design.efficacy[0] == doctest::Approx(sol.design.efficacy[2]).epsilon(1e-12));
    CHECK(sol.design.efficacy[1] == doctest::Approx(sol.design.efficacy[2]).epsilon(1e-12));
    // Closure after the re-solve.
    CHECK(std::abs(sol.design.futility[2] - sol.design.efficacy[2]) < 1e-9);
    CHECK(sol.achieved_alpha == doctest::Approx(0.05).epsilon(1e-4));
    CHECK(sol.achieved_power >= 0.8 - 1e-4);  // rounding up only adds power
}

TEST_CASE("single-stage design matches the comparator trial") {
    PowerFamilySpec spec;
    spec.delta = 1.11;
    spec.sigma_e_sq = 6.51;
    spec.stages = 1;
    spec.shape = 0.0;
    spec.n_treatments = 4;
    const auto sol = single_stage_design(spec);
    CHECK(sol.design.group_size == 90);
    CHECK(sol.design.efficacy[0] == sol.design.futility[0]);
    // One-sided three-comparison critical value with correlation 1/2.
    CHECK(sol.design.efficacy[0] == doctest::Approx(2.062).epsilon(0.002));
    CHECK(sol.achieved_alpha == doctest::Approx(0.05).epsilon(1e-4));
    CHECK(sol.achieved_power >= 0.8 - 1e-4);

    // Power before rounding is the defining equation.
    const auto scales = solve_exact_scales(spec);
    CHECK(scales.exact_n <= 90.0);
    CHECK(scales.exact_n > 78.0);

    PowerFamilySpec divisible = spec;
    divisible.force_divisible_single_stage = true;
    const auto forced = single_stage_design(divisible);
    CHECK(forced.design.group_size == 96);
}

TEST_CASE("two-treatment single-stage reduces to the normal quantile") {
    PowerFamilySpec spec;
    spec.alpha = 0.05;
    spec.beta = 0.2;
    spec.delta = 1.0;
    spec.sigma_e_sq = 1.0;
    spec.stages = 1;
    spec.shape = 0.0;
    spec.n_treatments = 2;
    const auto sol = single_stage_design(spec);
    CHECK(sol.design.efficacy[0] == doctest::Approx(1.6449).epsilon(5e-4));
}

TEST_CASE("fixed-n boundaries respect the closure identity") {
    const auto sol = solve_boundaries_fixed_n(small_sample_spec(), 24);
    const double info_final =
        2.0 * 24.0 / (2.0 * 6.51);
    CHECK(sol.efficacy_scale + sol.futility_scale ==
          doctest::Approx(2.2 * std::sqrt(info_final)).epsilon(1e-12));
    CHECK(sol.achieved_alpha == doctest::Approx(0.05).epsilon(1e-4));
}

TEST_CASE("solver is deterministic") {
    const auto a = solve_boundaries_fixed_n(small_sample_spec(), 12);
    const auto b = solve_boundaries_fixed_n(small_sample_spec(), 12);
    CHECK(a.design.futility[0] == b.design.futility[0]);
    CHECK(a.design.efficacy[0] == b.design.efficacy[0]);
    CHECK(a.achieved_alpha == b.achieved_alpha);
}

TEST_CASE("specs are validated") {
    PowerFamilySpec spec = small_sample_spec();
    spec.alpha = 0.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = small_sample_spec();
    spec.delta = -1.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = small_sample_spec();
    spec.stages = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = small_sample_spec();
    CHECK_THROWS_AS(single_stage_design(spec), std::invalid_argument);  // stages != 1
}
