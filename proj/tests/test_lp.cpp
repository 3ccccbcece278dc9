#include "lp_oracle.hpp"

#include "rfmdp/lp.hpp"

#include <doctest.h>

#include <random>

using namespace rfmdp;

TEST_CASE("lp examples") {
    LinearProgram lp;
    lp.add_variable(0, 1, 1.0);
    lp.add_variable(0, 1, 0.0);
    lp.add_constraint({{0, 1.0}, {1, 1.0}}, RowSense::equal, 1.0);
    auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.objective_value == doctest::Approx(0.0));
    CHECK(sol.values[0] == doctest::Approx(0.0));
    CHECK(sol.values[1] == doctest::Approx(1.0));

    LinearProgram mx;
    mx.sense = LpSense::maximize;
    mx.add_variable(0, infinity, 1.0);
    mx.add_variable(0, infinity, 1.0);
    mx.add_constraint({{0, 1.0}, {1, 1.0}}, RowSense::less_equal, 0.5);
    sol = solve_lp(mx);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.objective_value == doctest::Approx(0.5));
}

TEST_CASE("lp infeasible and unbounded") {
    LinearProgram inf;
    inf.add_variable(0, 1, 1.0);
    inf.add_constraint({{0, 1.0}}, RowSense::greater_equal, 2.0);
    CHECK(solve_lp(inf).status == LpStatus::infeasible);

    LinearProgram unb;
    unb.sense = LpSense::maximize;
    unb.add_variable(0, infinity, 1.0);
    unb.add_variable(0, 1, 0.0);
    unb.add_constraint({{0, 1.0}, {1, -1.0}}, RowSense::greater_equal, 0.0);
    CHECK(solve_lp(unb).status == LpStatus::unbounded);
}

TEST_CASE("lp equality with negative rhs and free-ish variables") {
    LinearProgram lp;
    lp.add_variable(-2, 3, 1.0);
    lp.add_variable(-1, 4, 2.0);
    lp.add_constraint({{0, 1.0}, {1, 1.0}}, RowSense::equal, -1.5);
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.objective_value == doctest::Approx(-0.5 - 2.0));
    CHECK(max_violation(lp, sol.values) <= 1e-9);
}

TEST_CASE("lp matches exhaustive basic-solution enumeration") {
    std::mt19937_64 rng(41);
    int compared = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const auto lp = testing::random_small_lp(rng);
        const auto oracle = testing::brute_force_lp(lp);
        const auto sol = solve_lp(lp);
        if (!oracle) {
            CHECK(sol.status == LpStatus::infeasible);
            continue;
        }
        REQUIRE(sol.status == LpStatus::optimal);
        CHECK(max_violation(lp, sol.values) <= 1e-9);
        CHECK(std::abs(sol.objective_value - *oracle) <= 1e-7);
        ++compared;
    }
    CHECK(compared >= 50);
}

TEST_CASE("lp is deterministic") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const auto lp = testing::random_small_lp(rng);
        const auto a = solve_lp(lp), b = solve_lp(lp);
        CHECK(a.status == b.status);
        CHECK(a.values == b.values);
        CHECK(a.objective_value == b.objective_value);
    }
}

TEST_CASE("lp handles degenerate transportation-like programs") {
    // Many ties: uniform costs over a 4x4 assignment polytope.
    LinearProgram lp;
    for (int k = 0; k < 16; ++k) lp.add_variable(0, 1, (k % 5 == 0) ? -1.0 : 0.0);
    for (int i = 0; i < 4; ++i) {
        std::vector<std::pair<std::size_t, double>> row, col;
        for (int j = 0; j < 4; ++j) {
            row.emplace_back(i * 4 + j, 1.0);
            col.emplace_back(j * 4 + i, 1.0);
        }
        lp.add_constraint(row, RowSense::equal, 1.0);
        lp.add_constraint(col, RowSense::equal, 1.0);
    }
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.objective_value == doctest::Approx(-4.0));
}

TEST_CASE("lp variable cap") {
    LinearProgram lp;
    for (int k = 0; k < 20; ++k) lp.add_variable(0, 1, 1.0);
    LpOptions opt;
    opt.variable_cap = 10;
    CHECK_THROWS((void)solve_lp(lp, opt));
}
