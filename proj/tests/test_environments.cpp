#include "rfmdp/environments.hpp"
#include "rfmdp/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

using namespace rfmdp;

namespace {

std::vector<int> bits(std::size_t s, std::size_t n) {
    std::vector<int> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<int>((s >> (n - 1 - i)) & 1U);
    return b;
}

// SysAdmin dynamics written directly from the domain description, independent of the generator.
double sysadmin_dp(std::size_t n, std::size_t horizon, double base, double neighbor, double repair, std::size_t start) {
    const std::size_t states = std::size_t{1} << n;
    std::vector<double> v(states, 0.0);
    for (std::size_t t = 0; t < horizon; ++t) {
        std::vector<double> next(states);
        for (std::size_t s = 0; s < states; ++s) {
            const auto x = bits(s, n);
            double running = 0.0;
            for (int b : x) running += b;
            double best = -1e300;
            for (std::size_t a = 0; a <= n; ++a) {
                std::vector<double> up(n);
                for (std::size_t i = 0; i < n; ++i) {
                    if (a == i) {
                        up[i] = repair;
                    } else if (x[i] == 0) {
                        up[i] = 0.0;
                    } else {
                        const int failed = (1 - x[(i + n - 1) % n]) + (1 - x[(i + 1) % n]);
                        up[i] = 1.0 - std::min(1.0, base + neighbor * failed);
                    }
                }
                double e = 0.0;
                for (std::size_t s2 = 0; s2 < states; ++s2) {
                    const auto y = bits(s2, n);
                    double p = 1.0;
                    for (std::size_t i = 0; i < n; ++i) p *= y[i] ? up[i] : 1.0 - up[i];
                    e += p * v[s2];
                }
                best = std::max(best, running + e);
            }
            next[s] = best;
        }
        v = next;
    }
    return v[start];
}

// Expected steps for N independent chains, computed on tuples of positions.
double chain_dp(std::size_t chains, std::size_t length, double p) {
    auto step_row = [&](std::size_t x) {
        std::vector<double> row(length, 0.0);
        if (x == length - 1) {
            row[x] = 1.0;
        } else if (x + 2 < length) {
            row[x + 1] = p;
            row[0] += 1.0 - p;
        } else {
            row[length - 1] = p;
            const std::size_t k = length >= 3 ? length - 2 : 1;
            for (std::size_t y = 0; y < k; ++y) row[y] += (1.0 - p) / static_cast<double>(k);
        }
        return row;
    };
    std::size_t states = 1;
    for (std::size_t i = 0; i < chains; ++i) states *= length;
    auto decode = [&](std::size_t s) {
        std::vector<std::size_t> x(chains);
        for (std::size_t i = chains; i-- > 0;) {
            x[i] = s % length;
            s /= length;
        }
        return x;
    };
    std::vector<double> v(states, 0.0);
    for (int iter = 0; iter < 200000; ++iter) {
        double change = 0.0;
        std::vector<double> next(states, 0.0);
        for (std::size_t s = 0; s + 1 < states; ++s) {
            const auto x = decode(s);
            double e = 0.0;
            for (std::size_t s2 = 0; s2 < states; ++s2) {
                const auto y = decode(s2);
                double prob = 1.0;
                for (std::size_t i = 0; i < chains; ++i) prob *= step_row(x[i])[y[i]];
                e += prob * v[s2];
            }
            next[s] = 1.0 + e;
            change = std::max(change, std::abs(next[s] - v[s]));
        }
        v = next;
        if (change < 1e-12) break;
    }
    return v[0];
}

} // namespace

TEST_CASE("generated models validate") {
    for (const auto& m : {make_sysadmin({}), make_chain({}), make_chain({2, 4, 0.7}), make_stock({}),
                          make_frozenlake({}), make_frozenlake({2, 0.2, {}, true, 5.0})})
        CHECK(validate_fmdp(m).empty());
}

TEST_CASE("state and action counts") {
    const auto sys = make_sysadmin({3, 5});
    CHECK(sys.structure.state_count() == 8);
    CHECK(sys.structure.action_count() == 4);

    const auto stock = make_stock({2, 2, 5});
    CHECK(stock.structure.factors[0].domain_size == 8);
    CHECK(stock.structure.state_count() == 64);
    CHECK(stock.structure.action_count() == 4);

    const auto chain = make_chain({2, 3, 0.8});
    CHECK(chain.structure.state_count() == 9);
    CHECK(flatten(chain).state_count == 9);

    const auto lake = make_frozenlake({3});
    CHECK(lake.structure.state_count() == 81);
    CHECK(lake.structure.action_count() == 16);
}

TEST_CASE("chain nominal values match an independent dynamic program") {
    for (auto [n, m, p] : {std::tuple{1, 3, 1.0}, std::tuple{1, 4, 0.8}, std::tuple{2, 3, 0.8}, std::tuple{2, 4, 0.6},
                           std::tuple{3, 4, 0.9}, std::tuple{1, 2, 0.5}}) {
        const auto model = make_chain({std::size_t(n), std::size_t(m), p});
        SolveOptions tight;
        tight.tolerance = 1e-12;
        const auto v = solve_nominal(flatten(model), tight).values;
        CHECK(std::abs(v[0] - chain_dp(n, m, p)) <= 1e-8);
    }
    CHECK(solve_nominal(flatten(make_chain({1, 3, 1.0}))).values[0] == doctest::Approx(2.0));
}

TEST_CASE("sysadmin nominal values match an independent dynamic program") {
    for (std::size_t n : {2, 3, 4, 5, 6})
        for (std::size_t horizon : {1, 3, 5}) {
            const auto model = make_sysadmin({n, horizon, 0.05, 0.15, 0.95});
            const auto v = solve_nominal(flatten(model)).values;
            CHECK(std::abs(v[model.structure.initial_state] -
                           sysadmin_dp(n, horizon, 0.05, 0.15, 0.95, (std::size_t{1} << n) - 1)) <= 1e-8);
        }
}

TEST_CASE("stock dynamics") {
    const auto m = make_stock({1, 2, 3});
    const auto codec = m.structure.codec();
    // Buying sets the ownership bit in every successor; selling clears it.
    for (StateIndex s = 0; s < 8; ++s) {
        const auto buy = transition_distribution(m, s, 0);
        const auto sell = transition_distribution(m, s, 1);
        for (StateIndex t = 0; t < 8; ++t) {
            if (buy[t] > 0.0) CHECK((codec.value(t, 0) & 4U) != 0);
            if (sell[t] > 0.0) CHECK((codec.value(t, 0) & 4U) == 0);
        }
    }
    // Owned sector with both stocks rising earns +2, both falling -2, unowned 0.
    CHECK(m.structure.reward(4 | 3, 0) == 2.0);
    CHECK(m.structure.reward(4, 0) == -2.0);
    CHECK(m.structure.reward(3, 0) == 0.0);
    // Stock 0 rises with p_rise_base + p_rise_per_rising when stock 1 rises.
    const auto row = transition_distribution(m, 2, 1);
    double up0 = 0.0;
    for (StateIndex t = 0; t < 8; ++t)
        if (codec.value(t, 0) & 1U) up0 += row[t];
    CHECK(up0 == doctest::Approx(0.7));
}

TEST_CASE("frozenlake layout") {
    const auto m = make_frozenlake({3});
    const auto& o = m.structure.objective;
    CHECK(o.kind == ObjectiveKind::expected_steps);
    CHECK(o.direction == Direction::minimize);
    CHECK(o.avoid_value == 20.0);
    const auto codec = m.structure.codec();
    CHECK(codec.value(m.structure.initial_state, 0) == 0);
    CHECK(codec.value(m.structure.initial_state, 1) == 2);
    REQUIRE(o.targets.size() == 1);
    CHECK(codec.value(o.targets[0], 0) == 8);
    CHECK(codec.value(o.targets[0], 1) == 6);
    // Centre hole plus collisions: 9 collision states, 17 with an agent in the hole, one overlap.
    CHECK(o.avoid.size() == 9 + 17 - 1);
    CHECK(m.structure.metadata.at("holes") == "(1,1)");

    // Moving right from the start slips up (stays) or down with p_slip / 2.
    const auto row = transition_distribution(m, m.structure.initial_state, 1 * 4 + 3);
    const std::vector<std::size_t> right_left{1, 1};
    const std::vector<std::size_t> slip_down{3, 1};
    CHECK(row[codec.encode(right_left)] == doctest::Approx(0.9 * 0.9));
    CHECK(row[codec.encode(slip_down)] == doctest::Approx(0.05 * 0.9));

    const auto sol = solve_nominal(flatten(m));
    CHECK(sol.values[m.structure.initial_state] > 4.0 - 1e-9);  // at least four moves each
    CHECK(sol.values[m.structure.initial_state] < 20.0);
}

TEST_CASE("generate_benchmark reads parameters") {
    const auto m = generate_benchmark({"sysadmin", {{"machines", 4}, {"p_repair", 0.9}}});
    CHECK(m.structure.state_count() == 16);
    CHECK(m.structure.metadata.at("p_repair") == "0.9");
    CHECK(m.structure.metadata.at("assumed_defaults").find("p_repair") != std::string::npos);

    CHECK_THROWS_AS((void)generate_benchmark({"drone", {}}), Error);
    CHECK_THROWS_AS((void)generate_benchmark({"chain", {{"lenght", 3}}}), Error);
    CHECK_THROWS_AS((void)generate_benchmark({"chain", {{"length", 2.5}}}), Error);
    CHECK_THROWS_AS((void)generate_benchmark({"chain", {{"p_advance", 1.5}}}), Error);
    CHECK_THROWS_AS((void)make_frozenlake({3, 0.1, {{0, 0}}}), Error);
}

TEST_CASE("box perturbation clips at the simplex bounds") {
    const auto rf = perturb_to_rfmdp(make_sysadmin({3, 5}), 0.025);
    // Failed machine without repair: row (1, 0).
    const auto& box = std::get<BoxSet>(rf.uncertainty.get(0, 0));
    CHECK(box.lower == std::vector<double>{0.975, 0.0});
    CHECK(box.upper == std::vector<double>{1.0, 0.025});
    CHECK_THROWS_AS((void)perturb_to_rfmdp(make_chain({}), 1.0), Error);
    CHECK_THROWS_AS((void)perturb_to_rfmdp(make_chain({}), -0.1), Error);

    const auto l1 = perturb_to_l1_rfmdp(make_sysadmin({3, 5}), 0.05);
    const auto& ball = std::get<L1Set>(l1.uncertainty.get(0, 0));
    CHECK(ball.radius == 0.05);
    CHECK(ball.supported(0));
    CHECK(!ball.supported(1));
}

TEST_CASE("robust value drops below nominal and is monotone in epsilon") {
    const auto sys = make_sysadmin({3, 5});
    const double nominal = solve_nominal(flatten(sys)).values[sys.structure.initial_state];
    double previous = nominal;
    for (double eps : {0.01, 0.025, 0.1}) {
        const double v = solve_rfmdp(perturb_to_rfmdp(sys, eps), Backend::mccormick).initial_value(sys.structure.initial_state);
        CHECK(v < previous);
        previous = v;
    }
}

TEST_CASE("flat perturbation of a flattened model") {
    const auto flat = flatten(make_chain({2, 3, 0.8}));
    const auto rf = perturb_flat(flat, 0.05);
    REQUIRE(rf.rows.size() == flat.transitions.size());
    for (std::size_t k = 0; k < rf.rows.size(); ++k) {
        CHECK(rf.rows[k].support.size() == flat.transitions[k].size());
        for (std::size_t e = 0; e < rf.rows[k].support.size(); ++e) {
            const double p = flat.transitions[k][e].probability;
            CHECK(rf.rows[k].box.lower[e] == std::max(0.0, p - 0.05));
            CHECK(rf.rows[k].box.upper[e] == std::min(1.0, p + 0.05));
        }
    }
}
