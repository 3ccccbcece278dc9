#include "helpers.hpp"

#include "rfmdp/environments.hpp"
#include "rfmdp/error.hpp"
#include "rfmdp/solver.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

using namespace rfmdp;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// Single binary factor, one action, marginal (0.5, 0.5), zero rewards.
RfMdp coin_model(double half_width) {
    FactoredMdp m;
    m.structure.factors = {{"x", 2}};
    m.structure.actions = {"go"};
    m.structure.dependency = DependencyFunction(2, 1, 1, 1);
    m.structure.dependency.set(0, 0, 0, 0);
    m.structure.dependency.set(1, 0, 0, 0);
    m.structure.rewards = {0.0, 0.0};
    m.structure.objective = Objective::discounted(0.9);
    m.marginals = MarginalTable(1, 1);
    m.marginals.set(0, 0, {0.5, 0.5});
    return perturb_to_rfmdp(m, half_width);
}

// Independent Bellman operator on the explicit model.
std::vector<double> classical_backup(const FlatMdp& flat, std::span<const double> v) {
    const double gamma = flat.objective.discount.value_or(1.0);
    std::vector<double> out(flat.state_count);
    for (StateIndex s = 0; s < flat.state_count; ++s) {
        double best = -1e300;
        for (ActionIndex a = 0; a < flat.action_count; ++a) {
            double e = 0.0;
            for (const auto& entry : flat.row(s, a)) e += entry.probability * v[entry.state];
            best = std::max(best, flat.reward(s, a) + gamma * e);
        }
        out[s] = best;
    }
    return out;
}

FactoredMdp random_discounted(std::mt19937_64& rng, std::vector<std::size_t> domains, std::size_t actions = 2) {
    return testing::random_model(rng, domains, actions, 2, Objective::discounted(0.9));
}

const Backend box_backends[] = {Backend::vertex, Backend::interval_arithmetic, Backend::mccormick};

} // namespace

TEST_CASE("deterministic chain takes two steps") {
    const auto chain = make_chain({1, 3, 1.0});
    for (Backend b : box_backends) {
        const auto sol = solve_rfmdp(perturb_to_rfmdp(chain, 0.0), b);
        CHECK(sol.initial_value(chain.structure.initial_state) == doctest::Approx(2.0).epsilon(1e-9));
    }
    const auto nominal = evaluate_policy_nominal(chain, Policy::stationary({0, 0, 0}));
    CHECK(nominal[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(nominal[2] == 0.0);
}

TEST_CASE("zero rewards stay at zero") {
    std::mt19937_64 rng(3);
    auto m = random_discounted(rng, {2, 3});
    std::fill(m.structure.rewards.begin(), m.structure.rewards.end(), 0.0);
    for (Backend b : box_backends) {
        const auto sol = solve_rfmdp(perturb_to_rfmdp(m, 0.05), b);
        for (double v : sol.values) CHECK(v == 0.0);
    }
}

TEST_CASE("hand-checkable two-state backup matches brute force over the box") {
    const auto model = coin_model(0.1);  // box [0.4, 0.6]^2
    const std::vector<double> values{0.0, 1.0};
    double brute = 1e300;
    for (int k = 0; k <= 2000; ++k) {
        const double p0 = 0.4 + 0.2 * k / 2000.0;
        brute = std::min(brute, 0.9 * ((1.0 - p0) * values[1] + p0 * values[0]));
    }
    for (Backend b : box_backends) {
        const auto r = robust_bellman_backup(model, values, b);
        CHECK(r.values[0] == doctest::Approx(0.36).epsilon(1e-12));
        CHECK(r.values[1] == doctest::Approx(brute).epsilon(1e-12));
        CHECK(r.witnesses[0][0] == doctest::Approx(0.6));
    }
    const auto optimistic = robust_bellman_backup(model, values, Backend::vertex, EnvDirection::best);
    CHECK(optimistic.values[0] == doctest::Approx(0.54).epsilon(1e-12));
}

TEST_CASE("point-mass sets reproduce the classical Bellman operator") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_discounted(rng, {2, 3}, 3);
        const auto flat = flatten(m);
        std::vector<double> v(flat.state_count);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (auto& x : v) x = u(rng);
        const auto expected = classical_backup(flat, v);
        for (Backend b : box_backends)
            CHECK(max_abs_diff(robust_bellman_backup(perturb_to_rfmdp(m, 0.0), v, b).values, expected) <= 1e-10);
        CHECK(max_abs_diff(robust_bellman_backup(perturb_to_l1_rfmdp(m, 0.0), v, Backend::l1_radius_sum).values,
                           expected) <= 1e-10);
    }
}

TEST_CASE("radius-0 solves agree with classical value iteration") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_discounted(rng, {2, 2, 2});
        const auto nominal = solve_nominal(flatten(m)).values;
        for (Backend b : box_backends)
            CHECK(max_abs_diff(solve_rfmdp(perturb_to_rfmdp(m, 0.0), b).values, nominal) <= 1e-6);
        CHECK(max_abs_diff(solve_rfmdp(perturb_to_l1_rfmdp(m, 0.0), Backend::l1_radius_sum).values, nominal) <= 1e-6);
        CHECK(max_abs_diff(solve_flat_rmdp(perturb_flat(flatten(m), 0.0)).values, nominal) <= 1e-6);
    }
}

TEST_CASE("robust policy evaluation at radius 0 matches a linear solve") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_discounted(rng, {3, 2}, 3);
        const auto flat = flatten(m);
        std::vector<ActionIndex> actions(flat.state_count);
        std::uniform_int_distribution<ActionIndex> pick(0, 2);
        for (auto& a : actions) a = pick(rng);

        const auto n = static_cast<Eigen::Index>(flat.state_count);
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd r(n);
        for (StateIndex s = 0; s < flat.state_count; ++s) {
            r(static_cast<Eigen::Index>(s)) = flat.reward(s, actions[s]);
            for (const auto& e : flat.row(s, actions[s]))
                A(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(e.state)) -= 0.9 * e.probability;
        }
        const Eigen::VectorXd exact = A.partialPivLu().solve(r);
        const std::vector<double> expected(exact.data(), exact.data() + n);

        SolveOptions tight;
        tight.tolerance = 1e-10;
        const auto policy = Policy::stationary(actions);
        for (Backend b : box_backends)
            CHECK(max_abs_diff(evaluate_policy_robust(perturb_to_rfmdp(m, 0.0), policy, b, tight), expected) <= 1e-6);
        CHECK(max_abs_diff(evaluate_policy_nominal(m, policy), expected) <= 1e-6);
    }
}

TEST_CASE("evaluating the robust optimal policy reproduces its values") {
    std::mt19937_64 rng(23);
    const auto m = perturb_to_rfmdp(random_discounted(rng, {2, 3}), 0.05);
    SolveOptions tight;
    tight.tolerance = 1e-9;
    for (Backend b : box_backends) {
        const auto sol = solve_rfmdp(m, b, tight);
        CHECK(max_abs_diff(evaluate_policy_robust(m, sol.full_policy, b, tight), sol.values) <= 1e-6);
    }
}

TEST_CASE("finite-horizon robust evaluation of the optimal stage policy") {
    const auto m = perturb_to_rfmdp(make_sysadmin({3, 5}), 0.025);
    const auto sol = solve_rfmdp(m, Backend::vertex);
    CHECK(sol.full_policy.stage_count() == 5);
    CHECK(sol.iterations == 5);
    CHECK(max_abs_diff(evaluate_policy_robust(m, sol.full_policy, Backend::vertex), sol.values) <= 1e-9);

    // Never repairing is no better than the optimum.
    const std::size_t noop = 3;
    const auto lazy = evaluate_policy_robust(m, Policy::stationary(std::vector<ActionIndex>(8, noop)), Backend::vertex);
    for (std::size_t s = 0; s < 8; ++s) CHECK(lazy[s] <= sol.values[s] + 1e-9);
}

TEST_CASE("backend dominance and epsilon monotonicity") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_discounted(rng, {2, 3, 2});
        std::vector<double> previous_vertex;
        for (double eps : {0.0, 0.02, 0.05, 0.1}) {
            const auto rf = perturb_to_rfmdp(m, eps);
            const auto ia = solve_rfmdp(rf, Backend::interval_arithmetic).values;
            const auto mc = solve_rfmdp(rf, Backend::mccormick).values;
            const auto ve = solve_rfmdp(rf, Backend::vertex).values;
            for (std::size_t s = 0; s < ve.size(); ++s) {
                CHECK(ia[s] <= mc[s] + 1e-7);
                CHECK(mc[s] <= ve[s] + 1e-7);
                if (!previous_vertex.empty()) CHECK(ve[s] <= previous_vertex[s] + 1e-7);
            }
            previous_vertex = ve;
        }
    }
}

TEST_CASE("soundness: true model beats the robust guarantee") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto truth = random_discounted(rng, {2, 2, 3});
        const auto rf = perturb_to_rfmdp(truth, 0.05);
        for (Backend b : box_backends) {
            const auto sol = solve_rfmdp(rf, b);
            const auto robust = evaluate_policy_robust(rf, sol.full_policy, b);
            const auto actual = evaluate_policy_nominal(truth, sol.full_policy);
            for (std::size_t s = 0; s < actual.size(); ++s) CHECK(actual[s] >= robust[s] - 1e-6);
        }
    }

    // Minimising objective: the guarantee is an upper bound.
    const auto chain = make_chain({2, 3, 0.8});
    const auto rf = perturb_to_rfmdp(chain, 0.05);
    const auto sol = solve_rfmdp(rf, Backend::vertex);
    const auto actual = evaluate_policy_nominal(chain, sol.full_policy);
    for (std::size_t s = 0; s < actual.size(); ++s) CHECK(actual[s] <= sol.values[s] + 1e-6);
}

TEST_CASE("discounted residuals contract by the discount factor") {
    std::mt19937_64 rng(37);
    const auto rf = perturb_to_rfmdp(random_discounted(rng, {3, 3}), 0.05);
    for (Backend b : box_backends) {
        std::vector<double> v(9, 0.0);
        double previous = -1.0;
        for (int k = 0; k < 30; ++k) {
            const auto next = robust_bellman_backup(rf, v, b).values;
            const double residual = max_abs_diff(next, v);
            if (previous > 0.0) CHECK(residual <= 0.9 * previous + 1e-12);
            previous = residual;
            v = next;
        }
    }
}

TEST_CASE("optimistic environment bounds the pessimistic one") {
    std::mt19937_64 rng(41);
    const auto rf = perturb_to_rfmdp(random_discounted(rng, {2, 3}), 0.05);
    SolveOptions best;
    best.environment = EnvDirection::best;
    const auto hi = solve_rfmdp(rf, Backend::vertex, best).values;
    const auto lo = solve_rfmdp(rf, Backend::vertex).values;
    for (std::size_t s = 0; s < hi.size(); ++s) CHECK(lo[s] <= hi[s] + 1e-9);
}

TEST_CASE("threaded sweeps are bit-identical") {
    std::mt19937_64 rng(43);
    const auto rf = perturb_to_rfmdp(random_discounted(rng, {3, 3, 2}), 0.05);
    SolveOptions one, four;
    one.threads = 1;
    four.threads = 4;
    const auto a = solve_rfmdp(rf, Backend::mccormick, one);
    const auto b = solve_rfmdp(rf, Backend::mccormick, four);
    CHECK(a.values == b.values);
    CHECK(a.policy == b.policy);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("errors: backend mismatch, iteration cap, divergence") {
    std::mt19937_64 rng(47);
    const auto m = random_discounted(rng, {2, 2});
    const auto boxes = perturb_to_rfmdp(m, 0.05);
    const auto balls = perturb_to_l1_rfmdp(m, 0.05);

    auto kind_of = [](auto&& f) -> std::optional<ErrorKind> {
        try {
            f();
        } catch (const Error& e) {
            return e.kind();
        }
        return std::nullopt;
    };
    CHECK(kind_of([&] { (void)solve_rfmdp(boxes, Backend::l1_radius_sum); }) == ErrorKind::config);
    CHECK(kind_of([&] { (void)solve_rfmdp(balls, Backend::mccormick); }) == ErrorKind::config);
    CHECK(kind_of([&] { (void)solve_rfmdp(boxes, Backend::flat); }) == ErrorKind::config);
    CHECK(kind_of([] { (void)parse_backend("simplex"); }) == ErrorKind::config);

    SolveOptions capped;
    capped.iteration_cap = 3;
    CHECK(kind_of([&] { (void)solve_rfmdp(boxes, Backend::vertex, capped); }) == ErrorKind::solver);

    // A chain that never advances never reaches its target.
    const auto stuck = make_chain({1, 3, 0.0});
    SolveOptions guarded;
    guarded.divergence_threshold = 1e3;
    CHECK(kind_of([&] { (void)solve_rfmdp(perturb_to_rfmdp(stuck, 0.0), Backend::vertex, guarded); }) ==
          ErrorKind::divergence);
}

TEST_CASE("backend names round-trip") {
    for (Backend b : {Backend::vertex, Backend::interval_arithmetic, Backend::mccormick, Backend::l1_radius_sum,
                      Backend::flat})
        CHECK(parse_backend(to_string(b)) == b);
}

TEST_CASE("reachability ignores rewards and fixes terminal values") {
    std::mt19937_64 rng(53);
    auto m = testing::random_model(rng, {2, 2}, 2, 2, Objective::reachability({3}, {0}));
    const auto sol = solve_rfmdp(perturb_to_rfmdp(m, 0.0), Backend::vertex);
    CHECK(sol.values[3] == 1.0);
    CHECK(sol.values[0] == 0.0);
    for (double v : sol.values) {
        CHECK(v >= -1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
}
