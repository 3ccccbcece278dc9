#include "rfmdp/environments.hpp"
#include "rfmdp/error.hpp"
#include "rfmdp/learner.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace rfmdp;

namespace {

// One state, one action; factor i depends on ids[i].
ModelStructure single_state(const std::vector<std::size_t>& domains, const std::vector<Identifier>& ids,
                            std::size_t identifier_count) {
    ModelStructure st;
    for (std::size_t i = 0; i < domains.size(); ++i) st.factors.push_back({"f" + std::to_string(i), domains[i]});
    st.actions = {"a"};
    std::size_t states = 1;
    for (auto d : domains) states *= d;
    st.dependency = DependencyFunction(states, 1, domains.size(), identifier_count);
    for (StateIndex s = 0; s < states; ++s)
        for (std::size_t i = 0; i < domains.size(); ++i) st.dependency.set(s, 0, i, ids[i]);
    st.rewards.assign(states, 0.0);
    st.objective = Objective::discounted(0.9);
    return st;
}

} // namespace

TEST_CASE("a shared identifier is counted once per factor") {
    const auto st = single_state({2, 2}, {0, 0}, 1);
    TransitionCounts counts(st, SupportMap(2, 1));
    const auto codec = st.codec();
    const std::vector<std::size_t> next{1, 0};
    const Transition t{0, 0, codec.encode(next)};
    counts.record(st, std::span(&t, 1));
    CHECK(counts.component(0) == 2);
    CHECK(counts.realisation(0, 0, 1) == 1);
    CHECK(counts.realisation(1, 0, 0) == 1);
    CHECK(counts.pooled_realisation(0, 0) == 1);
    CHECK(counts.pooled_realisation(0, 1) == 1);

    const auto est = empirical_estimates(counts, st);
    CHECK(est.marginals.row(0, 0)[0] == doctest::Approx(0.5));
    CHECK(est.marginals.row(1, 0)[1] == doctest::Approx(0.5));
}

TEST_CASE("empirical estimate from counts (2, 3, 5)") {
    const auto st = single_state({3}, {0}, 1);
    TransitionCounts counts(st, SupportMap(1, 1));
    std::vector<Transition> batch;
    for (StateIndex x : {0, 0, 1, 1, 1, 2, 2, 2, 2, 2}) batch.push_back({0, 0, x});
    counts.record(st, batch);
    CHECK(counts.component(0) == 10);
    const auto est = empirical_estimates(counts, st);
    const auto row = est.marginals.row(0, 0);
    CHECK(row[0] == doctest::Approx(0.2));
    CHECK(row[1] == doctest::Approx(0.3));
    CHECK(row[2] == doctest::Approx(0.5));
    CHECK(est.unobserved.empty());
}

TEST_CASE("confidence budget splits") {
    // Two factors of domain 5 with identifiers 0..4 and 5..9: ten components of support 5.
    ModelStructure st;
    st.factors = {{"x", 5}, {"y", 5}};
    st.actions = {"a0", "a1", "a2", "a3", "a4"};
    st.dependency = DependencyFunction(25, 5, 2, 10);
    for (StateIndex s = 0; s < 25; ++s)
        for (ActionIndex a = 0; a < 5; ++a) {
            st.dependency.set(s, a, 0, static_cast<Identifier>(a));
            st.dependency.set(s, a, 1, static_cast<Identifier>(5 + a));
        }
    const auto box = split_confidence(1e-4, st, SupportMap(2, 10), ConfidenceScheme::box);
    CHECK(box.unknown_probabilities == 50);
    CHECK(box.relevant_components == 10);
    CHECK(box.delta == doctest::Approx(2e-6));
    const auto l1 = split_confidence(1e-4, st, SupportMap(2, 10), ConfidenceScheme::l1);
    CHECK(l1.delta == doctest::Approx(1e-5));

    // Disjoint identifier sets of sizes 3 and 4, every support of size 2.
    ModelStructure small;
    small.factors = {{"x", 2}, {"y", 2}};
    small.actions = {"a0", "a1", "a2", "a3"};
    small.dependency = DependencyFunction(4, 4, 2, 7);
    for (StateIndex s = 0; s < 4; ++s)
        for (ActionIndex a = 0; a < 4; ++a) {
            small.dependency.set(s, a, 0, static_cast<Identifier>(a % 3));
            small.dependency.set(s, a, 1, static_cast<Identifier>(3 + a));
        }
    const auto b = split_confidence(0.07, small, SupportMap(2, 7), ConfidenceScheme::box);
    CHECK(b.unknown_probabilities == 14);
    CHECK(b.relevant_components == 7);
    CHECK(b.delta == doctest::Approx(0.005));

    CHECK_THROWS_AS((void)split_confidence(0.0, st, SupportMap(2, 10), ConfidenceScheme::box), Error);
    CHECK_THROWS_AS((void)split_confidence(1.0, st, SupportMap(2, 10), ConfidenceScheme::box), Error);
}

TEST_CASE("unobserved components get the whole simplex over their support") {
    const auto truth = make_sysadmin({3, 5});
    const auto& st = truth.structure;
    TransitionCounts counts(st, SupportMap::of(truth));
    const auto budget = split_confidence(1e-4, st, counts.support(), ConfidenceScheme::box);
    const auto learned = build_learned_rfmdp(counts, budget, st);
    CHECK(validate_rfmdp(learned).empty());
    for (auto [i, j] : relevant_components(st)) {
        const auto& box = std::get<BoxSet>(learned.uncertainty.get(i, j));
        const auto outcomes = counts.support().outcomes(i, j, 2);
        for (std::size_t x = 0; x < 2; ++x) {
            const bool in = std::find(outcomes.begin(), outcomes.end(), x) != outcomes.end();
            if (!in) {
                CHECK(box.upper[x] == 0.0);
            } else if (outcomes.size() == 1) {
                CHECK(box.lower[x] == 1.0);
            } else {
                CHECK(box.lower[x] == 0.0);
                CHECK(box.upper[x] == 1.0);
            }
        }
    }
    const auto l1 = build_learned_rfmdp(counts, split_confidence(1e-4, st, counts.support(), ConfidenceScheme::l1), st);
    CHECK(validate_rfmdp(l1).empty());
}

TEST_CASE("sets built from many samples contain the true marginals") {
    std::mt19937_64 rng(7);
    const auto truth = testing::random_model(rng, {3, 2}, 2, 2, Objective::discounted(0.9));
    const auto& st = truth.structure;
    TransitionCounts counts(st, SupportMap::of(truth));
    std::vector<Transition> batch;
    std::mt19937_64 sampler(11);
    for (int k = 0; k < 10000; ++k) {
        const StateIndex s = sampler() % st.state_count();
        const ActionIndex a = sampler() % st.action_count();
        batch.push_back({s, a, sample_successor(truth, s, a, sampler)});
    }
    counts.record(st, batch);

    // Count conservation: each sample adds one realisation per factor.
    Count total = 0;
    for (auto c : counts.components()) total += c;
    CHECK(total == 10000 * st.factors.size());

    for (auto scheme : {ConfidenceScheme::box, ConfidenceScheme::l1}) {
        const auto learned = build_learned_rfmdp(counts, split_confidence(1e-3, st, counts.support(), scheme), st);
        for (auto [i, j] : relevant_components(st)) {
            const auto row = truth.marginals.row(i, j);
            const auto& set = learned.uncertainty.get(i, j);
            if (scheme == ConfidenceScheme::box)
                CHECK(std::get<BoxSet>(set).contains(row, 1e-12));
            else
                CHECK(std::get<L1Set>(set).contains(row, 1e-12));
        }
    }
}

TEST_CASE("box sets shrink with more data") {
    const auto st = single_state({2}, {0}, 1);
    double previous = 2.0;
    for (int n : {10, 100, 1000, 10000}) {
        TransitionCounts counts(st, SupportMap(1, 1));
        std::vector<Transition> batch;
        for (int k = 0; k < n; ++k) batch.push_back({0, 0, static_cast<StateIndex>(k % 4 == 0)});
        counts.record(st, batch);
        const auto budget = split_confidence(0.01, st, counts.support(), ConfidenceScheme::box);
        const auto learned = build_learned_rfmdp(counts, budget, st);
        const auto& box = std::get<BoxSet>(learned.uncertainty.get(0, 0));
        const double width = box.upper[1] - box.lower[1];
        CHECK(width < previous);
        CHECK(box.lower[1] <= 0.25);
        CHECK(box.upper[1] >= 0.25);
        previous = width;
    }
}

TEST_CASE("flat counts and learned flat model") {
    const auto truth = make_chain({1, 3, 0.8});
    const auto flat = flatten(truth);
    FlatCounts counts(flat);
    const std::vector<Transition> batch{{0, 0, 1}, {0, 0, 1}, {0, 0, 0}};
    counts.record(batch);
    CHECK(counts.total(0, 0) == 3);
    CHECK_THROWS_AS(counts.record(std::vector<Transition>{{0, 0, 2}}), Error);
    const auto learned = build_learned_flat(counts, 1e-3, flat);
    const auto& row = learned.rows[0];
    REQUIRE(row.support.size() == 2);
    CHECK(row.box.lower[1] <= 0.8);
    CHECK(row.box.upper[1] >= 0.8);
}

TEST_CASE("trajectory streams are reproducible and distinct") {
    auto a = trajectory_stream(5, 0);
    auto b = trajectory_stream(5, 0);
    auto c = trajectory_stream(5, 1);
    auto d = trajectory_stream(6, 0);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
    CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("sampled successors follow the true transition") {
    const auto truth = make_sysadmin({2, 3});
    const auto dist = transition_distribution(truth, 3, 2);
    std::vector<double> freq(dist.size(), 0.0);
    auto rng = trajectory_stream(1, 0);
    const int n = 200000;
    for (int k = 0; k < n; ++k) freq[sample_successor(truth, 3, 2, rng)] += 1.0 / n;
    for (std::size_t s = 0; s < dist.size(); ++s) CHECK(std::abs(freq[s] - dist[s]) < 0.005);
}

TEST_CASE("learning loop checkpoints and determinism") {
    const auto truth = make_sysadmin({2, 3});
    LearningConfig cfg;
    cfg.total_trajectories = 0;
    const auto empty = learning_loop(truth, cfg);
    REQUIRE(empty.checkpoints.size() == 1);
    CHECK(empty.checkpoints[0].trajectories == 0);
    CHECK(empty.checkpoints[0].recomputes == 1);

    cfg.total_trajectories = 45;
    cfg.checkpoint_interval = 20;
    cfg.seed = 3;
    const auto a = learning_loop(truth, cfg);
    const auto b = learning_loop(truth, cfg);
    std::vector<std::size_t> at;
    for (const auto& c : a.checkpoints) at.push_back(c.trajectories);
    CHECK(at == std::vector<std::size_t>{0, 20, 40, 45});
    REQUIRE(a.checkpoints.size() == b.checkpoints.size());
    for (std::size_t k = 0; k < a.checkpoints.size(); ++k) {
        CHECK(a.checkpoints[k].guarantee == b.checkpoints[k].guarantee);
        CHECK(a.checkpoints[k].nominal == b.checkpoints[k].nominal);
        CHECK(a.checkpoints[k].recomputes == b.checkpoints[k].recomputes);
    }
    // Doubling triggers: recomputes grow at most logarithmically in the sample count.
    const auto last = a.checkpoints.back();
    CHECK(last.recomputes >= 2);
    CHECK(last.recomputes <= 1 + a.budget.relevant_components * 12);

    const auto report = pac_report(a);
    CHECK(report.violations == 0);
    for (const auto& row : report.rows) CHECK(row.nominal >= row.guarantee - 1e-9);
    CHECK(a.checkpoints.back().guarantee >= a.checkpoints.front().guarantee);
}

TEST_CASE("learning loop with the flat baseline and the l1 scheme") {
    const auto truth = make_sysadmin({2, 3});
    LearningConfig cfg;
    cfg.total_trajectories = 30;
    cfg.checkpoint_interval = 30;
    cfg.backend = Backend::flat;
    const auto flat = learning_loop(truth, cfg);
    CHECK(pac_report(flat).violations == 0);
    std::size_t nonzero = 0;
    for (const auto& row : flatten(truth).transitions)
        for (const auto& e : row) nonzero += e.probability > 0.0;
    CHECK(flat.budget.unknown_probabilities == nonzero);

    cfg.backend = Backend::l1_radius_sum;
    cfg.scheme = ConfidenceScheme::l1;
    CHECK(pac_report(learning_loop(truth, cfg)).violations == 0);

    cfg.backend = Backend::mccormick;
    CHECK_THROWS_AS((void)learning_loop(truth, cfg), Error);
    cfg.scheme = ConfidenceScheme::box;
    cfg.checkpoint_interval = 0;
    CHECK_THROWS_AS((void)learning_loop(truth, cfg), Error);
}

TEST_CASE("inflating a learned set never raises the guarantee") {
    const auto truth = make_sysadmin({3, 3});
    const auto& st = truth.structure;
    TransitionCounts counts(st, SupportMap::of(truth));
    std::vector<Transition> batch;
    auto rng = trajectory_stream(9, 0);
    for (int k = 0; k < 400; ++k) {
        const StateIndex s = rng() % st.state_count();
        const ActionIndex a = rng() % st.action_count();
        batch.push_back({s, a, sample_successor(truth, s, a, rng)});
    }
    counts.record(st, batch);
    auto budget = split_confidence(1e-3, st, counts.support(), ConfidenceScheme::box);
    const auto tight = build_learned_rfmdp(counts, budget, st);
    budget.delta /= 100.0;
    const auto wide = build_learned_rfmdp(counts, budget, st);
    const auto vt = solve_rfmdp(tight, Backend::vertex).values;
    const auto vw = solve_rfmdp(wide, Backend::vertex).values;
    for (std::size_t s = 0; s < vt.size(); ++s) CHECK(vw[s] <= vt[s] + 1e-9);
}
