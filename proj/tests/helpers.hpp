#pragma once

#include "rfmdp/model.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace rfmdp::testing {

/// Two factors, one action, one identifier per factor. Rows given by the caller.
inline FactoredMdp two_factor_model(std::vector<double> first, std::vector<double> second) {
    FactoredMdp m;
    m.structure.factors = {{"x", first.size()}, {"y", second.size()}};
    m.structure.actions = {"stay"};
    const std::size_t states = first.size() * second.size();
    m.structure.dependency = DependencyFunction(states, 1, 2, 2);
    for (std::size_t s = 0; s < states; ++s) {
        m.structure.dependency.set(s, 0, 0, 0);
        m.structure.dependency.set(s, 0, 1, 1);
    }
    m.structure.rewards.assign(states, 0.0);
    m.structure.objective = Objective::discounted(0.9);
    m.marginals = MarginalTable(2, 2);
    m.marginals.set(0, 0, std::move(first));
    m.marginals.set(1, 1, std::move(second));
    return m;
}

inline std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n, bool allow_zeros = false) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& x : p) {
        x = -std::log(1.0 - u(rng));
        if (allow_zeros && u(rng) < 0.2) x = 0.0;
        total += x;
    }
    if (total == 0.0) {
        p[0] = 1.0;
        return p;
    }
    for (auto& x : p) x /= total;
    return p;
}

/// Random model with `ids` identifiers per factor (factor i owns ids i*ids .. i*ids+ids-1).
inline FactoredMdp random_model(std::mt19937_64& rng, const std::vector<std::size_t>& domains, std::size_t actions,
                                std::size_t ids, Objective objective, bool allow_zeros = true) {
    FactoredMdp m;
    for (std::size_t i = 0; i < domains.size(); ++i) m.structure.factors.push_back({"f" + std::to_string(i), domains[i]});
    for (std::size_t a = 0; a < actions; ++a) m.structure.actions.push_back("a" + std::to_string(a));
    std::size_t states = 1;
    for (auto d : domains) states *= d;
    const std::size_t n = domains.size();
    m.structure.dependency = DependencyFunction(states, actions, n, n * ids);
    m.marginals = MarginalTable(n, n * ids);
    std::uniform_int_distribution<std::size_t> pick(0, ids - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t s = 0; s < states; ++s)
        for (std::size_t a = 0; a < actions; ++a)
            for (std::size_t i = 0; i < n; ++i)
                m.structure.dependency.set(s, a, i, static_cast<Identifier>(i * ids + pick(rng)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < ids; ++j)
            m.marginals.set(i, static_cast<Identifier>(i * ids + j), random_distribution(rng, domains[i], allow_zeros));
    m.structure.rewards.resize(states * actions);
    for (auto& r : m.structure.rewards) r = u(rng);
    m.structure.objective = std::move(objective);
    return m;
}

} // namespace rfmdp::testing
