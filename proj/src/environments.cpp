#include "rfmdp/environments.hpp"

#include "rfmdp/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace rfmdp {

namespace {

double clamp01(double p) { return std::min(1.0, std::max(0.0, p)); }

void require_probability(const char* name, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::domain, fmt::format("{} = {} not in [0,1]", name, p));
}

void require_positive(const char* name, std::size_t v) {
    if (v == 0) throw Error(ErrorKind::domain, fmt::format("{} must be positive", name));
}

std::string num(double x) { return fmt::format("{:.12g}", x); }

} // namespace

FactoredMdp make_sysadmin(const SysAdminParams& p) {
    require_positive("machines", p.machines);
    require_positive("horizon", p.horizon);
    require_probability("p_fail_base", p.p_fail_base);
    require_probability("p_fail_neighbor", p.p_fail_neighbor);
    require_probability("p_repair", p.p_repair);
    if (p.machines > 20) throw Error(ErrorKind::domain, "sysadmin supports at most 20 machines");

    const std::size_t n = p.machines;
    constexpr std::size_t ids_per_machine = 9;  // 8 (self, left, right) patterns + repaired
    FactoredMdp m;
    auto& st = m.structure;
    for (std::size_t i = 0; i < n; ++i) st.factors.push_back({fmt::format("machine{}", i), 2});
    for (std::size_t i = 0; i < n; ++i) st.actions.push_back(fmt::format("repair{}", i));
    st.actions.push_back("noop");

    const auto codec = st.codec();
    const std::size_t states = codec.state_count();
    st.dependency = DependencyFunction(states, n + 1, n, n * ids_per_machine);
    m.marginals = MarginalTable(n, n * ids_per_machine);
    st.rewards.assign(states * (n + 1), 0.0);

    for (StateIndex s = 0; s < states; ++s) {
        double running = 0.0;
        for (std::size_t i = 0; i < n; ++i) running += static_cast<double>(codec.value(s, i));
        for (ActionIndex a = 0; a <= n; ++a) {
            st.rewards[s * (n + 1) + a] = running;
            for (std::size_t i = 0; i < n; ++i) {
                const auto base = static_cast<Identifier>(i * ids_per_machine);
                if (a == i) {
                    st.dependency.set(s, a, i, base + 8);
                    continue;
                }
                const std::size_t self = codec.value(s, i);
                const std::size_t left = codec.value(s, (i + n - 1) % n);
                const std::size_t right = codec.value(s, (i + 1) % n);
                st.dependency.set(s, a, i, base + static_cast<Identifier>(self * 4 + left * 2 + right));
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto base = static_cast<Identifier>(i * ids_per_machine);
        for (std::size_t pattern = 0; pattern < 8; ++pattern) {
            const std::size_t self = pattern / 4;
            const std::size_t failed_neighbors = (1 - (pattern / 2) % 2) + (1 - pattern % 2);
            if (self == 0) {
                m.marginals.set(i, base + static_cast<Identifier>(pattern), {1.0, 0.0});
            } else {
                const double fail = clamp01(p.p_fail_base + p.p_fail_neighbor * static_cast<double>(failed_neighbors));
                m.marginals.set(i, base + static_cast<Identifier>(pattern), {fail, 1.0 - fail});
            }
        }
        m.marginals.set(i, base + 8, {1.0 - p.p_repair, p.p_repair});
    }
    st.initial_state = states - 1;  // all running
    st.objective = Objective::finite_horizon(p.horizon);
    st.metadata = {{"domain", "sysadmin"},
                   {"machines", std::to_string(n)},
                   {"horizon", std::to_string(p.horizon)},
                   {"p_fail_base", num(p.p_fail_base)},
                   {"p_fail_neighbor", num(p.p_fail_neighbor)},
                   {"p_repair", num(p.p_repair)},
                   {"assumed_defaults", "p_fail_base,p_fail_neighbor,p_repair"}};
    return m;
}

FactoredMdp make_chain(const ChainParams& p) {
    require_positive("chains", p.chains);
    require_probability("p_advance", p.p_advance);
    if (p.length < 2) throw Error(ErrorKind::domain, "chain length must be at least 2");

    const std::size_t n = p.chains, len = p.length;
    FactoredMdp m;
    auto& st = m.structure;
    for (std::size_t i = 0; i < n; ++i) st.factors.push_back({fmt::format("chain{}", i), len});
    st.actions = {"step"};
    const auto codec = st.codec();
    const std::size_t states = codec.state_count();
    st.dependency = DependencyFunction(states, 1, n, n * len);
    m.marginals = MarginalTable(n, n * len);
    st.rewards.assign(states, 1.0);
    for (StateIndex s = 0; s < states; ++s)
        for (std::size_t i = 0; i < n; ++i)
            st.dependency.set(s, 0, i, static_cast<Identifier>(i * len + codec.value(s, i)));

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t x = 0; x < len; ++x) {
            std::vector<double> row(len, 0.0);
            if (x == len - 1) {
                row[x] = 1.0;
            } else if (x + 2 < len) {
                row[x + 1] += p.p_advance;
                row[0] += 1.0 - p.p_advance;
            } else {
                row[len - 1] += p.p_advance;
                // Fall back uniformly to 0..M-3, or to 0 when that range is empty.
                const std::size_t fallback = len >= 3 ? len - 2 : 1;
                for (std::size_t y = 0; y < fallback; ++y) row[y] += (1.0 - p.p_advance) / static_cast<double>(fallback);
            }
            m.marginals.set(i, static_cast<Identifier>(i * len + x), std::move(row));
        }

    st.initial_state = 0;
    st.objective = Objective::expected_steps({states - 1});
    st.metadata = {{"domain", "chain"},
                   {"chains", std::to_string(n)},
                   {"length", std::to_string(len)},
                   {"p_advance", num(p.p_advance)},
                   {"assumed_defaults", "p_advance"}};
    return m;
}

FactoredMdp make_stock(const StockParams& p) {
    require_positive("sectors", p.sectors);
    require_positive("stocks", p.stocks);
    require_positive("horizon", p.horizon);
    require_probability("p_rise_base", p.p_rise_base);
    require_probability("p_rise_per_rising", p.p_rise_per_rising);
    if (p.stocks > 10) throw Error(ErrorKind::domain, "stock supports at most 10 stocks per sector");

    const std::size_t n = p.sectors, k = p.stocks;
    const std::size_t domain = std::size_t{1} << (k + 1);
    const std::size_t own_bit = std::size_t{1} << k;
    enum Effect : std::size_t { buy = 0, sell = 1, none = 2 };

    FactoredMdp m;
    auto& st = m.structure;
    for (std::size_t i = 0; i < n; ++i) st.factors.push_back({fmt::format("sector{}", i), domain});
    for (std::size_t i = 0; i < n; ++i) {
        st.actions.push_back(fmt::format("buy{}", i));
        st.actions.push_back(fmt::format("sell{}", i));
    }
    const auto codec = st.codec();
    const std::size_t states = codec.state_count();
    const std::size_t actions = 2 * n;
    const std::size_t ids_per_sector = domain * 3;
    st.dependency = DependencyFunction(states, actions, n, n * ids_per_sector);
    m.marginals = MarginalTable(n, n * ids_per_sector);
    st.rewards.assign(states * actions, 0.0);

    auto rising = [k](std::size_t v) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < k; ++j) c += (v >> j) & 1U;
        return c;
    };

    for (StateIndex s = 0; s < states; ++s) {
        double reward = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t v = codec.value(s, i);
            if (v & own_bit) {
                const double up = static_cast<double>(rising(v));
                reward += up - (static_cast<double>(k) - up);
            }
        }
        for (ActionIndex a = 0; a < actions; ++a) {
            st.rewards[s * actions + a] = reward;
            for (std::size_t i = 0; i < n; ++i) {
                const Effect e = a / 2 != i ? none : (a % 2 == 0 ? buy : sell);
                st.dependency.set(s, a, i, static_cast<Identifier>(i * ids_per_sector + codec.value(s, i) * 3 + e));
            }
        }
    }

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t v = 0; v < domain; ++v)
            for (std::size_t e = 0; e < 3; ++e) {
                const bool owned = e == buy || (e == none && (v & own_bit));
                std::vector<double> row(domain, 0.0);
                for (std::size_t next = 0; next < (std::size_t{1} << k); ++next) {
                    double prob = 1.0;
                    for (std::size_t j = 0; j < k; ++j) {
                        const std::size_t others = rising(v & (own_bit - 1)) - ((v >> j) & 1U);
                        const double up = clamp01(p.p_rise_base + p.p_rise_per_rising * static_cast<double>(others));
                        prob *= ((next >> j) & 1U) ? up : 1.0 - up;
                    }
                    row[next | (owned ? own_bit : 0)] = prob;
                }
                m.marginals.set(i, static_cast<Identifier>(i * ids_per_sector + v * 3 + e), std::move(row));
            }

    st.initial_state = 0;
    st.objective = Objective::finite_horizon(p.horizon);
    st.metadata = {{"domain", "stock"},
                   {"sectors", std::to_string(n)},
                   {"stocks", std::to_string(k)},
                   {"horizon", std::to_string(p.horizon)},
                   {"p_rise_base", num(p.p_rise_base)},
                   {"p_rise_per_rising", num(p.p_rise_per_rising)},
                   {"assumed_defaults", "p_rise_base,p_rise_per_rising"}};
    return m;
}

FactoredMdp make_frozenlake(const FrozenLakeParams& p) {
    if (p.size < 2) throw Error(ErrorKind::domain, "frozenlake grid size must be at least 2");
    require_probability("p_slip", p.p_slip);
    const std::size_t n = p.size, cells = n * n;
    auto cell = [n](std::size_t r, std::size_t c) { return r * n + c; };

    std::set<std::size_t> holes;
    if (p.default_holes) {
        if (n >= 3 && n % 2 == 1) holes.insert(cell(n / 2, n / 2));
    }
    for (auto [r, c] : p.holes) {
        if (r >= n || c >= n) throw Error(ErrorKind::domain, fmt::format("hole ({}, {}) outside the grid", r, c));
        holes.insert(cell(r, c));
    }
    const std::size_t start[2] = {cell(0, 0), cell(0, n - 1)};
    const std::size_t goal[2] = {cell(n - 1, n - 1), cell(n - 1, 0)};
    for (int agent = 0; agent < 2; ++agent)
        if (holes.count(start[agent]) || holes.count(goal[agent]))
            throw Error(ErrorKind::domain, "holes may not cover start or goal cells");

    FactoredMdp m;
    auto& st = m.structure;
    st.factors = {{"agent0", cells}, {"agent1", cells}};
    static const char* move_names[4] = {"up", "right", "down", "left"};
    for (int a0 = 0; a0 < 4; ++a0)
        for (int a1 = 0; a1 < 4; ++a1) st.actions.push_back(fmt::format("{}-{}", move_names[a0], move_names[a1]));

    const auto codec = st.codec();
    const std::size_t states = codec.state_count();
    const std::size_t ids_per_agent = cells * 4;
    st.dependency = DependencyFunction(states, 16, 2, 2 * ids_per_agent);
    m.marginals = MarginalTable(2, 2 * ids_per_agent);
    st.rewards.assign(states * 16, 1.0);
    for (StateIndex s = 0; s < states; ++s)
        for (ActionIndex a = 0; a < 16; ++a)
            for (std::size_t agent = 0; agent < 2; ++agent) {
                const std::size_t move = agent == 0 ? a / 4 : a % 4;
                st.dependency.set(s, a, agent,
                                  static_cast<Identifier>(agent * ids_per_agent + codec.value(s, agent) * 4 + move));
            }

    auto step = [&](std::size_t pos, std::size_t move) {
        const std::size_t r = pos / n, c = pos % n;
        switch (move) {
        case 0: return r == 0 ? pos : cell(r - 1, c);
        case 1: return c + 1 == n ? pos : cell(r, c + 1);
        case 2: return r + 1 == n ? pos : cell(r + 1, c);
        default: return c == 0 ? pos : cell(r, c - 1);
        }
    };
    for (std::size_t agent = 0; agent < 2; ++agent)
        for (std::size_t pos = 0; pos < cells; ++pos)
            for (std::size_t move = 0; move < 4; ++move) {
                std::vector<double> row(cells, 0.0);
                if (pos == goal[agent]) {
                    row[pos] = 1.0;
                } else {
                    row[step(pos, move)] += 1.0 - p.p_slip;
                    row[step(pos, (move + 1) % 4)] += p.p_slip / 2.0;
                    row[step(pos, (move + 3) % 4)] += p.p_slip / 2.0;
                }
                m.marginals.set(agent, static_cast<Identifier>(agent * ids_per_agent + pos * 4 + move), std::move(row));
            }

    std::vector<StateIndex> targets, avoid;
    for (StateIndex s = 0; s < states; ++s) {
        const std::size_t x = codec.value(s, 0), y = codec.value(s, 1);
        if (x == y || holes.count(x) || holes.count(y))
            avoid.push_back(s);
        else if (x == goal[0] && y == goal[1])
            targets.push_back(s);
    }
    const std::vector<std::size_t> start_state{start[0], start[1]};
    st.initial_state = codec.encode(start_state);
    st.objective = Objective::expected_steps(std::move(targets), std::move(avoid), p.avoid_penalty);

    std::string hole_list;
    for (auto h : holes) hole_list += fmt::format("{}({},{})", hole_list.empty() ? "" : ";", h / n, h % n);
    st.metadata = {{"domain", "frozenlake"},
                   {"size", std::to_string(n)},
                   {"p_slip", num(p.p_slip)},
                   {"holes", hole_list},
                   {"avoid_penalty", num(p.avoid_penalty)},
                   {"assumed_defaults", "p_slip,holes,avoid_penalty"}};
    return m;
}

namespace {

class ParamReader {
public:
    explicit ParamReader(const BenchmarkSpec& spec) : spec_(spec) {}

    double real(const std::string& key, double fallback) {
        used_.insert(key);
        const auto it = spec_.params.find(key);
        return it == spec_.params.end() ? fallback : it->second;
    }

    std::size_t count(const std::string& key, std::size_t fallback) {
        const double v = real(key, static_cast<double>(fallback));
        if (!(v >= 0.0) || v != std::floor(v) || v > 1e9)
            throw Error(ErrorKind::domain, fmt::format("parameter {} = {} must be a non-negative integer", key, v));
        return static_cast<std::size_t>(v);
    }

    void finish() const {
        for (const auto& [key, value] : spec_.params)
            if (!used_.count(key))
                throw Error(ErrorKind::domain, fmt::format("unknown parameter '{}' for domain {}", key, spec_.domain));
    }

private:
    const BenchmarkSpec& spec_;
    std::set<std::string> used_;
};

} // namespace

FactoredMdp generate_benchmark(const BenchmarkSpec& spec) {
    ParamReader r(spec);
    FactoredMdp model;
    if (spec.domain == "sysadmin") {
        SysAdminParams p;
        p.machines = r.count("machines", p.machines);
        p.horizon = r.count("horizon", p.horizon);
        p.p_fail_base = r.real("p_fail_base", p.p_fail_base);
        p.p_fail_neighbor = r.real("p_fail_neighbor", p.p_fail_neighbor);
        p.p_repair = r.real("p_repair", p.p_repair);
        r.finish();
        model = make_sysadmin(p);
    } else if (spec.domain == "chain") {
        ChainParams p;
        p.chains = r.count("chains", p.chains);
        p.length = r.count("length", p.length);
        p.p_advance = r.real("p_advance", p.p_advance);
        r.finish();
        model = make_chain(p);
    } else if (spec.domain == "stock") {
        StockParams p;
        p.sectors = r.count("sectors", p.sectors);
        p.stocks = r.count("stocks", p.stocks);
        p.horizon = r.count("horizon", p.horizon);
        p.p_rise_base = r.real("p_rise_base", p.p_rise_base);
        p.p_rise_per_rising = r.real("p_rise_per_rising", p.p_rise_per_rising);
        r.finish();
        model = make_stock(p);
    } else if (spec.domain == "frozenlake") {
        FrozenLakeParams p;
        p.size = r.count("size", p.size);
        p.p_slip = r.real("p_slip", p.p_slip);
        p.avoid_penalty = r.real("avoid_penalty", p.avoid_penalty);
        r.finish();
        model = make_frozenlake(p);
    } else {
        throw Error(ErrorKind::domain,
                    fmt::format("unknown domain '{}' (expected sysadmin, chain, stock or frozenlake)", spec.domain));
    }
    return model;
}

namespace {

void require_radius(double epsilon, double limit) {
    if (!(epsilon >= 0.0 && epsilon < limit))
        throw Error(ErrorKind::domain, fmt::format("radius {} not in [0, {})", epsilon, limit));
}

BoxSet widen(std::span<const double> row, double epsilon) {
    BoxSet box;
    box.lower.resize(row.size());
    box.upper.resize(row.size());
    for (std::size_t x = 0; x < row.size(); ++x) {
        box.lower[x] = std::max(0.0, row[x] - epsilon);
        box.upper[x] = std::min(1.0, row[x] + epsilon);
    }
    return box;
}

} // namespace

RfMdp perturb_to_rfmdp(const FactoredMdp& model, double epsilon) {
    require_radius(epsilon, 1.0);
    require_valid(model);
    RfMdp out{model.structure, UncertaintyTable(model.marginals.factor_count(), model.marginals.identifier_count())};
    for (std::size_t i = 0; i < model.marginals.factor_count(); ++i)
        for (Identifier j = 0; j < model.marginals.identifier_count(); ++j)
            if (model.marginals.has(i, j)) out.uncertainty.set(i, j, widen(model.marginals.row(i, j), epsilon));
    out.structure.metadata["uncertainty"] = fmt::format("box epsilon={:.12g}", epsilon);
    return out;
}

RfMdp perturb_to_l1_rfmdp(const FactoredMdp& model, double radius) {
    require_radius(radius, 2.0 + 1e-12);
    require_valid(model);
    RfMdp out{model.structure, UncertaintyTable(model.marginals.factor_count(), model.marginals.identifier_count())};
    for (std::size_t i = 0; i < model.marginals.factor_count(); ++i)
        for (Identifier j = 0; j < model.marginals.identifier_count(); ++j) {
            if (!model.marginals.has(i, j)) continue;
            const auto row = model.marginals.row(i, j);
            L1Set ball;
            ball.nominal.assign(row.begin(), row.end());
            ball.radius = radius;
            ball.support.resize(row.size());
            for (std::size_t x = 0; x < row.size(); ++x) ball.support[x] = row[x] > 0.0;
            out.uncertainty.set(i, j, std::move(ball));
        }
    out.structure.metadata["uncertainty"] = fmt::format("l1 radius={:.12g}", radius);
    return out;
}

FlatBoxRmdp perturb_flat(const FlatMdp& model, double epsilon) {
    require_radius(epsilon, 1.0);
    FlatBoxRmdp out;
    out.state_count = model.state_count;
    out.action_count = model.action_count;
    out.rewards = model.rewards;
    out.initial_state = model.initial_state;
    out.objective = model.objective;
    out.rows.resize(model.transitions.size());
    for (std::size_t k = 0; k < model.transitions.size(); ++k) {
        std::vector<double> probs;
        for (const auto& e : model.transitions[k]) {
            out.rows[k].support.push_back(e.state);
            probs.push_back(e.probability);
        }
        out.rows[k].box = widen(probs, epsilon);
    }
    return out;
}

} // namespace rfmdp
