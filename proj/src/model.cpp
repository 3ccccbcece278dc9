#include "rfmdp/model.hpp"

#include "rfmdp/error.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

namespace rfmdp {

namespace {

constexpr double input_row_tolerance = 1e-12;

} // namespace

// ---------------------------------------------------------------------------
// StateCodec

StateCodec::StateCodec(const std::vector<Factor>& factors) {
    names_.reserve(factors.size());
    sizes_.reserve(factors.size());
    for (const auto& f : factors) {
        if (f.domain_size == 0)
            throw Error(ErrorKind::domain, fmt::format("factor '{}' has an empty domain", f.name));
        names_.push_back(f.name);
        sizes_.push_back(f.domain_size);
    }
    strides_.assign(sizes_.size(), 1);
    for (std::size_t i = sizes_.size(); i-- > 0;) {
        strides_[i] = state_count_;
        if (state_count_ > std::numeric_limits<std::size_t>::max() / sizes_[i])
            throw Error(ErrorKind::size, "state count overflows the index type");
        state_count_ *= sizes_[i];
    }
}

StateIndex StateCodec::encode(std::span<const std::size_t> assignment) const {
    if (assignment.size() != sizes_.size())
        throw Error(ErrorKind::range, fmt::format("assignment has {} values, model has {} factors",
                                                  assignment.size(), sizes_.size()));
    StateIndex index = 0;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        if (assignment[i] >= sizes_[i])
            throw Error(ErrorKind::range, fmt::format("value {} out of range for factor '{}' (domain size {})",
                                                      assignment[i], names_[i], sizes_[i]));
        index += assignment[i] * strides_[i];
    }
    return index;
}

std::vector<std::size_t> StateCodec::decode(StateIndex index) const {
    if (index >= state_count_)
        throw Error(ErrorKind::range,
                    fmt::format("state index {} out of range (state count {})", index, state_count_));
    std::vector<std::size_t> out(sizes_.size());
    for (std::size_t i = 0; i < sizes_.size(); ++i) out[i] = value(index, i);
    return out;
}

// ---------------------------------------------------------------------------
// DependencyFunction / MarginalTable

DependencyFunction::DependencyFunction(std::size_t states, std::size_t actions, std::size_t factors,
                                       std::size_t identifier_count)
    : states_(states), actions_(actions), factors_(factors), identifier_count_(identifier_count),
      table_(states * actions * factors, unset) {}

void DependencyFunction::set(StateIndex s, ActionIndex a, std::size_t factor, Identifier id) {
    if (s >= states_ || a >= actions_ || factor >= factors_)
        throw Error(ErrorKind::range,
                    fmt::format("dependency entry (state {}, action {}, factor {}) out of range", s, a, factor));
    if (id >= identifier_count_)
        throw Error(ErrorKind::range,
                    fmt::format("identifier {} exceeds identifier_count {}", id, identifier_count_));
    table_[offset(s, a) + factor] = id;
}

MarginalTable::MarginalTable(std::size_t factors, std::size_t identifier_count)
    : factors_(factors), identifier_count_(identifier_count), rows_(factors * identifier_count) {}

std::size_t MarginalTable::index(std::size_t factor, Identifier id) const {
    if (factor >= factors_ || id >= identifier_count_)
        throw Error(ErrorKind::range, fmt::format("marginal key (factor {}, id {}) out of range", factor, id));
    return factor * identifier_count_ + id;
}

bool MarginalTable::has(std::size_t factor, Identifier id) const {
    if (factor >= factors_ || id >= identifier_count_) return false;
    return !rows_[factor * identifier_count_ + id].empty();
}

std::span<const double> MarginalTable::row(std::size_t factor, Identifier id) const {
    const auto& r = rows_[index(factor, id)];
    if (r.empty())
        throw Error(ErrorKind::validation, fmt::format("missing marginal row (factor {}, id {})", factor, id));
    return r;
}

void MarginalTable::set(std::size_t factor, Identifier id, std::vector<double> probs) {
    rows_[index(factor, id)] = std::move(probs);
}

// ---------------------------------------------------------------------------
// Objective

Objective Objective::discounted(double discount, Direction direction) {
    Objective o;
    o.kind = ObjectiveKind::discounted_reward;
    o.direction = direction;
    o.discount = discount;
    return o;
}

Objective Objective::finite_horizon(std::size_t horizon, Direction direction) {
    Objective o;
    o.kind = ObjectiveKind::finite_horizon_reward;
    o.direction = direction;
    o.horizon = horizon;
    return o;
}

Objective Objective::reachability(std::vector<StateIndex> targets, std::vector<StateIndex> avoid) {
    Objective o;
    o.kind = ObjectiveKind::reachability;
    o.direction = Direction::maximize;
    o.targets = std::move(targets);
    o.avoid = std::move(avoid);
    return o;
}

Objective Objective::expected_steps(std::vector<StateIndex> targets, std::vector<StateIndex> avoid,
                                    double avoid_value) {
    Objective o;
    o.kind = ObjectiveKind::expected_steps;
    o.direction = Direction::minimize;
    o.targets = std::move(targets);
    o.avoid = std::move(avoid);
    o.avoid_value = avoid_value;
    return o;
}

std::string_view to_string(ObjectiveKind kind) {
    switch (kind) {
    case ObjectiveKind::discounted_reward: return "discounted-reward";
    case ObjectiveKind::finite_horizon_reward: return "finite-horizon-reward";
    case ObjectiveKind::reachability: return "reachability";
    case ObjectiveKind::expected_steps: return "expected-steps";
    }
    return "unknown";
}

std::string_view to_string(Direction direction) {
    return direction == Direction::maximize ? "maximize" : "minimize";
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void validate_objective(const ModelStructure& m, std::size_t states, ValidationReport& report) {
    const auto& o = m.objective;
    const bool discounted = o.kind == ObjectiveKind::discounted_reward;
    const bool finite = o.kind == ObjectiveKind::finite_horizon_reward;
    const bool needs_targets = o.kind == ObjectiveKind::reachability || o.kind == ObjectiveKind::expected_steps;

    if (discounted != o.discount.has_value())
        report.push_back({"objective.discount", "discount must be present iff kind is discounted-reward"});
    if (o.discount && !(*o.discount > 0.0 && *o.discount < 1.0))
        report.push_back({"objective.discount", fmt::format("discount {} not in (0,1)", *o.discount)});
    if (finite != o.horizon.has_value())
        report.push_back({"objective.horizon", "horizon must be present iff kind is finite-horizon-reward"});
    if (o.horizon && *o.horizon == 0) report.push_back({"objective.horizon", "horizon must be positive"});
    if (needs_targets && o.targets.empty())
        report.push_back({"objective.targets", "target set must be non-empty"});
    for (auto t : o.targets)
        if (t >= states) report.push_back({"objective.targets", fmt::format("target state {} out of range", t)});
    for (auto t : o.avoid)
        if (t >= states) report.push_back({"objective.avoid", fmt::format("avoid state {} out of range", t)});
    if (o.kind == ObjectiveKind::reachability && o.direction != Direction::maximize)
        report.push_back({"objective.direction", "reachability objectives are maximised"});
}

} // namespace

ValidationReport validate_structure(const ModelStructure& m) {
    ValidationReport report;
    if (m.factors.empty()) report.push_back({"factors", "model has no factors"});
    std::set<std::string> names;
    bool factors_ok = !m.factors.empty();
    for (std::size_t i = 0; i < m.factors.size(); ++i) {
        if (m.factors[i].domain_size == 0) {
            report.push_back({"factors", fmt::format("factor {} ('{}') has domain_size 0", i, m.factors[i].name)});
            factors_ok = false;
        }
        if (!names.insert(m.factors[i].name).second)
            report.push_back({"factors", fmt::format("duplicate factor name '{}'", m.factors[i].name)});
    }
    if (m.actions.empty()) report.push_back({"actions", "model has no actions"});
    if (!factors_ok) return report;

    std::size_t states = 0;
    try {
        states = m.codec().state_count();
    } catch (const Error& e) {
        report.push_back({"factors", e.what()});
        return report;
    }

    const auto& dep = m.dependency;
    if (dep.state_count() != states || dep.action_count() != m.actions.size() ||
        dep.factor_count() != m.factors.size()) {
        report.push_back({"dependency", fmt::format("table shape ({}, {}, {}) does not match model ({}, {}, {})",
                                                    dep.state_count(), dep.action_count(), dep.factor_count(),
                                                    states, m.actions.size(), m.factors.size())});
        return report;
    }
    if (dep.identifier_count() == 0) report.push_back({"dependency", "identifier_count must be positive"});

    // Shared identifiers must live on factors of equal domain size.
    std::vector<std::size_t> owner_size(dep.identifier_count(), 0);
    std::vector<std::size_t> owner(dep.identifier_count(), 0);
    std::size_t gaps = 0;
    for (StateIndex s = 0; s < states; ++s)
        for (ActionIndex a = 0; a < m.actions.size(); ++a)
            for (std::size_t i = 0; i < m.factors.size(); ++i) {
                const Identifier id = dep(s, a, i);
                if (id == DependencyFunction::unset) {
                    if (gaps++ == 0)
                        report.push_back({"dependency",
                                          fmt::format("no identifier for (state {}, action {}, factor {})", s, a, i)});
                    continue;
                }
                const auto size = m.factors[i].domain_size;
                if (owner_size[id] == 0) {
                    owner_size[id] = size;
                    owner[id] = i;
                } else if (owner_size[id] != size) {
                    report.push_back({"dependency",
                                      fmt::format("identifier {} shared by factors {} and {} with unequal domain sizes",
                                                  id, owner[id], i)});
                    owner_size[id] = size;
                    owner[id] = i;
                }
            }
    if (gaps > 1)
        report.push_back({"dependency", fmt::format("{} further dependency entries are unset", gaps - 1)});

    if (m.rewards.size() != states * m.actions.size())
        report.push_back({"rewards", fmt::format("expected {} rewards, found {}", states * m.actions.size(),
                                                 m.rewards.size())});
    else
        for (std::size_t k = 0; k < m.rewards.size(); ++k)
            if (!std::isfinite(m.rewards[k])) {
                report.push_back({"rewards", fmt::format("reward for (state {}, action {}) is not finite",
                                                         k / m.actions.size(), k % m.actions.size())});
                break;
            }
    if (m.initial_state >= states)
        report.push_back({"initial_state", fmt::format("initial state {} out of range", m.initial_state)});
    validate_objective(m, states, report);
    return report;
}

ValidationReport validate_fmdp(const FactoredMdp& model) {
    ValidationReport report = validate_structure(model.structure);
    if (!report.empty()) return report;
    const auto& m = model.structure;
    const auto& dep = m.dependency;
    const auto& table = model.marginals;
    if (table.factor_count() != m.factors.size() || table.identifier_count() != dep.identifier_count()) {
        report.push_back({"marginals", "marginal table shape does not match factors x identifier_count"});
        return report;
    }

    std::vector<char> reachable(m.factors.size() * dep.identifier_count(), 0);
    for (StateIndex s = 0; s < m.state_count(); ++s)
        for (ActionIndex a = 0; a < m.action_count(); ++a)
            for (std::size_t i = 0; i < m.factors.size(); ++i)
                reachable[i * dep.identifier_count() + dep(s, a, i)] = 1;

    for (std::size_t i = 0; i < m.factors.size(); ++i)
        for (Identifier j = 0; j < dep.identifier_count(); ++j) {
            if (!table.has(i, j)) {
                if (reachable[i * dep.identifier_count() + j])
                    report.push_back({"marginals", fmt::format("missing row for reachable (factor {}, id {})", i, j)});
                continue;
            }
            const auto row = table.row(i, j);
            if (row.size() != m.factors[i].domain_size) {
                report.push_back({"marginals", fmt::format("row (factor {}, id {}) has {} entries, domain size is {}",
                                                           i, j, row.size(), m.factors[i].domain_size)});
                continue;
            }
            double total = 0.0;
            bool negative = false;
            for (double p : row) {
                if (!(p >= 0.0)) negative = true;
                total += p;
            }
            if (negative)
                report.push_back({"marginals", fmt::format("row (factor {}, id {}) has a negative entry", i, j)});
            else if (std::abs(total - 1.0) > input_row_tolerance)
                report.push_back({"marginals", fmt::format("row (factor {}, id {}) sums to {:.12g}", i, j, total)});
        }

    // A shared identifier denotes one shared distribution.
    for (Identifier j = 0; j < dep.identifier_count(); ++j) {
        std::optional<std::size_t> first;
        for (std::size_t i = 0; i < m.factors.size(); ++i) {
            if (!reachable[i * dep.identifier_count() + j] || !table.has(i, j)) continue;
            if (!first) {
                first = i;
                continue;
            }
            const auto a = table.row(*first, j);
            const auto b = table.row(i, j);
            if (a.size() != b.size()) continue;  // reported by the structure check
            for (std::size_t x = 0; x < a.size(); ++x)
                if (std::abs(a[x] - b[x]) > input_row_tolerance) {
                    report.push_back({"marginals", fmt::format("identifier {} is shared by factors {} and {} "
                                                               "but their rows differ", j, *first, i)});
                    break;
                }
        }
    }
    return report;
}

void require_valid(const FactoredMdp& model) {
    const auto report = validate_fmdp(model);
    if (report.empty()) return;
    std::string message = "invalid model:";
    for (const auto& v : report) message += fmt::format(" [{}] {};", v.field, v.message);
    throw Error(ErrorKind::validation, message);
}

// ---------------------------------------------------------------------------
// Transitions

std::vector<double> transition_distribution(const FactoredMdp& model, StateIndex s, ActionIndex a) {
    const auto& m = model.structure;
    if (s >= m.state_count() || a >= m.action_count())
        throw Error(ErrorKind::range, fmt::format("(state {}, action {}) out of range", s, a));
    std::vector<double> joint{1.0};
    for (std::size_t i = 0; i < m.factors.size(); ++i) {
        const Identifier id = m.dependency(s, a, i);
        if (!model.marginals.has(i, id))
            throw Error(ErrorKind::validation, fmt::format("missing marginal row (factor {}, id {})", i, id));
        const auto row = model.marginals.row(i, id);
        if (row.size() != m.factors[i].domain_size)
            throw Error(ErrorKind::validation,
                        fmt::format("marginal row (factor {}, id {}) has the wrong length", i, id));
        std::vector<double> next(joint.size() * row.size());
        for (std::size_t x = 0; x < joint.size(); ++x)
            for (std::size_t y = 0; y < row.size(); ++y) next[x * row.size() + y] = joint[x] * row[y];
        joint = std::move(next);
    }
    return joint;
}

FlatMdp flatten(const FactoredMdp& model, std::size_t state_cap) {
    const auto& m = model.structure;
    const std::size_t states = m.codec().state_count();
    if (states > state_cap)
        throw Error(ErrorKind::size,
                    fmt::format("flattening requires {} states, cap is {}", states, state_cap));
    require_valid(model);

    FlatMdp flat;
    flat.state_count = states;
    flat.action_count = m.action_count();
    flat.rewards = m.rewards;
    flat.initial_state = m.initial_state;
    flat.objective = m.objective;
    flat.transitions.resize(states * flat.action_count);
    for (StateIndex s = 0; s < states; ++s)
        for (ActionIndex a = 0; a < flat.action_count; ++a) {
            const auto dist = transition_distribution(model, s, a);
            auto& row = flat.transitions[s * flat.action_count + a];
            for (StateIndex t = 0; t < states; ++t)
                if (dist[t] != 0.0) row.push_back({t, dist[t]});
        }
    return flat;
}

} // namespace rfmdp
