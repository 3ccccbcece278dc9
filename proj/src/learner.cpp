#include "rfmdp/learner.hpp"

#include "rfmdp/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace rfmdp {

// ---------------------------------------------------------------------------
// Supports and counts

SupportMap::SupportMap(std::size_t factors, std::size_t identifier_count)
    : identifier_count_(identifier_count), masks_(factors * identifier_count) {}

SupportMap SupportMap::of(const FactoredMdp& model) {
    const auto& m = model.marginals;
    SupportMap out(m.factor_count(), m.identifier_count());
    for (std::size_t i = 0; i < m.factor_count(); ++i)
        for (Identifier j = 0; j < m.identifier_count(); ++j) {
            if (!m.has(i, j)) continue;
            const auto row = m.row(i, j);
            std::vector<char> mask(row.size());
            for (std::size_t x = 0; x < row.size(); ++x) mask[x] = row[x] > 0.0;
            out.set(i, j, std::move(mask));
        }
    return out;
}

bool SupportMap::contains(std::size_t factor, Identifier id, std::size_t outcome) const {
    if (masks_.empty()) return true;
    const auto& mask = masks_.at(factor * identifier_count_ + id);
    return mask.empty() || (outcome < mask.size() && mask[outcome]);
}

std::vector<std::size_t> SupportMap::outcomes(std::size_t factor, Identifier id, std::size_t domain) const {
    std::vector<std::size_t> out;
    for (std::size_t x = 0; x < domain; ++x)
        if (contains(factor, id, x)) out.push_back(x);
    return out;
}

void SupportMap::set(std::size_t factor, Identifier id, std::vector<char> mask) {
    if (factor * identifier_count_ + id >= masks_.size())
        throw Error(ErrorKind::range, fmt::format("support entry ({}, {}) out of range", factor, id));
    masks_[factor * identifier_count_ + id] = std::move(mask);
}

TransitionCounts::TransitionCounts(const ModelStructure& structure, SupportMap support)
    : component_(structure.dependency.identifier_count(), 0), support_(std::move(support)) {
    const std::size_t ids = structure.dependency.identifier_count();
    std::size_t offset = 0;
    for (const auto& f : structure.factors) {
        domains_.push_back(f.domain_size);
        for (std::size_t j = 0; j < ids; ++j) {
            offsets_.push_back(offset);
            offset += f.domain_size;
        }
    }
    realisation_.assign(offset, 0);
}

void TransitionCounts::record(const ModelStructure& structure, std::span<const Transition> batch) {
    const auto& dep = structure.dependency;
    const auto codec = structure.codec();
    for (const auto& t : batch) {
        if (t.state >= dep.state_count() || t.next >= dep.state_count() || t.action >= dep.action_count())
            throw Error(ErrorKind::range, fmt::format("sample ({}, {}, {}) outside the model", t.state, t.action,
                                                      t.next));
        for (std::size_t i = 0; i < domains_.size(); ++i) {
            const Identifier j = dep(t.state, t.action, i);
            ++realisation_[offsets_[i * component_.size() + j] + codec.value(t.next, i)];
            ++component_[j];
        }
    }
}

Count TransitionCounts::realisation(std::size_t factor, Identifier id, std::size_t outcome) const {
    if (factor >= domains_.size() || id >= component_.size() || outcome >= domains_[factor])
        throw Error(ErrorKind::range, fmt::format("count index ({}, {}, {}) out of range", factor, id, outcome));
    return realisation_[offsets_[factor * component_.size() + id] + outcome];
}

Count TransitionCounts::pooled_realisation(Identifier id, std::size_t outcome) const {
    Count total = 0;
    for (std::size_t i = 0; i < domains_.size(); ++i)
        if (outcome < domains_[i]) total += realisation_[offsets_[i * component_.size() + id] + outcome];
    return total;
}

// ---------------------------------------------------------------------------
// Estimates and budgets

std::vector<std::pair<std::size_t, Identifier>> relevant_components(const ModelStructure& structure) {
    const auto& dep = structure.dependency;
    std::vector<char> seen(dep.factor_count() * dep.identifier_count(), 0);
    for (StateIndex s = 0; s < dep.state_count(); ++s)
        for (ActionIndex a = 0; a < dep.action_count(); ++a) {
            const auto ids = dep.identifiers(s, a);
            for (std::size_t i = 0; i < ids.size(); ++i) seen[i * dep.identifier_count() + ids[i]] = 1;
        }
    std::vector<std::pair<std::size_t, Identifier>> out;
    for (std::size_t k = 0; k < seen.size(); ++k)
        if (seen[k])
            out.emplace_back(k / dep.identifier_count(), static_cast<Identifier>(k % dep.identifier_count()));
    return out;
}

namespace {

// Pooled counts n(x, j) over the given outcomes.
std::vector<Count> support_counts(const TransitionCounts& counts, Identifier id,
                                  std::span<const std::size_t> outcomes) {
    std::vector<Count> out;
    out.reserve(outcomes.size());
    for (auto x : outcomes) out.push_back(counts.pooled_realisation(id, x));
    return out;
}

} // namespace

EmpiricalEstimates empirical_estimates(const TransitionCounts& counts, const ModelStructure& structure) {
    EmpiricalEstimates out;
    out.marginals = MarginalTable(structure.factors.size(), structure.dependency.identifier_count());
    for (auto [i, j] : relevant_components(structure)) {
        const Count n = counts.component(j);
        if (n == 0) {
            out.unobserved.emplace_back(i, j);
            continue;
        }
        std::vector<double> row(structure.factors[i].domain_size);
        for (std::size_t x = 0; x < row.size(); ++x)
            row[x] = static_cast<double>(counts.pooled_realisation(j, x)) / static_cast<double>(n);
        out.marginals.set(i, j, std::move(row));
    }
    return out;
}

std::string_view to_string(ConfidenceScheme scheme) { return scheme == ConfidenceScheme::box ? "box" : "l1"; }

ConfidenceScheme parse_scheme(std::string_view name) {
    if (name == "box" || name == "linf") return ConfidenceScheme::box;
    if (name == "l1") return ConfidenceScheme::l1;
    throw Error(ErrorKind::config, fmt::format("unknown scheme '{}' (expected box or l1)", name));
}

ConfidenceBudget split_confidence(double beta, const ModelStructure& structure, const SupportMap& support,
                                  ConfidenceScheme scheme) {
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorKind::domain, fmt::format("beta = {} not in (0, 1)", beta));
    const auto q = relevant_components(structure);
    if (q.empty()) throw Error(ErrorKind::domain, "the model has no relevant transition components");
    ConfidenceBudget b;
    b.beta = beta;
    b.scheme = scheme;
    b.relevant_components = q.size();
    for (auto [i, j] : q) b.unknown_probabilities += support.outcomes(i, j, structure.factors[i].domain_size).size();
    b.delta = scheme == ConfidenceScheme::box ? beta / static_cast<double>(b.unknown_probabilities)
                                              : beta / static_cast<double>(b.relevant_components);
    return b;
}

RfMdp build_learned_rfmdp(const TransitionCounts& counts, const ConfidenceBudget& budget,
                          const ModelStructure& structure) {
    if (counts.factor_count() != structure.factors.size() ||
        counts.identifier_count() != structure.dependency.identifier_count())
        throw Error(ErrorKind::domain, "counts were recorded for a different structure");
    RfMdp out{structure, UncertaintyTable(structure.factors.size(), structure.dependency.identifier_count())};
    for (auto [i, j] : relevant_components(structure)) {
        const std::size_t domain = structure.factors[i].domain_size;
        const auto outcomes = counts.support().outcomes(i, j, domain);
        if (outcomes.empty())
            throw Error(ErrorKind::validation, fmt::format("declared support of ({}, {}) is empty", i, j));
        const auto local = support_counts(counts, j, outcomes);
        Count n = 0;
        for (auto c : local) n += c;
        if (n != counts.component(j) && n != 0) {
            // Outcomes outside the declared support were observed: the support was wrong.
            throw Error(ErrorKind::validation, fmt::format("samples of ({}, {}) fall outside its declared support", i, j));
        }

        if (budget.scheme == ConfidenceScheme::box) {
            const auto compact = build_box_set(local, n, budget.delta);
            BoxSet box{std::vector<double>(domain, 0.0), std::vector<double>(domain, 0.0)};
            for (std::size_t k = 0; k < outcomes.size(); ++k) {
                box.lower[outcomes[k]] = outcomes.size() == 1 ? 1.0 : compact.lower[k];
                box.upper[outcomes[k]] = compact.upper[k];
            }
            out.uncertainty.set(i, j, std::move(box));
        } else {
            const auto compact = build_l1_set(local, n, budget.delta);
            L1Set ball;
            ball.nominal.assign(domain, 0.0);
            ball.support.assign(domain, 0);
            for (std::size_t k = 0; k < outcomes.size(); ++k) {
                ball.nominal[outcomes[k]] = compact.nominal[k];
                ball.support[outcomes[k]] = 1;
            }
            ball.radius = outcomes.size() == 1 ? 0.0 : compact.radius;
            out.uncertainty.set(i, j, std::move(ball));
        }
    }
    out.structure.metadata["learned"] = fmt::format("scheme={} beta={:.12g} delta={:.12g}", to_string(budget.scheme),
                                                    budget.beta, budget.delta);
    return out;
}

// ---------------------------------------------------------------------------
// Flat baseline

FlatCounts::FlatCounts(const FlatMdp& support_model) : actions_(support_model.action_count) {
    const std::size_t rows = support_model.transitions.size();
    support_.resize(rows);
    counts_.resize(rows);
    totals_.assign(rows, 0);
    for (std::size_t k = 0; k < rows; ++k) {
        for (const auto& e : support_model.transitions[k])
            if (e.probability > 0.0) support_[k].push_back(e.state);
        counts_[k].assign(support_[k].size(), 0);
    }
}

void FlatCounts::record(std::span<const Transition> batch) {
    for (const auto& t : batch) {
        const std::size_t k = t.state * actions_ + t.action;
        if (t.action >= actions_ || k >= support_.size())
            throw Error(ErrorKind::range, fmt::format("sample ({}, {}, {}) outside the model", t.state, t.action, t.next));
        const auto& succ = support_[k];
        const auto it = std::lower_bound(succ.begin(), succ.end(), t.next);
        if (it == succ.end() || *it != t.next)
            throw Error(ErrorKind::validation, fmt::format("successor {} of ({}, {}) is outside the declared support",
                                                           t.next, t.state, t.action));
        ++counts_[k][static_cast<std::size_t>(it - succ.begin())];
        ++totals_[k];
    }
}

std::size_t FlatCounts::unknown_probabilities() const {
    std::size_t u = 0;
    for (const auto& s : support_) u += s.size();
    return u;
}

FlatBoxRmdp build_learned_flat(const FlatCounts& counts, double beta, const FlatMdp& support_model) {
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorKind::domain, fmt::format("beta = {} not in (0, 1)", beta));
    const double delta = beta / static_cast<double>(counts.unknown_probabilities());
    FlatBoxRmdp out;
    out.state_count = support_model.state_count;
    out.action_count = support_model.action_count;
    out.rewards = support_model.rewards;
    out.initial_state = support_model.initial_state;
    out.objective = support_model.objective;
    out.rows.resize(support_model.transitions.size());
    for (StateIndex s = 0; s < out.state_count; ++s)
        for (ActionIndex a = 0; a < out.action_count; ++a) {
            auto& row = out.rows[s * out.action_count + a];
            const auto succ = counts.successors(s, a);
            row.support.assign(succ.begin(), succ.end());
            row.box = build_box_set(counts.row(s, a), counts.total(s, a), delta);
            if (succ.size() == 1) row.box.lower[0] = 1.0;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Sampling

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 trajectory_stream(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

StateIndex sample_successor(const FactoredMdp& model, StateIndex s, ActionIndex a, std::mt19937_64& rng) {
    const auto& st = model.structure;
    const auto ids = st.dependency.identifiers(s, a);
    std::vector<std::size_t> next(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto row = model.marginals.row(i, ids[i]);
        next[i] = std::discrete_distribution<std::size_t>(row.begin(), row.end())(rng);
    }
    return st.codec().encode(next);
}

// ---------------------------------------------------------------------------
// Learning loop

namespace {

void check_config(const LearningConfig& c) {
    if (!(c.beta > 0.0 && c.beta < 1.0)) throw Error(ErrorKind::config, fmt::format("beta = {} not in (0, 1)", c.beta));
    if (c.trajectory_length == 0) throw Error(ErrorKind::config, "trajectory length must be at least 1");
    if (c.checkpoint_interval == 0) throw Error(ErrorKind::config, "checkpoint interval must be at least 1");
    const bool l1_backend = c.backend == Backend::l1_radius_sum;
    if (l1_backend != (c.scheme == ConfidenceScheme::l1))
        throw Error(ErrorKind::config, fmt::format("backend {} does not match the {} scheme", to_string(c.backend),
                                                   to_string(c.scheme)));
}

// Synthesis on the current learned model, for either learner.
class Learner {
public:
    virtual ~Learner() = default;
    virtual void record(std::span<const Transition> batch) = 0;
    virtual std::span<const Count> trigger_counts() const = 0;
    virtual RobustSolution solve(const SolveOptions& options) const = 0;
    virtual std::vector<double> evaluate(const Policy& policy, const SolveOptions& options) const = 0;
    virtual ConfidenceBudget budget() const = 0;
};

class FactoredLearner final : public Learner {
public:
    FactoredLearner(const FactoredMdp& truth, const LearningConfig& config)
        : structure_(truth.structure), backend_(config.backend), counts_(truth.structure, SupportMap::of(truth)),
          budget_(split_confidence(config.beta, truth.structure, counts_.support(), config.scheme)) {}

    void record(std::span<const Transition> batch) override {
        counts_.record(structure_, batch);
        dirty_ = true;
    }
    std::span<const Count> trigger_counts() const override { return counts_.components(); }
    RobustSolution solve(const SolveOptions& options) const override {
        return solve_rfmdp(model(), backend_, options);
    }
    std::vector<double> evaluate(const Policy& policy, const SolveOptions& options) const override {
        return evaluate_policy_robust(model(), policy, backend_, options);
    }
    ConfidenceBudget budget() const override { return budget_; }

private:
    const RfMdp& model() const {
        if (dirty_) {
            model_ = build_learned_rfmdp(counts_, budget_, structure_);
            dirty_ = false;
        }
        return model_;
    }

    const ModelStructure& structure_;
    Backend backend_;
    TransitionCounts counts_;
    ConfidenceBudget budget_;
    mutable RfMdp model_;
    mutable bool dirty_ = true;
};

class FlatLearner final : public Learner {
public:
    FlatLearner(const FlatMdp& truth, double beta) : truth_(truth), beta_(beta), counts_(truth) {}

    void record(std::span<const Transition> batch) override {
        counts_.record(batch);
        dirty_ = true;
    }
    std::span<const Count> trigger_counts() const override { return counts_.totals(); }
    RobustSolution solve(const SolveOptions& options) const override { return solve_flat_rmdp(model(), options); }
    std::vector<double> evaluate(const Policy& policy, const SolveOptions& options) const override {
        return evaluate_policy_flat_rmdp(model(), policy, options);
    }
    ConfidenceBudget budget() const override {
        ConfidenceBudget b;
        b.beta = beta_;
        b.scheme = ConfidenceScheme::box;
        b.unknown_probabilities = counts_.unknown_probabilities();
        b.relevant_components = truth_.transitions.size();
        b.delta = beta_ / static_cast<double>(b.unknown_probabilities);
        return b;
    }

private:
    const FlatBoxRmdp& model() const {
        if (dirty_) {
            model_ = build_learned_flat(counts_, beta_, truth_);
            dirty_ = false;
        }
        return model_;
    }

    const FlatMdp& truth_;
    double beta_;
    FlatCounts counts_;
    mutable FlatBoxRmdp model_;
    mutable bool dirty_ = true;
};

} // namespace

LearningTrace learning_loop(const FactoredMdp& truth, const LearningConfig& config) {
    check_config(config);
    require_valid(truth);
    const auto start = std::chrono::steady_clock::now();
    const FlatMdp flat_truth = flatten(truth);
    const auto& st = truth.structure;
    const Direction direction = st.objective.direction;
    const bool maximize = direction == Direction::maximize;

    std::unique_ptr<Learner> learner;
    if (config.backend == Backend::flat)
        learner = std::make_unique<FlatLearner>(flat_truth, config.beta);
    else
        learner = std::make_unique<FactoredLearner>(truth, config);

    LearningTrace trace;
    trace.seed = config.seed;
    trace.config = config;
    trace.budget = learner->budget();
    trace.direction = direction;

    SolveOptions optimistic = config.solve;
    optimistic.environment = EnvDirection::best;
    optimistic.record_witnesses = false;
    SolveOptions pessimistic = config.solve;
    pessimistic.environment = EnvDirection::worst;
    pessimistic.record_witnesses = false;

    std::size_t recomputes = 0;
    std::vector<Count> snapshot(learner->trigger_counts().size(), 0);
    auto recompute = [&] {
        auto sol = learner->solve(optimistic);
        optimistic.warm_start = sol.values;
        ++recomputes;
        const auto counts = learner->trigger_counts();
        snapshot.assign(counts.begin(), counts.end());
        return sol.full_policy;
    };

    auto checkpoint = [&](std::size_t processed) {
        Checkpoint c;
        c.trajectories = processed;
        c.recomputes = recomputes;
        try {
            const auto sol = learner->solve(pessimistic);
            pessimistic.warm_start = sol.values;
            c.guarantee = learner->evaluate(sol.full_policy, pessimistic)[st.initial_state];
            c.nominal = evaluate_policy_flat(flat_truth, sol.full_policy)[st.initial_state];
        } catch (const Error& e) {
            // With too little data the worst-case model may never reach the target: no finite guarantee.
            if (e.kind() != ErrorKind::divergence) throw;
            pessimistic.warm_start.reset();
            c.guarantee = maximize ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
            c.nominal = std::numeric_limits<double>::quiet_NaN();
        }
        c.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        trace.checkpoints.push_back(c);
    };

    Policy policy = recompute();
    checkpoint(0);

    std::vector<Transition> batch;
    batch.reserve(config.trajectory_length);
    for (std::size_t k = 0; k < config.total_trajectories; ++k) {
        auto rng = trajectory_stream(config.seed, k);
        batch.clear();
        StateIndex s = st.initial_state;
        for (std::size_t t = 0; t < config.trajectory_length; ++t) {
            const ActionIndex a = policy.action(s, t);
            const StateIndex next = sample_successor(truth, s, a, rng);
            batch.push_back({s, a, next});
            s = next;
        }
        learner->record(batch);

        const auto counts = learner->trigger_counts();
        bool doubled = false;
        for (std::size_t j = 0; j < counts.size() && !doubled; ++j)
            doubled = counts[j] > 0 && counts[j] >= 2 * snapshot[j];
        if (doubled) policy = recompute();

        const std::size_t processed = k + 1;
        if (processed % config.checkpoint_interval == 0 || processed == config.total_trajectories)
            checkpoint(processed);
    }
    return trace;
}

PacReport pac_report(const LearningTrace& trace) {
    if (trace.checkpoints.empty()) throw Error(ErrorKind::domain, "empty learning trace");
    const bool maximize = trace.direction == Direction::maximize;
    PacReport r;
    for (const auto& c : trace.checkpoints) {
        const bool holds = std::isnan(c.nominal) || (maximize ? c.nominal >= c.guarantee - 1e-9
                                                              : c.nominal <= c.guarantee + 1e-9);
        r.rows.push_back({c.trajectories, c.guarantee, c.nominal, trace.budget.beta, holds});
        if (!holds) ++r.violations;
    }
    r.statement = fmt::format(
        "With probability at least {:.12g}, the true value of each learned policy is {} its guarantee in every "
        "state. Observed on the hidden model: {} violation(s) in {} checkpoint(s).",
        1.0 - trace.budget.beta, maximize ? "at least" : "at most", r.violations, r.rows.size());
    return r;
}

} // namespace rfmdp
