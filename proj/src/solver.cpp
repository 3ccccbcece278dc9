#include "rfmdp/solver.hpp"

#include "rfmdp/distribution.hpp"
#include "rfmdp/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include <fmt/format.h>

namespace rfmdp {

std::string_view to_string(Backend backend) {
    switch (backend) {
    case Backend::vertex: return "vertex";
    case Backend::interval_arithmetic: return "interval-arithmetic";
    case Backend::mccormick: return "mccormick";
    case Backend::l1_radius_sum: return "l1-radius-sum";
    case Backend::flat: return "flat";
    }
    return "unknown";
}

Backend parse_backend(std::string_view name) {
    for (auto b : {Backend::vertex, Backend::interval_arithmetic, Backend::mccormick, Backend::l1_radius_sum,
                   Backend::flat})
        if (name == to_string(b)) return b;
    throw Error(ErrorKind::config, fmt::format("unknown backend '{}' (expected vertex, interval-arithmetic, "
                                               "mccormick, l1-radius-sum or flat)",
                                               name));
}

InnerSense inner_sense(Direction direction, EnvDirection environment) {
    const bool adversarial = environment == EnvDirection::worst;
    const bool maximizing = direction == Direction::maximize;
    return adversarial == maximizing ? InnerSense::worst : InnerSense::best;
}

// ---------------------------------------------------------------------------
// UncertaintyTable / validation

UncertaintyTable::UncertaintyTable(std::size_t factors, std::size_t identifier_count)
    : factors_(factors), identifier_count_(identifier_count), sets_(factors * identifier_count) {}

std::size_t UncertaintyTable::index(std::size_t factor, Identifier id) const {
    if (factor >= factors_ || id >= identifier_count_)
        throw Error(ErrorKind::range, fmt::format("uncertainty entry (factor {}, id {}) out of range", factor, id));
    return factor * identifier_count_ + id;
}

bool UncertaintyTable::has(std::size_t factor, Identifier id) const { return sets_[index(factor, id)].has_value(); }

const MarginalSet& UncertaintyTable::get(std::size_t factor, Identifier id) const {
    const auto& s = sets_[index(factor, id)];
    if (!s) throw Error(ErrorKind::validation, fmt::format("missing uncertainty set (factor {}, id {})", factor, id));
    return *s;
}

void UncertaintyTable::set(std::size_t factor, Identifier id, MarginalSet set) {
    sets_[index(factor, id)] = std::move(set);
}

namespace {

std::string describe_set_problem(const MarginalSet& set, std::size_t domain) {
    if (dimension(set) != domain) return fmt::format("dimension {} but domain size {}", dimension(set), domain);
    if (const auto* box = std::get_if<BoxSet>(&set)) {
        if (!box->well_formed()) return "box is malformed or misses the simplex";
    } else if (const auto* ball = std::get_if<L1Set>(&set)) {
        if (!(ball->radius >= 0.0)) return "negative radius";
        if (!ball->support.empty() && ball->support.size() != domain) return "support mask has the wrong length";
        double total = 0.0;
        for (std::size_t i = 0; i < domain; ++i) {
            if (ball->nominal[i] < 0.0) return "nominal has a negative entry";
            if (!ball->supported(i) && ball->nominal[i] > 0.0) return "nominal puts mass outside the support";
            total += ball->nominal[i];
        }
        if (std::abs(total - 1.0) > 1e-12) return fmt::format("nominal sums to {:.12g}", total);
    } else {
        const auto& poly = std::get<VertexPolytope>(set);
        if (poly.vertices.empty()) return "vertex polytope has no vertices";
        for (const auto& v : poly.vertices)
            if (v.size() != domain || std::abs(sum(v) - 1.0) > 1e-12) return "vertex is not a distribution";
    }
    return {};
}

} // namespace

ValidationReport validate_rfmdp(const RfMdp& model) {
    ValidationReport report = validate_structure(model.structure);
    if (!report.empty()) return report;
    const auto& m = model.structure;
    const auto& dep = m.dependency;
    if (model.uncertainty.factor_count() != m.factors.size() ||
        model.uncertainty.identifier_count() != dep.identifier_count()) {
        report.push_back({"uncertainty", "uncertainty table shape does not match factors x identifier_count"});
        return report;
    }
    std::vector<char> checked(m.factors.size() * dep.identifier_count(), 0);
    for (StateIndex s = 0; s < m.state_count(); ++s)
        for (ActionIndex a = 0; a < m.action_count(); ++a)
            for (std::size_t i = 0; i < m.factors.size(); ++i) {
                const Identifier j = dep(s, a, i);
                auto& seen = checked[i * dep.identifier_count() + j];
                if (seen) continue;
                seen = 1;
                if (!model.uncertainty.has(i, j)) {
                    report.push_back({"uncertainty", fmt::format("missing set for reachable (factor {}, id {})", i, j)});
                    continue;
                }
                const auto problem = describe_set_problem(model.uncertainty.get(i, j), m.factors[i].domain_size);
                if (!problem.empty())
                    report.push_back({"uncertainty", fmt::format("set (factor {}, id {}): {}", i, j, problem)});
            }
    return report;
}

void require_valid(const RfMdp& model) {
    const auto report = validate_rfmdp(model);
    if (report.empty()) return;
    std::string message = "invalid rf-MDP:";
    for (const auto& v : report) message += fmt::format(" [{}] {};", v.field, v.message);
    throw Error(ErrorKind::validation, message);
}

// ---------------------------------------------------------------------------
// Dynamic programming core

namespace {

class Dynamics {
public:
    virtual ~Dynamics() = default;
    virtual double expectation(StateIndex s, ActionIndex a, std::span<const double> values, InnerSense sense,
                               std::vector<double>* witness) const = 0;
};

struct DpProblem {
    std::size_t states = 0;
    std::size_t actions = 0;
    std::span<const double> rewards;
    const Objective* objective = nullptr;
    const Dynamics* dynamics = nullptr;
    std::string method;
};

std::size_t thread_count(const SolveOptions& options) {
    if (options.threads > 0) return options.threads;
    if (const char* env = std::getenv("RFMDP_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    return 1;
}

template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body body) {
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < count; i += threads) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

class DynamicProgram {
public:
    DynamicProgram(const DpProblem& problem, const SolveOptions& options, InnerSense sense)
        : p_(problem), opt_(options), sense_(sense), threads_(thread_count(options)) {
        const auto& o = *p_.objective;
        fixed_.assign(p_.states, std::nullopt);
        if (o.kind == ObjectiveKind::reachability) {
            for (auto t : o.avoid) fixed_[t] = 0.0;
            for (auto t : o.targets) fixed_[t] = 1.0;
        } else if (o.kind == ObjectiveKind::expected_steps) {
            for (auto t : o.avoid) fixed_[t] = o.avoid_value;
            for (auto t : o.targets) fixed_[t] = 0.0;
        }
        gamma_ = o.kind == ObjectiveKind::discounted_reward ? *o.discount : 1.0;
        maximize_ = o.direction == Direction::maximize;
    }

    /// One sweep; `policy` fixes the action per state when given.
    void sweep(std::span<const double> in, std::vector<double>& out, std::vector<ActionIndex>& actions,
               const std::vector<ActionIndex>* policy, std::vector<std::vector<double>>* witnesses) const {
        out.resize(p_.states);
        actions.assign(p_.states, 0);
        if (witnesses) witnesses->assign(p_.states, {});
        parallel_for(p_.states, threads_, [&](std::size_t s) {
            if (fixed_[s]) {
                out[s] = *fixed_[s];
                return;
            }
            double best = 0.0;
            bool found = false;
            std::vector<double> witness, best_witness;
            auto consider = [&](ActionIndex a) {
                const double e = p_.dynamics->expectation(s, a, in, sense_, witnesses ? &witness : nullptr);
                const double q = reward(s, a) + gamma_ * e;
                if (!found || (maximize_ ? q > best : q < best)) {
                    best = q;
                    actions[s] = a;
                    found = true;
                    if (witnesses) best_witness = witness;
                }
            };
            if (policy) {
                const ActionIndex a = (*policy)[s];
                if (a >= p_.actions) throw Error(ErrorKind::range, fmt::format("policy action {} out of range", a));
                consider(a);
            } else {
                for (ActionIndex a = 0; a < p_.actions; ++a) consider(a);
            }
            out[s] = best;
            if (witnesses) (*witnesses)[s] = std::move(best_witness);
        });
    }

    RobustSolution run(const Policy* policy) const {
        if (policy && policy->stages.empty()) throw Error(ErrorKind::domain, "policy has no stages");
        if (policy)
            for (const auto& stage : policy->stages)
                if (stage.size() != p_.states)
                    throw Error(ErrorKind::domain, fmt::format("policy covers {} states, model has {}", stage.size(),
                                                               p_.states));
        auto wit = [&](RobustSolution& sol) -> std::vector<std::vector<double>>* {
            return opt_.record_witnesses ? &sol.witnesses : nullptr;
        };
        RobustSolution sol;
        sol.method = p_.method;
        const auto& o = *p_.objective;

        if (o.kind == ObjectiveKind::finite_horizon_reward) {
            const std::size_t horizon = *o.horizon;
            std::vector<double> next(p_.states, 0.0), current;
            sol.full_policy.stages.assign(horizon, {});
            for (std::size_t t = horizon; t-- > 0;) {
                const std::vector<ActionIndex>* fixed_actions =
                    policy ? &policy->stages[std::min(t, policy->stages.size() - 1)] : nullptr;
                sweep(next, current, sol.full_policy.stages[t], fixed_actions, t == 0 ? wit(sol) : nullptr);
                std::swap(next, current);
            }
            sol.values = std::move(next);
            sol.policy = sol.full_policy.stages.front();
            sol.iterations = horizon;
            sol.residual = 0.0;
            return sol;
        }

        std::vector<double> v(p_.states, 0.0), next;
        if (opt_.warm_start) {
            if (opt_.warm_start->size() != p_.states)
                throw Error(ErrorKind::domain, "warm start has the wrong length");
            v = *opt_.warm_start;
        }
        for (std::size_t s = 0; s < p_.states; ++s)
            if (fixed_[s]) v[s] = *fixed_[s];
        std::vector<ActionIndex> actions;
        const std::vector<ActionIndex>* fixed_actions = policy ? &policy->stages.front() : nullptr;
        for (std::size_t iter = 1;; ++iter) {
            sweep(v, next, actions, fixed_actions, wit(sol));
            double residual = 0.0, largest = 0.0;
            for (std::size_t s = 0; s < p_.states; ++s) {
                residual = std::max(residual, std::abs(next[s] - v[s]));
                largest = std::max(largest, std::abs(next[s]));
            }
            std::swap(v, next);
            sol.iterations = iter;
            sol.residual = residual;
            if (!(largest <= opt_.divergence_threshold))
                throw Error(ErrorKind::divergence,
                            fmt::format("values exceeded {:.3g} after {} sweeps; under the {} model the target "
                                        "may be unreachable",
                                        opt_.divergence_threshold, iter,
                                        opt_.environment == EnvDirection::worst ? "worst-case" : "best-case"));
            if (residual < opt_.tolerance) break;
            if (iter >= opt_.iteration_cap)
                throw Error(ErrorKind::solver, fmt::format("value iteration hit the cap of {} sweeps (residual {:.3g})",
                                                           opt_.iteration_cap, residual));
        }
        sol.values = std::move(v);
        sol.policy = actions;
        sol.full_policy = Policy::stationary(std::move(actions));
        return sol;
    }

private:
    double reward(StateIndex s, ActionIndex a) const {
        if (p_.objective->kind == ObjectiveKind::reachability) return 0.0;
        return p_.rewards[s * p_.actions + a];
    }

    DpProblem p_;
    const SolveOptions& opt_;
    InnerSense sense_;
    std::size_t threads_;
    std::vector<std::optional<double>> fixed_;
    double gamma_ = 1.0;
    bool maximize_ = true;
};

// ---------------------------------------------------------------------------
// Factored robust dynamics

// Dense tableau entries kept for warm starts across sweeps (about 200 MB).
constexpr std::size_t lp_cache_budget = std::size_t{24} << 20;

class FactoredDynamics final : public Dynamics {
public:
    FactoredDynamics(const RfMdp& model, Backend backend, const SolveOptions& options)
        : model_(model), backend_(backend), options_(options) {
        require_valid(model);
        const auto& m = model.structure;
        const auto& dep = m.dependency;
        if (backend == Backend::flat)
            throw Error(ErrorKind::config, "the flat backend runs on a flat box r-MDP, not on a factored model");
        if (backend == Backend::vertex) vertices_.resize(m.factors.size() * dep.identifier_count());
        if (backend == Backend::mccormick) lp_cache_.resize(m.state_count() * m.action_count());

        std::vector<char> seen(m.factors.size() * dep.identifier_count(), 0);
        for (StateIndex s = 0; s < m.state_count(); ++s)
            for (ActionIndex a = 0; a < m.action_count(); ++a)
                for (std::size_t i = 0; i < m.factors.size(); ++i) {
                    const Identifier j = dep(s, a, i);
                    const std::size_t key = i * dep.identifier_count() + j;
                    if (seen[key]) continue;
                    seen[key] = 1;
                    const auto& set = model.uncertainty.get(i, j);
                    check_kind(set, i, j);
                    if (backend == Backend::vertex && i + 1 < m.factors.size()) {
                        if (const auto* box = std::get_if<BoxSet>(&set))
                            vertices_[key] = enumerate_box_vertices(*box);
                        else
                            vertices_[key] = set;
                    }
                }
    }

    double expectation(StateIndex s, ActionIndex a, std::span<const double> values, InnerSense sense,
                       std::vector<double>* witness) const override {
        const auto& m = model_.structure;
        const auto ids = m.dependency.identifiers(s, a);
        const std::size_t n = ids.size();
        InnerResult r;
        switch (backend_) {
        case Backend::vertex: {
            InnerProblem problem;
            problem.values = values;
            problem.sense = sense;
            for (std::size_t i = 0; i + 1 < n; ++i)
                problem.marginals.push_back(&vertices_[i * m.dependency.identifier_count() + ids[i]]);
            problem.marginals.push_back(&model_.uncertainty.get(n - 1, ids[n - 1]));
            r = worst_case_vertex_product(problem, options_.product_vertex_cap);
            break;
        }
        case Backend::interval_arithmetic: {
            std::vector<const BoxSet*> boxes(n);
            for (std::size_t i = 0; i < n; ++i) boxes[i] = &std::get<BoxSet>(model_.uncertainty.get(i, ids[i]));
            r = worst_case_box_greedy(interval_arithmetic_product(boxes), values, sense);
            break;
        }
        case Backend::mccormick: {
            if (n == 1) {
                r = worst_case_box_greedy(std::get<BoxSet>(model_.uncertainty.get(0, ids[0])), values, sense);
                break;
            }
            r = mccormick(s, a, ids, values, sense);
            break;
        }
        case Backend::l1_radius_sum: {
            if (n == 1) {
                r = worst_case_l1(std::get<L1Set>(model_.uncertainty.get(0, ids[0])), values, sense);
                break;
            }
            std::vector<L1Set> balls;
            balls.reserve(n);
            for (std::size_t i = 0; i < n; ++i) balls.push_back(std::get<L1Set>(model_.uncertainty.get(i, ids[i])));
            r = worst_case_l1(compose_l1_radius_sum(balls), values, sense);
            break;
        }
        case Backend::flat: break;
        }
        if (witness) *witness = std::move(r.witness);
        return r.value;
    }

private:
    // One warm-started LP per (s, a); each entry is only touched by the thread backing up state s.
    InnerResult mccormick(StateIndex s, ActionIndex a, std::span<const Identifier> ids, std::span<const double> values,
                          InnerSense sense) const {
        std::vector<const BoxSet*> boxes(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) boxes[i] = &std::get<BoxSet>(model_.uncertainty.get(i, ids[i]));
        auto& slot = lp_cache_[s * model_.structure.action_count() + a];
        if (slot) return slot->solve(values, sense);
        auto solver = std::make_unique<McCormickSolver>(boxes, options_.mccormick);
        auto result = solver->solve(values, sense);
        const std::size_t entries = solver->tableau_entries();
        if (cached_entries_.fetch_add(entries) + entries <= lp_cache_budget)
            slot = std::move(solver);
        else
            cached_entries_.fetch_sub(entries);
        return result;
    }

    void check_kind(const MarginalSet& set, std::size_t factor, Identifier id) const {
        const bool box = std::holds_alternative<BoxSet>(set);
        const bool ball = std::holds_alternative<L1Set>(set);
        const bool poly = std::holds_alternative<VertexPolytope>(set);
        bool ok = false;
        switch (backend_) {
        case Backend::vertex: ok = box || poly; break;
        case Backend::interval_arithmetic:
        case Backend::mccormick: ok = box; break;
        case Backend::l1_radius_sum: ok = ball && std::get<L1Set>(set).norm_p == 1.0; break;
        case Backend::flat: break;
        }
        if (!ok)
            throw Error(ErrorKind::config,
                        fmt::format("backend {} cannot use the {} set at (factor {}, id {})", to_string(backend_),
                                    box ? "box" : ball ? "L_p ball" : "vertex-polytope", factor, id));
    }

    const RfMdp& model_;
    Backend backend_;
    const SolveOptions& options_;
    std::vector<MarginalSet> vertices_;
    mutable std::vector<std::unique_ptr<McCormickSolver>> lp_cache_;
    mutable std::atomic<std::size_t> cached_entries_{0};
};

class FlatBoxDynamics final : public Dynamics {
public:
    explicit FlatBoxDynamics(const FlatBoxRmdp& model) : model_(model) {
        if (model.rows.size() != model.state_count * model.action_count)
            throw Error(ErrorKind::validation, "flat r-MDP has the wrong number of rows");
        for (const auto& row : model.rows) {
            if (row.support.size() != row.box.dimension())
                throw Error(ErrorKind::validation, "flat r-MDP row support and box differ in size");
            if (!row.box.well_formed()) throw Error(ErrorKind::infeasible, "flat r-MDP row box misses the simplex");
        }
    }

    double expectation(StateIndex s, ActionIndex a, std::span<const double> values, InnerSense sense,
                       std::vector<double>* witness) const override {
        const auto& row = model_.row(s, a);
        std::vector<double> local(row.support.size());
        for (std::size_t k = 0; k < local.size(); ++k) local[k] = values[row.support[k]];
        const auto r = worst_case_box_greedy(row.box, local, sense);
        if (witness) {
            witness->assign(model_.state_count, 0.0);
            for (std::size_t k = 0; k < local.size(); ++k) (*witness)[row.support[k]] += r.witness[k];
        }
        return r.value;
    }

private:
    const FlatBoxRmdp& model_;
};

class NominalDynamics final : public Dynamics {
public:
    explicit NominalDynamics(const FlatMdp& model) : model_(model) {}

    double expectation(StateIndex s, ActionIndex a, std::span<const double> values, InnerSense,
                       std::vector<double>* witness) const override {
        double e = 0.0;
        for (const auto& entry : model_.row(s, a)) e += entry.probability * values[entry.state];
        if (witness) {
            witness->assign(model_.state_count, 0.0);
            for (const auto& entry : model_.row(s, a)) (*witness)[entry.state] += entry.probability;
        }
        return e;
    }

private:
    const FlatMdp& model_;
};

DpProblem factored_problem(const RfMdp& model, const Dynamics& dyn, Backend backend) {
    const auto& m = model.structure;
    return {m.state_count(), m.action_count(), m.rewards, &m.objective, &dyn, std::string(to_string(backend))};
}

} // namespace

BackupResult robust_bellman_backup(const RfMdp& model, std::span<const double> values, Backend backend,
                                   EnvDirection environment, const SolveOptions& options) {
    if (values.size() != model.structure.state_count())
        throw Error(ErrorKind::domain, "value vector length does not match the state count");
    const FactoredDynamics dyn(model, backend, options);
    const auto problem = factored_problem(model, dyn, backend);
    const DynamicProgram dp(problem, options, inner_sense(model.structure.objective.direction, environment));
    BackupResult out;
    dp.sweep(values, out.values, out.actions, nullptr, &out.witnesses);
    return out;
}

RobustSolution solve_rfmdp(const RfMdp& model, Backend backend, const SolveOptions& options) {
    const FactoredDynamics dyn(model, backend, options);
    const auto problem = factored_problem(model, dyn, backend);
    const DynamicProgram dp(problem, options, inner_sense(model.structure.objective.direction, options.environment));
    return dp.run(nullptr);
}

std::vector<double> evaluate_policy_robust(const RfMdp& model, const Policy& policy, Backend backend,
                                           const SolveOptions& options) {
    const FactoredDynamics dyn(model, backend, options);
    const auto problem = factored_problem(model, dyn, backend);
    const DynamicProgram dp(problem, options, inner_sense(model.structure.objective.direction, options.environment));
    return dp.run(&policy).values;
}

namespace {

DpProblem flat_box_problem(const FlatBoxRmdp& model, const Dynamics& dyn) {
    return {model.state_count, model.action_count, model.rewards, &model.objective, &dyn, "flat"};
}

} // namespace

RobustSolution solve_flat_rmdp(const FlatBoxRmdp& model, const SolveOptions& options) {
    const FlatBoxDynamics dyn(model);
    const DynamicProgram dp(flat_box_problem(model, dyn), options,
                            inner_sense(model.objective.direction, options.environment));
    return dp.run(nullptr);
}

std::vector<double> evaluate_policy_flat_rmdp(const FlatBoxRmdp& model, const Policy& policy,
                                              const SolveOptions& options) {
    const FlatBoxDynamics dyn(model);
    const DynamicProgram dp(flat_box_problem(model, dyn), options,
                            inner_sense(model.objective.direction, options.environment));
    return dp.run(&policy).values;
}

RobustSolution solve_nominal(const FlatMdp& model, const SolveOptions& options) {
    const NominalDynamics dyn(model);
    const DpProblem problem{model.state_count, model.action_count, model.rewards, &model.objective, &dyn, "nominal"};
    const DynamicProgram dp(problem, options, InnerSense::worst);
    return dp.run(nullptr);
}

std::vector<double> evaluate_policy_flat(const FlatMdp& model, const Policy& policy, double tolerance) {
    SolveOptions options;
    options.tolerance = tolerance;
    const NominalDynamics dyn(model);
    const DpProblem problem{model.state_count, model.action_count, model.rewards, &model.objective, &dyn, "nominal"};
    const DynamicProgram dp(problem, options, InnerSense::worst);
    return dp.run(&policy).values;
}

std::vector<double> evaluate_policy_nominal(const FactoredMdp& model, const Policy& policy, double tolerance) {
    return evaluate_policy_flat(flatten(model), policy, tolerance);
}

} // namespace rfmdp
