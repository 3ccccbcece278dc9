#pragma once

#include "rfmdp/inner.hpp"
#include "rfmdp/model.hpp"
#include "rfmdp/uncertainty.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace rfmdp {

enum class Backend { vertex, interval_arithmetic, mccormick, l1_radius_sum, flat };

std::string_view to_string(Backend backend);
/// Accepts the names printed by to_string; throws Error(config) otherwise.
Backend parse_backend(std::string_view name);

/// Whether the environment plays against (worst) or with (best) the agent.
enum class EnvDirection { worst, best };

/// Marginal uncertainty sets keyed by (factor, identifier).
class UncertaintyTable {
public:
    UncertaintyTable() = default;
    UncertaintyTable(std::size_t factors, std::size_t identifier_count);

    std::size_t factor_count() const noexcept { return factors_; }
    std::size_t identifier_count() const noexcept { return identifier_count_; }

    bool has(std::size_t factor, Identifier id) const;
    /// Throws a validation error when the set is missing.
    const MarginalSet& get(std::size_t factor, Identifier id) const;
    void set(std::size_t factor, Identifier id, MarginalSet set);

private:
    std::size_t index(std::size_t factor, Identifier id) const;

    std::size_t factors_ = 0;
    std::size_t identifier_count_ = 0;
    std::vector<std::optional<MarginalSet>> sets_;
};

/// Factored model whose marginals are only known to lie in their uncertainty sets.
struct RfMdp {
    ModelStructure structure;
    UncertaintyTable uncertainty;
};

ValidationReport validate_rfmdp(const RfMdp& model);
void require_valid(const RfMdp& model);

/// Flat robust MDP: one box over the listed successors per (s, a).
struct FlatBoxRmdp {
    struct Row {
        std::vector<StateIndex> support;  ///< successors that may receive mass
        BoxSet box;                       ///< over `support`
    };

    std::size_t state_count = 0;
    std::size_t action_count = 0;
    std::vector<Row> rows;  ///< indexed by s * action_count + a
    std::vector<double> rewards;
    StateIndex initial_state = 0;
    Objective objective;

    const Row& row(StateIndex s, ActionIndex a) const { return rows[s * action_count + a]; }
};

/// Deterministic policy; one stage for stationary objectives, `horizon` stages otherwise.
struct Policy {
    std::vector<std::vector<ActionIndex>> stages;

    ActionIndex action(StateIndex s, std::size_t stage = 0) const {
        return stages[stage < stages.size() ? stage : stages.size() - 1][s];
    }
    std::size_t stage_count() const noexcept { return stages.size(); }

    static Policy stationary(std::vector<ActionIndex> actions) { return Policy{{std::move(actions)}}; }
};

struct SolveOptions {
    double tolerance = 1e-6;
    std::size_t iteration_cap = 100'000;
    double divergence_threshold = 1e9;
    EnvDirection environment = EnvDirection::worst;
    bool record_witnesses = false;
    /// Initial value vector for iterative objectives (ignored for finite horizons).
    std::optional<std::vector<double>> warm_start;
    McCormickOptions mccormick;
    std::size_t product_vertex_cap = default_product_vertex_cap;
    /// 0 = read RFMDP_THREADS (default 1).
    std::size_t threads = 0;
};

struct RobustSolution {
    std::vector<double> values;  ///< at the first stage for finite horizons
    std::vector<ActionIndex> policy;  ///< first-stage actions
    Policy full_policy;
    std::vector<std::vector<double>> witnesses;  ///< per state, for the chosen action (if recorded)
    std::string method;
    std::size_t iterations = 0;
    double residual = 0.0;

    double initial_value(StateIndex initial_state) const { return values.at(initial_state); }
};

struct BackupResult {
    std::vector<double> values;
    std::vector<ActionIndex> actions;
    std::vector<std::vector<double>> witnesses;  ///< joint successor distribution per state
};

/// One robust Bellman sweep over every state (terminal states keep their fixed value).
BackupResult robust_bellman_backup(const RfMdp& model, std::span<const double> values, Backend backend,
                                   EnvDirection environment = EnvDirection::worst,
                                   const SolveOptions& options = {});

/// Robust value iteration / backward induction.
RobustSolution solve_rfmdp(const RfMdp& model, Backend backend, const SolveOptions& options = {});

/// Fixed-policy robust evaluation: the environment still optimises, the agent does not.
std::vector<double> evaluate_policy_robust(const RfMdp& model, const Policy& policy, Backend backend,
                                           const SolveOptions& options = {});

RobustSolution solve_flat_rmdp(const FlatBoxRmdp& model, const SolveOptions& options = {});
std::vector<double> evaluate_policy_flat_rmdp(const FlatBoxRmdp& model, const Policy& policy,
                                              const SolveOptions& options = {});

/// Classical value iteration on an explicit MDP.
RobustSolution solve_nominal(const FlatMdp& model, const SolveOptions& options = {});
std::vector<double> evaluate_policy_flat(const FlatMdp& model, const Policy& policy, double tolerance = 1e-8);
/// Classical policy evaluation on the concrete factored model.
std::vector<double> evaluate_policy_nominal(const FactoredMdp& model, const Policy& policy, double tolerance = 1e-8);

/// Inner sense that realises `environment` for an agent optimising in `direction`.
InnerSense inner_sense(Direction direction, EnvDirection environment);

} // namespace rfmdp
