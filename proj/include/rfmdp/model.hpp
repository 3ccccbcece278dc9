#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rfmdp {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;
using Identifier = std::uint32_t;

/// One state variable with values 0..domain_size-1.
struct Factor {
    std::string name;
    std::size_t domain_size = 1;
};

/**
 * Big-endian mixed-radix encoding of factor assignments.
 *
 * index = sum_i x_i * prod_{k>i} domain_size_k, so the first factor is the
 * outermost (slowest varying) coordinate. This matches the Kronecker ordering
 * used for joint distributions everywhere else in the library.
 */
class StateCodec {
public:
    explicit StateCodec(const std::vector<Factor>& factors);

    std::size_t state_count() const noexcept { return state_count_; }
    std::size_t factor_count() const noexcept { return sizes_.size(); }
    std::size_t domain_size(std::size_t factor) const { return sizes_.at(factor); }
    std::size_t stride(std::size_t factor) const { return strides_.at(factor); }

    StateIndex encode(std::span<const std::size_t> assignment) const;
    std::vector<std::size_t> decode(StateIndex index) const;

    /// Value of a single factor in state `index`; no range check on `index`.
    std::size_t value(StateIndex index, std::size_t factor) const noexcept {
        return (index / strides_[factor]) % sizes_[factor];
    }

private:
    std::vector<std::string> names_;
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> strides_;
    std::size_t state_count_ = 1;
};

/// Total dense table (state, action, factor) -> dependency identifier.
class DependencyFunction {
public:
    static constexpr Identifier unset = std::numeric_limits<Identifier>::max();

    DependencyFunction() = default;
    DependencyFunction(std::size_t states, std::size_t actions, std::size_t factors,
                       std::size_t identifier_count);

    std::size_t state_count() const noexcept { return states_; }
    std::size_t action_count() const noexcept { return actions_; }
    std::size_t factor_count() const noexcept { return factors_; }
    std::size_t identifier_count() const noexcept { return identifier_count_; }

    Identifier operator()(StateIndex s, ActionIndex a, std::size_t factor) const {
        return table_[offset(s, a) + factor];
    }
    /// Identifiers of all factors for (s, a), in factor order.
    std::span<const Identifier> identifiers(StateIndex s, ActionIndex a) const {
        return {table_.data() + offset(s, a), factors_};
    }
    void set(StateIndex s, ActionIndex a, std::size_t factor, Identifier id);

private:
    std::size_t offset(StateIndex s, ActionIndex a) const noexcept {
        return (s * actions_ + a) * factors_;
    }

    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::size_t factors_ = 0;
    std::size_t identifier_count_ = 0;
    std::vector<Identifier> table_;
};

/// Marginal distributions P(. | j) keyed by (factor, identifier).
class MarginalTable {
public:
    MarginalTable() = default;
    MarginalTable(std::size_t factors, std::size_t identifier_count);

    std::size_t factor_count() const noexcept { return factors_; }
    std::size_t identifier_count() const noexcept { return identifier_count_; }

    bool has(std::size_t factor, Identifier id) const;
    /// Throws a validation error when the row is missing.
    std::span<const double> row(std::size_t factor, Identifier id) const;
    void set(std::size_t factor, Identifier id, std::vector<double> probs);

private:
    std::size_t index(std::size_t factor, Identifier id) const;

    std::size_t factors_ = 0;
    std::size_t identifier_count_ = 0;
    std::vector<std::vector<double>> rows_;
};

enum class ObjectiveKind { discounted_reward, finite_horizon_reward, reachability, expected_steps };
enum class Direction { maximize, minimize };

/**
 * What the agent optimises. Reachability and expected-steps objectives are
 * solved as undiscounted totals with absorbing terminal states: targets are
 * worth 1 (reachability) or 0 (expected steps), avoid states are worth
 * `avoid_value`. Expected-steps charges r(s,a) per step, so generators set the
 * reward to 1 for a pure step count.
 */
struct Objective {
    ObjectiveKind kind = ObjectiveKind::discounted_reward;
    Direction direction = Direction::maximize;
    std::optional<double> discount;
    std::optional<std::size_t> horizon;
    std::vector<StateIndex> targets;
    std::vector<StateIndex> avoid;
    double avoid_value = 0.0;

    static Objective discounted(double discount, Direction direction = Direction::maximize);
    static Objective finite_horizon(std::size_t horizon, Direction direction = Direction::maximize);
    static Objective reachability(std::vector<StateIndex> targets, std::vector<StateIndex> avoid = {});
    static Objective expected_steps(std::vector<StateIndex> targets, std::vector<StateIndex> avoid = {},
                                    double avoid_value = 0.0);
};

std::string_view to_string(ObjectiveKind kind);
std::string_view to_string(Direction direction);

/// Everything about a factored model except the marginal distributions.
struct ModelStructure {
    std::vector<Factor> factors;
    std::vector<std::string> actions;
    DependencyFunction dependency;
    std::vector<double> rewards;  ///< row-major, state x action
    StateIndex initial_state = 0;
    Objective objective;
    std::map<std::string, std::string> metadata;

    StateCodec codec() const { return StateCodec(factors); }
    std::size_t state_count() const { return dependency.state_count(); }
    std::size_t action_count() const { return actions.size(); }
    double reward(StateIndex s, ActionIndex a) const { return rewards[s * actions.size() + a]; }
};

struct FactoredMdp {
    ModelStructure structure;
    MarginalTable marginals;
};

struct Violation {
    std::string field;
    std::string message;
};
using ValidationReport = std::vector<Violation>;

/// Checks the structural invariants shared by nominal and robust models.
ValidationReport validate_structure(const ModelStructure& structure);
/// Structure checks plus completeness and normalisation of the marginals.
ValidationReport validate_fmdp(const FactoredMdp& model);
/// Throws Error(validation) listing the violations, if any.
void require_valid(const FactoredMdp& model);

/// T(. | s, a) over all states: product of the factor marginals.
std::vector<double> transition_distribution(const FactoredMdp& model, StateIndex s, ActionIndex a);

/// Explicit (non-factored) MDP with sparse transition rows.
struct FlatMdp {
    struct Entry {
        StateIndex state;
        double probability;
    };

    std::size_t state_count = 0;
    std::size_t action_count = 0;
    std::vector<std::vector<Entry>> transitions;  ///< indexed by s * action_count + a
    std::vector<double> rewards;
    StateIndex initial_state = 0;
    Objective objective;

    std::span<const Entry> row(StateIndex s, ActionIndex a) const {
        return transitions[s * action_count + a];
    }
    double reward(StateIndex s, ActionIndex a) const { return rewards[s * action_count + a]; }
};

inline constexpr std::size_t default_flatten_cap = 1'000'000;

FlatMdp flatten(const FactoredMdp& model, std::size_t state_cap = default_flatten_cap);

} // namespace rfmdp
