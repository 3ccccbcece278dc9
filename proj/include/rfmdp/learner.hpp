#pragma once

#include "rfmdp/model.hpp"
#include "rfmdp/solver.hpp"
#include "rfmdp/uncertainty.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rfmdp {

struct Transition {
    StateIndex state;
    ActionIndex action;
    StateIndex next;
};

/// Outcomes each marginal may take, per (factor, identifier); an empty mask means the whole domain.
class SupportMap {
public:
    SupportMap() = default;
    SupportMap(std::size_t factors, std::size_t identifier_count);

    /// Nonzero pattern of every marginal row of `model`.
    static SupportMap of(const FactoredMdp& model);

    bool contains(std::size_t factor, Identifier id, std::size_t outcome) const;
    /// Supported outcomes in increasing order (`domain` is used for empty masks).
    std::vector<std::size_t> outcomes(std::size_t factor, Identifier id, std::size_t domain) const;
    void set(std::size_t factor, Identifier id, std::vector<char> mask);

private:
    std::size_t identifier_count_ = 0;
    std::vector<std::vector<char>> masks_;
};

/// Realisation counts n(x_i, j) and component counts n(j).
class TransitionCounts {
public:
    TransitionCounts() = default;
    TransitionCounts(const ModelStructure& structure, SupportMap support);

    /// Adds every sample; n(j) grows once per factor whose dependency is j.
    void record(const ModelStructure& structure, std::span<const Transition> batch);

    Count realisation(std::size_t factor, Identifier id, std::size_t outcome) const;
    /// n(x, j) summed over the factors with identifier j.
    Count pooled_realisation(Identifier id, std::size_t outcome) const;
    Count component(Identifier id) const { return component_.at(id); }
    std::span<const Count> components() const noexcept { return component_; }
    const SupportMap& support() const noexcept { return support_; }
    std::size_t factor_count() const noexcept { return domains_.size(); }
    std::size_t identifier_count() const noexcept { return component_.size(); }

private:
    std::vector<std::size_t> domains_;
    std::vector<std::size_t> offsets_;  // start of (factor, id) rows in realisation_
    std::vector<Count> realisation_;
    std::vector<Count> component_;
    SupportMap support_;
};

/// Per-factor count tables are keyed by identifier; identifiers never observed are absent.
struct EmpiricalEstimates {
    MarginalTable marginals;
    std::vector<std::pair<std::size_t, Identifier>> unobserved;  ///< (factor, id) with n(j) = 0
};

/// P(x | j) = n(x, j) / n(j) for the relevant components with n(j) > 0.
EmpiricalEstimates empirical_estimates(const TransitionCounts& counts, const ModelStructure& structure);

enum class ConfidenceScheme { box, l1 };

std::string_view to_string(ConfidenceScheme scheme);
ConfidenceScheme parse_scheme(std::string_view name);

struct ConfidenceBudget {
    double beta = 0.0;
    ConfidenceScheme scheme = ConfidenceScheme::box;
    std::size_t unknown_probabilities = 0;  ///< U: summed support sizes over the relevant components
    std::size_t relevant_components = 0;    ///< |Q|
    double delta = 0.0;                     ///< beta / U (box) or beta / |Q| (l1)
};

/// Relevant (factor, identifier) pairs reachable through the dependency function, sorted.
std::vector<std::pair<std::size_t, Identifier>> relevant_components(const ModelStructure& structure);

ConfidenceBudget split_confidence(double beta, const ModelStructure& structure, const SupportMap& support,
                                  ConfidenceScheme scheme);

/**
 * Clopper-Pearson boxes (box scheme) or Weissman L1 balls (l1 scheme) around
 * the pooled empirical rows. Sets live on the declared support; a row with no
 * samples becomes the whole simplex over its support.
 */
RfMdp build_learned_rfmdp(const TransitionCounts& counts, const ConfidenceBudget& budget,
                          const ModelStructure& structure);

/// Counts for the flat baseline: one multinomial per (s, a) over the successors of the true row.
class FlatCounts {
public:
    FlatCounts() = default;
    explicit FlatCounts(const FlatMdp& support_model);

    void record(std::span<const Transition> batch);
    Count total(StateIndex s, ActionIndex a) const { return totals_.at(s * actions_ + a); }
    std::span<const Count> row(StateIndex s, ActionIndex a) const { return counts_.at(s * actions_ + a); }
    std::span<const StateIndex> successors(StateIndex s, ActionIndex a) const { return support_.at(s * actions_ + a); }
    std::span<const Count> totals() const noexcept { return totals_; }
    /// Summed support sizes over all (s, a).
    std::size_t unknown_probabilities() const;

private:
    std::size_t actions_ = 0;
    std::vector<std::vector<StateIndex>> support_;
    std::vector<std::vector<Count>> counts_;
    std::vector<Count> totals_;
};

/// Clopper-Pearson box per flat row with delta = beta / U.
FlatBoxRmdp build_learned_flat(const FlatCounts& counts, double beta, const FlatMdp& support_model);

/// SplitMix64 finaliser; used to derive independent RNG streams from one seed.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
/// Generator for trajectory `index` of a run seeded with `seed`.
std::mt19937_64 trajectory_stream(std::uint64_t seed, std::uint64_t index);

/// Samples s' ~ T(. | s, a) factor by factor.
StateIndex sample_successor(const FactoredMdp& model, StateIndex s, ActionIndex a, std::mt19937_64& rng);

struct LearningConfig {
    double beta = 1e-4;
    ConfidenceScheme scheme = ConfidenceScheme::box;
    /// Backend::flat selects the flat baseline (box scheme only).
    Backend backend = Backend::mccormick;
    std::size_t trajectory_length = 5;
    std::size_t total_trajectories = 1000;
    std::size_t checkpoint_interval = 100;
    std::uint64_t seed = 0;
    SolveOptions solve;
};

struct Checkpoint {
    std::size_t trajectories = 0;
    double guarantee = 0.0;  ///< robust value of the learned policy at the initial state
    double nominal = 0.0;    ///< its value on the hidden model
    std::size_t recomputes = 0;
    double wall_ms = 0.0;
};

struct LearningTrace {
    std::vector<Checkpoint> checkpoints;
    std::uint64_t seed = 0;
    LearningConfig config;
    ConfidenceBudget budget;
    Direction direction = Direction::maximize;
};

/**
 * Optimistic model-based learning on `truth`, which is only sampled from and
 * used to validate the learned policies. Checkpoints are taken after 0, k, 2k,
 * ... trajectories and after the last one.
 */
LearningTrace learning_loop(const FactoredMdp& truth, const LearningConfig& config);

struct PacRow {
    std::size_t trajectories;
    double guarantee;
    double nominal;
    double beta;
    bool holds;  ///< nominal is at least as good as the guarantee
};

struct PacReport {
    std::vector<PacRow> rows;
    std::string statement;
    std::size_t violations = 0;
};

PacReport pac_report(const LearningTrace& trace);

} // namespace rfmdp
