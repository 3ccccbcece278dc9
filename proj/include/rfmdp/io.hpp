#pragma once

#include "rfmdp/learner.hpp"
#include "rfmdp/model.hpp"
#include "rfmdp/solver.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace rfmdp {

/**
 * Contents of a model file. The nominal marginals and the uncertainty sets are
 * both optional, but a file must carry at least one of them.
 *
 * The format is JSON with top-level keys `factors`, `actions`, `dependency`,
 * `marginals`, `rewards`, `initial_state`, `objective`, and optionally
 * `uncertainty` and `metadata`. `dependency` is either a list of
 * {state, action, factor, id} records or {"domain": ..., "params": {...}},
 * which regenerates the table of a bundled benchmark.
 */
struct ModelFile {
    ModelStructure structure;
    std::optional<MarginalTable> marginals;
    std::optional<UncertaintyTable> uncertainty;

    FactoredMdp nominal() const;  ///< throws Error(config) without marginals
    RfMdp robust() const;         ///< throws Error(config) without uncertainty sets
};

/// Default discount when a discounted objective omits it.
inline constexpr double default_discount = 0.95;

ModelFile parse_model(std::string_view text);
ModelFile read_model(const std::filesystem::path& path);

std::string serialize_model(const FactoredMdp& model);
std::string serialize_model(const RfMdp& model, const MarginalTable* nominal = nullptr);

std::string serialize_solution(const RobustSolution& solution);

/// 12 significant digits; the format of every number in CSV output.
std::string format_number(double value);

/// Trace rows `trajectories,guarantee,nominal,recomputes,wall_ms,seed`. wall_ms is left empty.
std::string trace_csv(const LearningTrace& trace);
inline constexpr std::string_view trace_header = "trajectories,guarantee,nominal,recomputes,wall_ms,seed";

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

} // namespace rfmdp
