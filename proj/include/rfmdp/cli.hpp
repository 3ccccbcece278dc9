#pragma once

#include "rfmdp/learner.hpp"
#include "rfmdp/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rfmdp {

enum class Command { generate, solve, learn, compare };

std::string_view to_string(Command command);
Command parse_command(std::string_view name);

struct RunConfig {
    Command command = Command::solve;
    std::filesystem::path model_path;
    std::filesystem::path output_dir = ".";
    /// Backends to run; `solve` and `learn` use the first, `compare` all of them
    /// (empty: vertex, interval-arithmetic and mccormick).
    std::vector<Backend> backends;
    std::optional<double> epsilon;
    double beta = 1e-4;
    std::optional<ConfidenceScheme> scheme;  ///< default: l1 for the l1-radius-sum backend, box otherwise
    std::vector<std::uint64_t> seeds{0};
    std::optional<double> tolerance;
    std::size_t trajectory_length = 5;
    std::size_t total_trajectories = 1000;
    std::size_t checkpoint_interval = 100;
    /// generate only.
    std::string domain;
    std::map<std::string, double> params;
};

/**
 * Runs one command and writes its artifacts under `output_dir`:
 *
 *   generate  <domain>.json (nominal marginals, plus boxes when epsilon is set)
 *   solve     solution.json, summary.csv
 *   learn     trace_seed<k>.csv per seed, trace_median.csv
 *   compare   compare.csv
 *
 * Every command also writes metadata.json with wall-clock times, which CSV
 * files leave out so their bodies are reproducible byte for byte. Failures
 * are written to error.json and to `err`; the return value is the exit code.
 */
int execute_command(const RunConfig& config, std::ostream& out, std::ostream& err);

} // namespace rfmdp
