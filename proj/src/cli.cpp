#include "rfmdp/cli.hpp"

#include "rfmdp/environments.hpp"
#include "rfmdp/error.hpp"
#include "rfmdp/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

namespace rfmdp {

using nlohmann::json;

std::string_view to_string(Command command) {
    switch (command) {
    case Command::generate: return "generate";
    case Command::solve: return "solve";
    case Command::learn: return "learn";
    case Command::compare: return "compare";
    }
    return "unknown";
}

Command parse_command(std::string_view name) {
    for (auto c : {Command::generate, Command::solve, Command::learn, Command::compare})
        if (to_string(c) == name) return c;
    throw Error(ErrorKind::config, fmt::format("unknown command '{}' (expected generate, solve, learn or compare)", name));
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

SolveOptions solve_options(const RunConfig& c) {
    SolveOptions o;
    if (c.tolerance) {
        if (!(*c.tolerance > 0.0)) throw Error(ErrorKind::config, "tolerance must be positive");
        o.tolerance = *c.tolerance;
    }
    return o;
}

ModelFile load(const RunConfig& c) {
    if (c.model_path.empty()) throw Error(ErrorKind::config, fmt::format("{} needs --model", to_string(c.command)));
    return read_model(c.model_path);
}

// The rf-MDP a factored backend runs on: boxes (or L1 balls) of radius epsilon around
// the nominal marginals when epsilon is given, otherwise the sets stored in the file.
RfMdp robust_model(const ModelFile& file, const RunConfig& c, Backend backend) {
    const bool l1 = backend == Backend::l1_radius_sum;
    if (c.epsilon && file.marginals)
        return l1 ? perturb_to_l1_rfmdp(file.nominal(), *c.epsilon) : perturb_to_rfmdp(file.nominal(), *c.epsilon);
    if (c.epsilon) throw Error(ErrorKind::config, "--epsilon needs a model file with nominal marginals");
    if (file.uncertainty) return file.robust();
    return l1 ? perturb_to_l1_rfmdp(file.nominal(), 0.0) : perturb_to_rfmdp(file.nominal(), 0.0);
}

RobustSolution run_backend(const ModelFile& file, const RunConfig& c, Backend backend) {
    const auto options = solve_options(c);
    if (backend == Backend::flat) {
        if (!file.marginals) throw Error(ErrorKind::config, "the flat backend needs nominal marginals");
        return solve_flat_rmdp(perturb_flat(flatten(file.nominal()), c.epsilon.value_or(0.0)), options);
    }
    return solve_rfmdp(robust_model(file, c, backend), backend, options);
}

std::vector<std::string> backend_names(const std::vector<Backend>& backends) {
    std::vector<std::string> out;
    for (auto b : backends) out.emplace_back(to_string(b));
    return out;
}

json config_json(const RunConfig& c) {
    json j{{"command", to_string(c.command)},
           {"model_path", c.model_path.string()},
           {"output_dir", c.output_dir.string()},
           {"backends", backend_names(c.backends)},
           {"beta", c.beta},
           {"seeds", c.seeds},
           {"trajectory_length", c.trajectory_length},
           {"total_trajectories", c.total_trajectories},
           {"checkpoint_interval", c.checkpoint_interval}};
    if (c.epsilon) j["epsilon"] = *c.epsilon;
    if (c.scheme) j["scheme"] = to_string(*c.scheme);
    if (c.tolerance) j["tolerance"] = *c.tolerance;
    if (!c.domain.empty()) {
        j["domain"] = c.domain;
        j["params"] = c.params;
    }
    return j;
}

void write_metadata(const RunConfig& c, json extra) {
    extra["config"] = config_json(c);
    write_text(c.output_dir / "metadata.json", extra.dump(1) + "\n");
}

int run_generate(const RunConfig& c, std::ostream& out) {
    if (c.domain.empty()) throw Error(ErrorKind::config, "generate needs --domain");
    const auto start = Clock::now();
    const auto model = generate_benchmark({c.domain, c.params});
    const auto path = c.output_dir / (c.domain + ".json");
    if (c.epsilon) {
        const auto rf = perturb_to_rfmdp(model, *c.epsilon);
        write_text(path, serialize_model(rf, &model.marginals));
    } else {
        write_text(path, serialize_model(model));
    }
    write_metadata(c, {{"wall_ms", elapsed_ms(start)}, {"states", model.structure.state_count()}});
    out << path.string() << '\n';
    return 0;
}

int run_solve(const RunConfig& c, std::ostream& out) {
    const auto file = load(c);
    const Backend backend = c.backends.empty() ? Backend::mccormick : c.backends.front();
    const auto start = Clock::now();
    const auto sol = run_backend(file, c, backend);
    const double ms = elapsed_ms(start);
    write_text(c.output_dir / "solution.json", serialize_solution(sol));
    const double value = sol.initial_value(file.structure.initial_state);
    write_text(c.output_dir / "summary.csv",
               fmt::format("backend,value,iterations,residual,wall_ms\n{},{},{},{},\n", to_string(backend),
                           format_number(value), sol.iterations, format_number(sol.residual)));
    write_metadata(c, {{"wall_ms", ms}});
    out << fmt::format("{} value {} after {} iterations\n", to_string(backend), format_number(value), sol.iterations);
    return 0;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int run_learn(const RunConfig& c, std::ostream& out) {
    const auto file = load(c);
    const auto truth = file.nominal();
    if (c.seeds.empty()) throw Error(ErrorKind::config, "learn needs at least one seed");

    LearningConfig lc;
    lc.beta = c.beta;
    lc.backend = c.backends.empty() ? Backend::mccormick : c.backends.front();
    lc.scheme = c.scheme.value_or(lc.backend == Backend::l1_radius_sum ? ConfidenceScheme::l1 : ConfidenceScheme::box);
    lc.trajectory_length = c.trajectory_length;
    lc.total_trajectories = c.total_trajectories;
    lc.checkpoint_interval = c.checkpoint_interval;
    lc.solve = solve_options(c);

    std::vector<LearningTrace> traces;
    json seeds = json::array();
    for (auto seed : c.seeds) {
        lc.seed = seed;
        const auto start = Clock::now();
        traces.push_back(learning_loop(truth, lc));
        const auto& trace = traces.back();
        write_text(c.output_dir / fmt::format("trace_seed{}.csv", seed), trace_csv(trace));
        const auto report = pac_report(trace);
        json wall = json::array();
        for (const auto& cp : trace.checkpoints) wall.push_back(cp.wall_ms);
        seeds.push_back({{"seed", seed},
                         {"wall_ms", elapsed_ms(start)},
                         {"checkpoint_wall_ms", wall},
                         {"violations", report.violations},
                         {"statement", report.statement}});
        out << fmt::format("seed {}: final guarantee {} (nominal {}), {} violation(s)\n", seed,
                           format_number(trace.checkpoints.back().guarantee),
                           format_number(trace.checkpoints.back().nominal), report.violations);
    }

    std::string median_csv(trace_header);
    median_csv += '\n';
    for (std::size_t k = 0; k < traces.front().checkpoints.size(); ++k) {
        std::vector<double> g, n, r;
        for (const auto& t : traces) {
            g.push_back(t.checkpoints[k].guarantee);
            n.push_back(t.checkpoints[k].nominal);
            r.push_back(static_cast<double>(t.checkpoints[k].recomputes));
        }
        median_csv += fmt::format("{},{},{},{},,\n", traces.front().checkpoints[k].trajectories,
                                  format_number(median(g)), format_number(median(n)), format_number(median(r)));
    }
    write_text(c.output_dir / "trace_median.csv", median_csv);

    const auto& b = traces.front().budget;
    write_metadata(c, {{"seeds", seeds},
                       {"budget",
                        {{"beta", b.beta},
                         {"scheme", to_string(b.scheme)},
                         {"delta", b.delta},
                         {"unknown_probabilities", b.unknown_probabilities},
                         {"relevant_components", b.relevant_components}}},
                       {"guarantee", fmt::format("with probability at least {} every learned set contains the true "
                                                 "marginal (union bound over all sets)",
                                                 format_number(1.0 - b.beta))},
                       {"synthesis", "each checkpoint re-synthesises the robust policy; value iteration starts from "
                                     "the previous checkpoint's values"},
                       {"exploration", "pure optimism: the best-case policy of the learned model, no extra noise"},
                       {"unobserved_rows", b.scheme == ConfidenceScheme::l1
                                               ? "rows with no samples use a radius-2 L1 ball around the uniform "
                                                 "distribution on their support (the whole simplex)"
                                               : "rows with no samples use the whole simplex on their support"}});
    return 0;
}

int run_compare(const RunConfig& c, std::ostream& out) {
    const auto file = load(c);
    auto backends = c.backends;
    if (backends.empty()) backends = {Backend::vertex, Backend::interval_arithmetic, Backend::mccormick};

    std::vector<double> values;
    json wall = json::object();
    for (auto b : backends) {
        const auto start = Clock::now();
        values.push_back(run_backend(file, c, b).initial_value(file.structure.initial_state));
        wall[std::string(to_string(b))] = elapsed_ms(start);
    }
    std::optional<double> vertex;
    for (std::size_t k = 0; k < backends.size(); ++k)
        if (backends[k] == Backend::vertex) vertex = values[k];
    if (!vertex) vertex = run_backend(file, c, Backend::vertex).initial_value(file.structure.initial_state);

    std::string csv = "backend,value,rel_gap_vs_vertex,wall_ms\n";
    for (std::size_t k = 0; k < backends.size(); ++k) {
        const double v = values[k];
        const double diff = std::abs(*vertex - v);
        const double gap = diff == 0.0 ? 0.0 : diff / std::abs(v);
        csv += fmt::format("{},{},{},\n", to_string(backends[k]), format_number(v), format_number(gap));
        out << fmt::format("{:<20} {:>16} gap {}\n", to_string(backends[k]), format_number(v), format_number(gap));
    }
    write_text(c.output_dir / "compare.csv", csv);
    write_metadata(c, {{"wall_ms", wall}});
    return 0;
}

} // namespace

int execute_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        switch (config.command) {
        case Command::generate: return run_generate(config, out);
        case Command::solve: return run_solve(config, out);
        case Command::learn: return run_learn(config, out);
        case Command::compare: return run_compare(config, out);
        }
        throw Error(ErrorKind::config, "unknown command");
    } catch (const Error& e) {
        const json record{{"error", {{"kind", to_string(e.kind())}, {"code", exit_code(e.kind())}, {"message", e.what()}}}};
        err << record.dump() << '\n';
        try {
            write_text(config.output_dir / "error.json", record.dump(1) + "\n");
        } catch (const Error&) {
        }
        return exit_code(e.kind());
    }
}

} // namespace rfmdp
