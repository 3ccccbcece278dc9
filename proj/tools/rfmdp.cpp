#include "rfmdp/cli.hpp"
#include "rfmdp/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

namespace {

int config_error(const std::string& message) {
    const nlohmann::json record{
        {"error", {{"kind", "config"}, {"code", rfmdp::exit_code(rfmdp::ErrorKind::config)}, {"message", message}}}};
    std::cerr << record.dump() << '\n';
    return rfmdp::exit_code(rfmdp::ErrorKind::config);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust factored MDP solver and learner"};
    app.set_version_flag("--version", "rfmdp 0.1.0");

    std::string command;
    std::string model;
    std::vector<std::string> backends;
    std::optional<double> epsilon;
    double beta = 1e-4;
    std::string scheme;
    std::vector<std::uint64_t> seeds{0};
    std::string out = ".";
    std::optional<double> tolerance;
    std::size_t trajectory_length = 5;
    std::size_t total_trajectories = 1000;
    std::size_t checkpoint_interval = 100;
    std::string domain;
    std::vector<std::string> params;

    app.add_option("command", command, "generate, solve, learn or compare")
        ->required()
        ->check(CLI::IsMember({"generate", "solve", "learn", "compare"}));
    app.add_option("--model", model, "model file (JSON)");
    app.add_option("--backend", backends, "vertex, interval-arithmetic, mccormick, l1-radius-sum or flat; repeat for compare")
        ->delimiter(',');
    app.add_option("--epsilon", epsilon, "radius of the sets built around the nominal marginals");
    app.add_option("--beta", beta, "total error probability of the learned sets")->capture_default_str();
    app.add_option("--scheme", scheme, "box or l1 (learn)");
    app.add_option("--seeds", seeds, "comma-separated seeds (learn)")->delimiter(',')->capture_default_str();
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--tolerance", tolerance, "value-iteration convergence tolerance");
    app.add_option("--trajectory-length", trajectory_length)->capture_default_str();
    app.add_option("--total-trajectories", total_trajectories)->capture_default_str();
    app.add_option("--checkpoint-interval", checkpoint_interval)->capture_default_str();
    app.add_option("--domain", domain, "sysadmin, chain, stock or frozenlake (generate)");
    app.add_option("--param", params, "generator parameter key=value (generate); repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return config_error(e.what());
    }

    rfmdp::RunConfig config;
    try {
        config.command = rfmdp::parse_command(command);
        config.model_path = model;
        for (const auto& b : backends) config.backends.push_back(rfmdp::parse_backend(b));
        config.epsilon = epsilon;
        config.beta = beta;
        if (!scheme.empty()) config.scheme = rfmdp::parse_scheme(scheme);
        config.seeds = seeds;
        config.output_dir = out;
        config.tolerance = tolerance;
        config.trajectory_length = trajectory_length;
        config.total_trajectories = total_trajectories;
        config.checkpoint_interval = checkpoint_interval;
        config.domain = domain;
        for (const auto& p : params) {
            const auto eq = p.find('=');
            if (eq == std::string::npos) return config_error("--param expects key=value, got '" + p + "'");
            try {
                config.params[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
            } catch (const std::exception&) {
                return config_error("--param value is not a number: '" + p + "'");
            }
        }
    } catch (const rfmdp::Error& e) {
        return config_error(e.what());
    }
    return rfmdp::execute_command(config, std::cout, std::cerr);
}
