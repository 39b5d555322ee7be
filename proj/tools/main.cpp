#include <CLI11.hpp>

#include <iostream>

#include "hybrid_pmp/cli.hpp"

using namespace hybrid_pmp;

int main(int argc, char** argv)
{
    CLI::App app{"Optimal control of hybrid systems with rank-dropping resets"};

    std::string config_path;
    std::string command, example, output_dir, seed_from;
    std::vector<double> initial_state, initial_guess, pre_state;
    std::optional<int> reset_count, n_max, seed_id, max_iterations, oracle_iterations, oracle_intervals;
    std::optional<double> horizon, rel_tol, abs_tol, event_tol, newton_tol, jump_tol, penalty_weight;
    std::optional<std::uint64_t> oracle_seed;

    app.add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("command", command, "simulate | solve | scan | jump-demo | oracle | reproduce");
    app.add_option("--example", example, "Registered example id");
    app.add_option("-o,--output-dir", output_dir, "Directory for artifacts");
    app.add_option("--initial-state", initial_state, "Initial state x0")->expected(1, -1);
    app.add_option("--horizon", horizon, "Final time T");
    app.add_option("--initial-guess", initial_guess, "Shooting decision vector")->expected(1, -1);
    app.add_option("--seed-id", seed_id, "Use the stored seed for this reset count");
    app.add_option("-N,--reset-count", reset_count, "Number of resets");
    app.add_option("--n-max", n_max, "Largest reset count for scan");
    app.add_option("--pre-state", pre_state, "Pre-reset (x, p) for jump-demo")->expected(1, -1);
    app.add_option("--rel-tol", rel_tol);
    app.add_option("--abs-tol", abs_tol);
    app.add_option("--event-tol", event_tol);
    app.add_option("--newton-tol", newton_tol);
    app.add_option("--jump-tol", jump_tol);
    app.add_option("--max-iterations", max_iterations);
    app.add_option("--oracle-iterations", oracle_iterations);
    app.add_option("--oracle-intervals", oracle_intervals);
    app.add_option("--oracle-seed", oracle_seed);
    app.add_option("--penalty-weight", penalty_weight);
    app.add_option("--seed-from", seed_from, "indirect | zero");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::exit_config_error;
    }

    cli::RunConfig cfg;
    try
    {
        if (!config_path.empty())
        {
            cfg = cli::load_config(config_path);
        }
        if (!command.empty())
        {
            cfg.command = cli::parse_command(command);
            if (!cfg.command)
            {
                throw ConfigError("command", "unknown command '" + command + "'");
            }
        }
        auto to_vector = [](const std::vector<double>& v) { return Vector(Eigen::Map<const Vector>(v.data(), v.size())); };
        if (!example.empty()) cfg.example = example;
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (!initial_state.empty()) cfg.initial_state = to_vector(initial_state);
        if (!initial_guess.empty()) cfg.initial_guess = to_vector(initial_guess);
        if (!pre_state.empty()) cfg.pre_state = to_vector(pre_state);
        if (horizon) cfg.horizon = horizon;
        if (seed_id) cfg.seed_id = seed_id;
        if (reset_count) cfg.reset_count = reset_count;
        if (n_max) cfg.n_max = n_max;
        if (rel_tol) cfg.tolerances.rel_tol = *rel_tol;
        if (abs_tol) cfg.tolerances.abs_tol = *abs_tol;
        if (event_tol) cfg.tolerances.event_tol = *event_tol;
        if (newton_tol) cfg.tolerances.newton_tol = *newton_tol;
        if (jump_tol) cfg.tolerances.jump_tol = *jump_tol;
        if (max_iterations) cfg.tolerances.max_iterations = *max_iterations;
        if (oracle_iterations) cfg.oracle.iterations = *oracle_iterations;
        if (oracle_intervals) cfg.oracle.intervals = *oracle_intervals;
        if (oracle_seed) cfg.oracle.seed = *oracle_seed;
        if (penalty_weight) cfg.oracle.penalty_weight = *penalty_weight;
        if (!seed_from.empty()) cfg.oracle.seed_from = seed_from;
    }
    catch (const ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return cli::exit_config_error;
    }

    const int code = cli::run(cfg, std::cerr);
    if (code == cli::exit_ok)
    {
        std::cout << "wrote artifacts to " << cfg.output_dir.string() << "\n";
    }
    return code;
}
