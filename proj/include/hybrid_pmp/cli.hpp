#pragma once

/**
 * Batch front end: a RunConfig (JSON file, optionally overridden by flags)
 * selects an example and a command; run() executes it and writes artifacts to
 * the output directory.
 */

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "io.hpp"
#include "oracle.hpp"
#include "registry.hpp"

namespace hybrid_pmp::cli
{
    using json = nlohmann::json;

    enum class Command
    {
        simulate,
        solve,
        scan,
        jump_demo,
        oracle,
        reproduce,
    };

    inline constexpr int exit_ok             = 0;
    inline constexpr int exit_config_error   = 2;
    inline constexpr int exit_no_convergence = 3;
    inline constexpr int exit_internal_error = 4;

    inline std::optional<Command> parse_command(const std::string& name)
    {
        if (name == "simulate") return Command::simulate;
        if (name == "solve") return Command::solve;
        if (name == "scan") return Command::scan;
        if (name == "jump-demo") return Command::jump_demo;
        if (name == "oracle") return Command::oracle;
        if (name == "reproduce") return Command::reproduce;
        return std::nullopt;
    }

    inline std::string command_name(Command c)
    {
        switch (c)
        {
        case Command::simulate: return "simulate";
        case Command::solve: return "solve";
        case Command::scan: return "scan";
        case Command::jump_demo: return "jump-demo";
        case Command::oracle: return "oracle";
        case Command::reproduce: return "reproduce";
        }
        return "";
    }

    struct Tolerances
    {
        double rel_tol      = 1e-10;
        double abs_tol      = 1e-12;
        double event_tol    = 1e-12;
        double newton_tol   = 1e-9;
        double jump_tol     = 1e-11;
        int max_iterations  = 50;

        SolverSettings settings() const
        {
            SolverSettings s;
            s.integrator.rel_tol   = rel_tol;
            s.integrator.abs_tol   = abs_tol;
            s.integrator.event_tol = event_tol;
            s.newton.tolerance     = newton_tol;
            s.newton.max_iterations = max_iterations;
            s.jump_tolerance       = jump_tol;
            return s;
        }
    };

    struct OracleSettings
    {
        int iterations        = 2000;
        int intervals         = 100;
        std::uint64_t seed    = 42;
        double penalty_weight = 1e4;
        std::string seed_from = "indirect"; // or "zero"
    };

    struct RunConfig
    {
        std::string example = bouncing_ball::example_id;
        std::optional<Command> command;
        std::optional<Vector> initial_state;
        std::optional<double> horizon;
        std::optional<Vector> initial_guess; // full shooting decision vector
        std::optional<int> seed_id;          // take the registry seed stored for this reset count
        std::optional<int> reset_count;
        std::optional<int> n_max;
        std::optional<Vector> pre_state; // jump-demo: (x, p) on the guard
        Tolerances tolerances;
        OracleSettings oracle;
        std::filesystem::path output_dir = "out";
    };

    namespace detail
    {
        inline Vector vector_field(const json& j, const std::string& field)
        {
            if (!j.is_array() || j.empty())
            {
                throw ConfigError(field, "expected a non-empty array of numbers");
            }
            Vector v(static_cast<Eigen::Index>(j.size()));
            for (std::size_t i = 0; i < j.size(); ++i)
            {
                if (!j[i].is_number())
                {
                    throw ConfigError(field + "[" + std::to_string(i) + "]", "expected a number");
                }
                v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
            }
            return v;
        }

        inline double number_field(const json& j, const std::string& field)
        {
            if (!j.is_number())
            {
                throw ConfigError(field, "expected a number");
            }
            return j.get<double>();
        }

        inline int integer_field(const json& j, const std::string& field)
        {
            if (!j.is_number_integer())
            {
                throw ConfigError(field, "expected an integer");
            }
            return j.get<int>();
        }

        inline std::string string_field(const json& j, const std::string& field)
        {
            if (!j.is_string())
            {
                throw ConfigError(field, "expected a string");
            }
            return j.get<std::string>();
        }

        inline void reject_unknown(const json& obj, const std::vector<std::string>& known, const std::string& prefix)
        {
            for (const auto& item : obj.items())
            {
                if (std::find(known.begin(), known.end(), item.key()) == known.end())
                {
                    throw ConfigError(prefix + item.key(), "unknown field");
                }
            }
        }
    } // namespace detail

    /// Build a RunConfig from a parsed JSON document. Missing fields keep their defaults.
    inline RunConfig parse_config(const json& doc)
    {
        using namespace detail;
        if (!doc.is_object())
        {
            throw ConfigError("", "config must be a JSON object");
        }
        reject_unknown(doc,
                       {"example", "command", "initial_state", "horizon", "initial_guess", "seed_id", "reset_count",
                        "n_max", "pre_state", "tolerances", "oracle", "output_dir"},
                       "");
        RunConfig cfg;
        if (doc.contains("example")) cfg.example = string_field(doc["example"], "example");
        if (doc.contains("command"))
        {
            const auto name = string_field(doc["command"], "command");
            cfg.command     = parse_command(name);
            if (!cfg.command)
            {
                throw ConfigError("command", "unknown command '" + name + "'");
            }
        }
        if (doc.contains("initial_state")) cfg.initial_state = vector_field(doc["initial_state"], "initial_state");
        if (doc.contains("horizon")) cfg.horizon = number_field(doc["horizon"], "horizon");
        if (doc.contains("initial_guess")) cfg.initial_guess = vector_field(doc["initial_guess"], "initial_guess");
        if (doc.contains("seed_id")) cfg.seed_id = integer_field(doc["seed_id"], "seed_id");
        if (doc.contains("reset_count")) cfg.reset_count = integer_field(doc["reset_count"], "reset_count");
        if (doc.contains("n_max")) cfg.n_max = integer_field(doc["n_max"], "n_max");
        if (doc.contains("pre_state")) cfg.pre_state = vector_field(doc["pre_state"], "pre_state");
        if (doc.contains("output_dir")) cfg.output_dir = string_field(doc["output_dir"], "output_dir");
        if (doc.contains("tolerances"))
        {
            const auto& t = doc["tolerances"];
            if (!t.is_object())
            {
                throw ConfigError("tolerances", "expected an object");
            }
            reject_unknown(t, {"rel_tol", "abs_tol", "event_tol", "newton_tol", "jump_tol", "max_iterations"},
                           "tolerances.");
            auto& tol = cfg.tolerances;
            if (t.contains("rel_tol")) tol.rel_tol = number_field(t["rel_tol"], "tolerances.rel_tol");
            if (t.contains("abs_tol")) tol.abs_tol = number_field(t["abs_tol"], "tolerances.abs_tol");
            if (t.contains("event_tol")) tol.event_tol = number_field(t["event_tol"], "tolerances.event_tol");
            if (t.contains("newton_tol")) tol.newton_tol = number_field(t["newton_tol"], "tolerances.newton_tol");
            if (t.contains("jump_tol")) tol.jump_tol = number_field(t["jump_tol"], "tolerances.jump_tol");
            if (t.contains("max_iterations"))
                tol.max_iterations = integer_field(t["max_iterations"], "tolerances.max_iterations");
        }
        if (doc.contains("oracle"))
        {
            const auto& o = doc["oracle"];
            if (!o.is_object())
            {
                throw ConfigError("oracle", "expected an object");
            }
            reject_unknown(o, {"iterations", "intervals", "seed", "penalty_weight", "seed_from"}, "oracle.");
            auto& os = cfg.oracle;
            if (o.contains("iterations")) os.iterations = integer_field(o["iterations"], "oracle.iterations");
            if (o.contains("intervals")) os.intervals = integer_field(o["intervals"], "oracle.intervals");
            if (o.contains("seed"))
            {
                if (!o["seed"].is_number_unsigned())
                {
                    throw ConfigError("oracle.seed", "expected a non-negative integer");
                }
                os.seed = o["seed"].get<std::uint64_t>();
            }
            if (o.contains("penalty_weight"))
                os.penalty_weight = number_field(o["penalty_weight"], "oracle.penalty_weight");
            if (o.contains("seed_from")) os.seed_from = string_field(o["seed_from"], "oracle.seed_from");
        }
        return cfg;
    }

    /// Parse a config file; syntax errors carry the line and column of the offending token.
    inline RunConfig load_config(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw ConfigError("", "cannot read config file " + path.string());
        }
        json doc;
        try
        {
            doc = json::parse(in);
        }
        catch (const json::parse_error& e)
        {
            throw ConfigError("", path.string() + ": " + e.what());
        }
        return parse_config(doc);
    }

    /// Resolved problem for a config: registry entry plus inline overrides.
    struct ResolvedProblem
    {
        ExampleEntry entry;
        HybridProblem problem;
        Vector x0;
    };

    inline ResolvedProblem resolve(const RunConfig& cfg)
    {
        auto entry = find_example(cfg.example);
        if (!entry)
        {
            throw ConfigError("example", "unknown example id '" + cfg.example + "'");
        }
        ResolvedProblem out{*entry, entry->make_problem(), entry->initial_state()};
        if (cfg.initial_state)
        {
            if (cfg.initial_state->size() != out.problem.dim_state)
            {
                throw ConfigError("initial_state", "expected " + std::to_string(out.problem.dim_state) + " entries");
            }
            out.x0 = *cfg.initial_state;
        }
        if (cfg.horizon)
        {
            if (!(*cfg.horizon >= out.problem.t0))
            {
                throw ConfigError("horizon", "must not precede the initial time");
            }
            out.problem.T = *cfg.horizon;
        }
        return out;
    }

    /// Check that everything the command needs is present and sane; throws ConfigError.
    inline void validate(const RunConfig& cfg)
    {
        if (!cfg.command)
        {
            throw ConfigError("command", "missing (one of simulate, solve, scan, jump-demo, oracle, reproduce)");
        }
        const auto& t = cfg.tolerances;
        for (const auto& [name, value] : {std::pair<const char*, double>{"rel_tol", t.rel_tol},
                                          {"abs_tol", t.abs_tol},
                                          {"event_tol", t.event_tol},
                                          {"newton_tol", t.newton_tol},
                                          {"jump_tol", t.jump_tol}})
        {
            if (!(value > 0.0) || !std::isfinite(value))
            {
                throw ConfigError(std::string("tolerances.") + name, "must be positive");
            }
        }
        if (t.max_iterations <= 0)
        {
            throw ConfigError("tolerances.max_iterations", "must be positive");
        }
        if (cfg.output_dir.empty())
        {
            throw ConfigError("output_dir", "must not be empty");
        }
        const auto resolved = resolve(cfg);
        switch (*cfg.command)
        {
        case Command::simulate:
        case Command::solve:
            if (!cfg.reset_count)
            {
                throw ConfigError("reset_count", "required by '" + command_name(*cfg.command) + "'");
            }
            if (*cfg.reset_count < 0)
            {
                throw ConfigError("reset_count", "must be non-negative");
            }
            if (!cfg.initial_guess && !resolved.entry.seeds(cfg.seed_id.value_or(*cfg.reset_count))
                && *cfg.command == Command::simulate)
            {
                throw ConfigError("initial_guess", "required: no stored seed for this reset count");
            }
            break;
        case Command::scan:
            if (!cfg.n_max)
            {
                throw ConfigError("n_max", "required by 'scan'");
            }
            if (*cfg.n_max < 0)
            {
                throw ConfigError("n_max", "must be non-negative");
            }
            break;
        case Command::jump_demo:
            if (!cfg.pre_state && cfg.example != bouncing_ball::example_id)
            {
                throw ConfigError("pre_state", "required by 'jump-demo' for this example");
            }
            if (cfg.pre_state && cfg.pre_state->size() != 2 * resolved.problem.dim_state)
            {
                throw ConfigError("pre_state", "expected " + std::to_string(2 * resolved.problem.dim_state)
                                                   + " entries (state then co-state)");
            }
            break;
        case Command::oracle:
            if (cfg.reset_count && *cfg.reset_count < 0)
            {
                throw ConfigError("reset_count", "must be non-negative");
            }
            if (cfg.oracle.iterations < 0)
            {
                throw ConfigError("oracle.iterations", "must be non-negative");
            }
            if (cfg.oracle.intervals <= 0)
            {
                throw ConfigError("oracle.intervals", "must be positive");
            }
            if (!(cfg.oracle.penalty_weight > 0.0))
            {
                throw ConfigError("oracle.penalty_weight", "must be positive");
            }
            if (cfg.oracle.seed_from != "indirect" && cfg.oracle.seed_from != "zero")
            {
                throw ConfigError("oracle.seed_from", "expected 'indirect' or 'zero'");
            }
            break;
        case Command::reproduce:
            if (cfg.example != bouncing_ball::example_id)
            {
                throw ConfigError("example", "'reproduce' is only defined for " + std::string(bouncing_ball::example_id));
            }
            break;
        }
    }

    /// Collects artifacts as they are written so the manifest can list them.
    class ArtifactWriter
    {
    public:
        explicit ArtifactWriter(std::filesystem::path dir)
            : dir_(std::move(dir))
        {
            std::filesystem::create_directories(dir_);
        }

        void json_file(const std::string& name, const json& j)
        {
            io::write_json(dir_ / name, j);
            files_.push_back(name);
        }

        void text_file(const std::string& name, const std::string& text)
        {
            io::write_text(dir_ / name, text);
            files_.push_back(name);
        }

        void arc_csv(const std::string& name, const HybridArc& arc, const HybridProblem& problem)
        {
            std::ostringstream os;
            io::write_arc_csv(os, arc.arcs, problem.dim_state, problem.dim_control);
            text_file(name, os.str());
        }

        const std::vector<std::string>& files() const { return files_; }

    private:
        std::filesystem::path dir_;
        std::vector<std::string> files_;
    };

    inline json tolerance_record(const Tolerances& t)
    {
        return {{"rel_tol", io::number(t.rel_tol)},       {"abs_tol", io::number(t.abs_tol)},
                {"event_tol", io::number(t.event_tol)},   {"newton_tol", io::number(t.newton_tol)},
                {"jump_tol", io::number(t.jump_tol)},     {"max_iterations", t.max_iterations}};
    }

    inline std::string single_row_summary(int N, bool converged, double cost)
    {
        ScanTable table;
        ScanRow row;
        row.reset_count = N;
        row.converged   = converged;
        row.cost        = cost;
        table.rows.push_back(row);
        if (converged)
        {
            table.minimizer = 0;
        }
        return io::summary_table(table);
    }

    namespace detail
    {
        inline Vector decision_for(const RunConfig& cfg, const ResolvedProblem& rp, int N)
        {
            if (cfg.initial_guess)
            {
                return *cfg.initial_guess;
            }
            if (auto s = rp.entry.seeds(cfg.seed_id.value_or(N)))
            {
                return *s;
            }
            ShootingSpec layout;
            layout.problem     = rp.problem;
            layout.reset_count = N;
            return Vector::Zero(layout.decision_len());
        }

        inline ShootingSpec shooting_spec(const RunConfig& cfg, const ResolvedProblem& rp, int N)
        {
            auto spec = make_shooting_spec(rp.problem, rp.x0, N, decision_for(cfg, rp, N));
            cfg.tolerances.settings().apply(spec);
            return spec;
        }

        inline int write_scan(ArtifactWriter& out, const ScanTable& table, const HybridProblem& problem)
        {
            out.json_file("table1.json", io::table_record(table));
            bool any = false;
            for (const auto& row : table.rows)
            {
                if (row.converged && row.result)
                {
                    out.arc_csv("arcs_N" + std::to_string(row.reset_count) + ".csv", row.result->arc, problem);
                }
                any = any || row.converged;
            }
            out.text_file("summary.txt", io::summary_table(table));
            return any ? exit_ok : exit_no_convergence;
        }

        inline int run_simulate(const RunConfig& cfg, const ResolvedProblem& rp, ArtifactWriter& out)
        {
            const int N      = *cfg.reset_count;
            const auto spec  = shooting_spec(cfg, rp, N);
            const auto sim   = simulate_with_spec(spec, spec.initial_guess);
            out.arc_csv("arc.csv", sim.arc, rp.problem);
            out.json_file("events.json", io::events_record(sim.arc));
            json summary = {{"N", N},
                            {"cost", sim.ok() ? io::number(sim.arc.cost) : json(nullptr)},
                            {"residual_norm", sim.ok() ? io::number(max_abs(sim.residual)) : json(nullptr)},
                            {"converged", sim.ok() && max_abs(sim.residual) <= spec.newton.tolerance}};
            if (sim.mismatch)
            {
                summary["mismatch"] = {{"expected", sim.mismatch->expected}, {"realized", sim.mismatch->realized}};
            }
            if (sim.failure)
            {
                summary["failure"] = *sim.failure;
            }
            out.json_file("summary.json", summary);
            out.text_file("summary.txt", single_row_summary(N, sim.ok(), sim.arc.cost));
            return sim.ok() ? exit_ok : exit_no_convergence;
        }

        inline int run_solve(const RunConfig& cfg, const ResolvedProblem& rp, ArtifactWriter& out)
        {
            const int N       = *cfg.reset_count;
            const auto result = solve_report(shooting_spec(cfg, rp, N));
            if (result.converged)
            {
                out.arc_csv("arcs_N" + std::to_string(N) + ".csv", result.arc, rp.problem);
                out.json_file("events.json", io::events_record(result.arc));
            }
            out.json_file("summary.json", io::summary_record(N, result));
            out.text_file("summary.txt", single_row_summary(N, result.converged, result.arc.cost));
            return result.converged ? exit_ok : exit_no_convergence;
        }

        inline int run_scan(const RunConfig& cfg, const ResolvedProblem& rp, ArtifactWriter& out)
        {
            SeedProvider seeds = rp.entry.seeds;
            const auto table   = scan_reset_counts(rp.problem, rp.x0, *cfg.n_max, seeds, cfg.tolerances.settings());
            return write_scan(out, table, rp.problem);
        }

        inline int run_jump_demo(const RunConfig& cfg, const ResolvedProblem& rp, ArtifactWriter& out)
        {
            const Eigen::Index n = rp.problem.dim_state;
            CotangentState pre   = bouncing_ball::demo_pre_state().cotangent(rp.problem.t0);
            if (cfg.pre_state)
            {
                pre = {cfg.pre_state->head(n), cfg.pre_state->tail(n), rp.problem.t0};
            }
            JumpSolveOptions opts;
            opts.integrator       = cfg.tolerances.settings().integrator;
            opts.newton.tolerance = cfg.tolerances.newton_tol;
            opts.newton.max_iterations = cfg.tolerances.max_iterations;
            const auto sol = solve_jump(rp.problem, pre, rp.problem.T, opts);
            out.json_file("jump_demo.json", io::jump_record(sol));
            out.text_file("summary.txt", "post co-state:" + [&] {
                std::string s;
                for (Eigen::Index i = 0; i < n; ++i)
                {
                    s += " " + io::fmt12(sol.candidate.post_p(i));
                }
                return s + "\n";
            }());
            return exit_ok;
        }

        inline int run_oracle(const RunConfig& cfg, const ResolvedProblem& rp, ArtifactWriter& out)
        {
            const int N = cfg.reset_count.value_or(2);
            const auto settings = cfg.tolerances.settings();
            oracle::ControlGrid seed_controls = oracle::ControlGrid::zeros(rp.problem, cfg.oracle.intervals);
            std::optional<ShootingResult> indirect;
            if (cfg.oracle.seed_from == "indirect")
            {
                indirect = solve_report(shooting_spec(cfg, rp, N));
                if (!indirect->converged)
                {
                    out.json_file("summary.json", io::summary_record(N, *indirect));
                    return exit_no_convergence;
                }
                seed_controls = oracle::ControlGrid::sample(rp.problem, cfg.oracle.intervals, [&](double t) {
                    return control_at(rp.problem, indirect->arc, t, settings.integrator);
                });
            }
            oracle::RefineOptions ro;
            ro.iterations     = cfg.oracle.iterations;
            ro.penalty_weight = cfg.oracle.penalty_weight;
            ro.seed           = cfg.oracle.seed;
            const auto best = oracle::refine(rp.problem, rp.x0, seed_controls, ro, settings.integrator);
            json report     = io::oracle_record(best);
            report["seed_from"] = cfg.oracle.seed_from;
            report["intervals"] = cfg.oracle.intervals;
            if (indirect)
            {
                report["indirect"] = {{"N", N}, {"cost", io::number(indirect->arc.cost)}};
            }
            out.json_file("oracle_report.json", report);
            out.text_file("summary.txt", single_row_summary(best.simulation.bounce_count, true, best.simulation.cost));
            return exit_ok;
        }

        inline int run_reproduce(const RunConfig& cfg, ArtifactWriter& out)
        {
            const auto report  = bouncing_ball::reproduce_results(cfg.tolerances.settings());
            const auto problem = bouncing_ball::make_problem();
            write_scan(out, report.table, problem);
            json jump = io::jump_record(report.demo_jump);
            json interior = json::array();
            for (const auto& ij : report.interior_jumps)
            {
                HybridArc single;
                single.events.push_back(ij.event);
                json e = io::events_record(single)["events"][0];
                json roots = json::array();
                for (const auto& r : ij.event.roots)
                {
                    roots.push_back({{"mu", io::to_json(r.mu)}, {"residual_norm", io::number(r.residual_norm)},
                                     {"iterations", r.iterations}});
                }
                e["roots"] = roots;
                e["N"]     = ij.reset_count;
                interior.push_back(e);
            }
            jump["first_interior_resets"] = interior;
            out.json_file("jump_demo.json", jump);
            for (const auto& row : report.table.rows)
            {
                if (!row.converged)
                {
                    return exit_no_convergence;
                }
            }
            return exit_ok;
        }
    } // namespace detail

    /**
     * Execute a validated config. Configuration problems are reported before
     * anything is written; every run that gets past validation writes
     * manifest.json last. Returns the process exit code.
     */
    inline int run(const RunConfig& cfg, std::ostream& err = std::cerr)
    {
        ResolvedProblem rp;
        try
        {
            validate(cfg);
            rp = resolve(cfg);
        }
        catch (const ConfigError& e)
        {
            err << "config error: " << e.what() << "\n";
            return exit_config_error;
        }

        int code = exit_ok;
        try
        {
            ArtifactWriter out(cfg.output_dir);
            try
            {
                switch (*cfg.command)
                {
                case Command::simulate: code = detail::run_simulate(cfg, rp, out); break;
                case Command::solve: code = detail::run_solve(cfg, rp, out); break;
                case Command::scan: code = detail::run_scan(cfg, rp, out); break;
                case Command::jump_demo: code = detail::run_jump_demo(cfg, rp, out); break;
                case Command::oracle: code = detail::run_oracle(cfg, rp, out); break;
                case Command::reproduce: code = detail::run_reproduce(cfg, out); break;
                }
            }
            catch (const NoConvergence& e)
            {
                err << "no convergence: " << e.what() << "\n";
                code = exit_no_convergence;
            }
            catch (const NoNextCrossing& e)
            {
                err << "no convergence: " << e.what() << "\n";
                code = exit_no_convergence;
            }
            catch (const DomainError& e)
            {
                err << "config error: " << e.what() << "\n";
                code = exit_config_error;
            }
            json manifest = {{"command", command_name(*cfg.command)},
                             {"example", cfg.example},
                             {"exit_code", code},
                             {"files", out.files()},
                             {"tolerances", tolerance_record(cfg.tolerances)}};
            out.json_file("manifest.json", manifest);
        }
        catch (const std::exception& e)
        {
            err << "internal error: " << e.what() << "\n";
            return exit_internal_error;
        }
        return code;
    }
} // namespace hybrid_pmp::cli
