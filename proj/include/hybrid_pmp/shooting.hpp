#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "reset_jump.hpp"

namespace hybrid_pmp
{
    /**
     * Decision/residual layout for single shooting with a fixed number of resets N.
     *
     * Decision vector: [p0 (n) | final-jump free coefficients (n-r-1 if N >= 1) |
     * target multipliers (k, only when the target is not a point)].
     *
     * Residual vector: [consistency at the first crossing (n-1-r if N >= 1) |
     * target functions at T (k) | transversality p(T) - dphi - sum nu_j dpsi_j (n,
     * only when the target is not a point)].
     *
     * Interior resets 1..N-1 are resolved by solve_jump, which enforces
     * consistency at every later crossing, so the system is square for all N.
     */
    struct ShootingSpec
    {
        HybridProblem problem;
        Vector x0;
        int reset_count = 0;
        Vector initial_guess;
        NewtonOptions newton{1e-9, 50, 1e-7, 30};
        IntegratorOptions integrator;
        /// Tolerance of the inner jump selection; tighter than the outer one so
        /// that the outer residual stays smooth under finite differencing.
        double jump_tolerance = 1e-11;

        int n() const { return problem.dim_state; }
        int target_count() const { return static_cast<int>(problem.target_fns.size()); }
        bool has_transversality() const { return target_count() < n(); }
        int costate_len() const { return n(); }
        int final_free_len() const { return reset_count >= 1 ? n() - problem.reset_rank - 1 : 0; }
        int multiplier_len() const { return has_transversality() ? target_count() : 0; }
        int decision_len() const { return costate_len() + final_free_len() + multiplier_len(); }
        int admissibility_len() const { return reset_count >= 1 ? n() - 1 - problem.reset_rank : 0; }
        int residual_len() const
        {
            return admissibility_len() + target_count() + (has_transversality() ? n() : 0);
        }
        /// Free initial co-state directions once the admissibility equations are imposed.
        int effective_costate_dof() const { return costate_len() - admissibility_len(); }
    };

    inline ShootingSpec make_shooting_spec(HybridProblem problem, Vector x0, int reset_count, Vector initial_guess)
    {
        problem.validate();
        if (reset_count < 0)
        {
            throw DomainError("reset count must be non-negative");
        }
        ShootingSpec spec;
        spec.problem       = std::move(problem);
        spec.x0            = std::move(x0);
        spec.reset_count   = reset_count;
        spec.initial_guess = std::move(initial_guess);
        if (spec.x0.size() != spec.n())
        {
            throw DomainError("initial state has the wrong dimension");
        }
        if (spec.decision_len() != spec.residual_len())
        {
            throw DomainError("shooting system is not square: " + std::to_string(spec.decision_len()) + " unknowns, "
                              + std::to_string(spec.residual_len()) + " equations");
        }
        if (spec.initial_guess.size() != spec.decision_len())
        {
            throw DomainError("initial guess has length " + std::to_string(spec.initial_guess.size()) + ", expected "
                              + std::to_string(spec.decision_len()));
        }
        return spec;
    }

    struct ResetEvent
    {
        double t = 0.0;
        CotangentState pre;
        JumpCandidate jump;
        bool final              = false;
        double energy_jump      = 0.0; // H+ - H-
        Vector consistency;            // consistency residual of pre.p
        std::vector<JumpRoot> roots;   // interior resets: roots known to the jump solver
    };

    struct HybridArc
    {
        std::vector<ContinuousArc> arcs;
        std::vector<ResetEvent> events;
        double running_cost  = 0.0;
        double terminal_cost = 0.0;
        double cost          = 0.0;
        CotangentState terminal;
    };

    /**
     * Optimal control along a solved hybrid arc at time t, re-integrated from the
     * nearest earlier sample. At a reset time the post-reset piece is used.
     */
    inline Vector control_at(const HybridProblem& problem, const HybridArc& arc, double t,
                             const IntegratorOptions& opts = {})
    {
        if (arc.arcs.empty())
        {
            throw DomainError("arc has no continuous pieces");
        }
        const ContinuousArc* piece = &arc.arcs.front();
        for (const auto& a : arc.arcs)
        {
            if (a.start.t <= t)
            {
                piece = &a;
            }
        }
        const auto& samples = piece->samples;
        std::size_t k       = 0;
        while (k + 1 < samples.size() && samples[k + 1].t <= t)
        {
            ++k;
        }
        const auto& s = samples[k];
        if (s.t >= t || k + 1 == samples.size())
        {
            return s.u;
        }
        const auto local = flow_until_guard(problem, {s.x, s.p, s.t}, t, opts);
        return optimal_control(problem, local.end.x, local.end.p);
    }

    /// Realized number of guard crossings differs from the hypothesis.
    struct ResetCountMismatch
    {
        int expected = 0;
        int realized = 0;
        /// Distance in time between the horizon end and the missing (or extra)
        /// crossing; infinity if the missing crossing is not found within one
        /// more horizon length.
        double penalty = std::numeric_limits<double>::infinity();
    };

    struct SimulationResult
    {
        HybridArc arc;
        Vector residual;
        std::optional<ResetCountMismatch> mismatch;
        std::optional<std::string> failure; // inner jump selection failure
        int branch_switches = 0;

        bool ok() const { return !mismatch && !failure; }
    };

    /// Warm-start memory for the interior jump solves, one slot per reset.
    struct JumpSeeds
    {
        std::vector<std::optional<Vector>> mu;
        bool collect_roots = false;
    };

    namespace detail
    {
        inline double missing_crossing_penalty(const ShootingSpec& spec, const CotangentState& from)
        {
            const double horizon = spec.problem.T - spec.problem.t0;
            const auto arc       = flow_until_guard(spec.problem, from, spec.problem.T + horizon, spec.integrator);
            return arc.hit_guard() ? arc.end.t - spec.problem.T : std::numeric_limits<double>::infinity();
        }
    } // namespace detail

    /// Apply the initial co-state slice of a decision vector.
    inline CotangentState initial_state(const ShootingSpec& spec, const Vector& decision)
    {
        return {spec.x0, decision.head(spec.n()), spec.problem.t0};
    }

    /**
     * Forward-simulate the extremal encoded by a decision vector and assemble the
     * shooting residual. Wrong reset counts and inner jump failures come back as
     * structured failures rather than exceptions.
     */
    inline SimulationResult simulate_with_spec(const ShootingSpec& spec, const Vector& decision,
                                               JumpSeeds* seeds = nullptr)
    {
        if (decision.size() != spec.decision_len())
        {
            throw DomainError("decision vector has the wrong length");
        }
        const auto& problem = spec.problem;
        const int n         = spec.n();
        const int N         = spec.reset_count;
        const double T      = problem.T;
        const double inf    = std::numeric_limits<double>::infinity();

        SimulationResult out;
        out.residual = Vector::Zero(spec.residual_len());
        Eigen::Index row = 0;

        CotangentState state = initial_state(spec, decision);
        for (int k = 1; k <= N; ++k)
        {
            auto arc = flow_until_guard(problem, state, T, spec.integrator);
            out.arc.running_cost += arc.running_cost;
            const bool hit = arc.hit_guard();
            out.arc.arcs.push_back(std::move(arc));
            if (!hit)
            {
                out.mismatch = ResetCountMismatch{N, k - 1, detail::missing_crossing_penalty(spec, out.arc.arcs.back().end)};
                return out;
            }
            ResetEvent ev;
            ev.pre = out.arc.arcs.back().end;
            ev.t   = ev.pre.t;
            const GuardFrame frame = build_guard_frame(problem, ev.pre.x);
            ev.consistency         = consistency_residual(frame, ev.pre.p);
            if (k == 1)
            {
                out.residual.segment(row, ev.consistency.size()) = ev.consistency;
                row += ev.consistency.size();
            }
            if (k < N)
            {
                JumpSolveOptions jopts;
                jopts.integrator         = spec.integrator;
                jopts.newton             = spec.newton;
                jopts.newton.tolerance   = spec.jump_tolerance;
                jopts.consistency_tol    = inf;
                jopts.collect_all_roots  = seeds && seeds->collect_roots;
                std::optional<Vector> warm;
                if (seeds && static_cast<int>(seeds->mu.size()) >= k && seeds->mu[k - 1])
                {
                    warm = seeds->mu[k - 1];
                }
                jopts.initial_mu = warm;
                try
                {
                    auto sol = solve_jump(problem, frame, ev.pre, T, jopts);
                    if (warm && (sol.candidate.mu - *warm).norm() > 0.1 * (1.0 + warm->norm()))
                    {
                        ++out.branch_switches;
                    }
                    if (seeds)
                    {
                        if (static_cast<int>(seeds->mu.size()) < k)
                        {
                            seeds->mu.resize(static_cast<std::size_t>(k));
                        }
                        seeds->mu[k - 1] = sol.candidate.mu;
                    }
                    ev.jump  = sol.candidate;
                    ev.roots = std::move(sol.roots);
                }
                catch (const Error& e)
                {
                    out.failure = std::string("interior reset ") + std::to_string(k) + ": " + e.what();
                    return out;
                }
            }
            else
            {
                try
                {
                    ev.jump = final_jump(problem, frame, ev.pre, decision.segment(n, spec.final_free_len()), inf);
                }
                catch (const Error& e)
                {
                    out.failure = std::string("final reset: ") + e.what();
                    return out;
                }
                ev.final = true;
            }
            ev.energy_jump = energy_residual(problem, ev.jump);
            state          = ev.jump.post();
            out.arc.events.push_back(std::move(ev));
        }

        auto last = flow_until_guard(problem, state, T, spec.integrator);
        out.arc.running_cost += last.running_cost;
        const bool extra = last.hit_guard();
        out.arc.arcs.push_back(std::move(last));
        if (extra)
        {
            out.mismatch = ResetCountMismatch{N, N + 1, T - out.arc.arcs.back().end.t};
            return out;
        }

        out.arc.terminal      = out.arc.arcs.back().end;
        out.arc.terminal_cost = problem.terminal(out.arc.terminal.x);
        out.arc.cost          = out.arc.running_cost + out.arc.terminal_cost;

        const Vector& xT = out.arc.terminal.x;
        for (const auto& psi : problem.target_fns)
        {
            out.residual(row++) = psi(xT);
        }
        if (spec.has_transversality())
        {
            Vector trans = out.arc.terminal.p - terminal_gradient(problem, xT);
            const Vector nu = decision.tail(spec.multiplier_len());
            for (int j = 0; j < spec.target_count(); ++j)
            {
                trans -= nu(j) * fd_gradient(problem.target_fns[static_cast<std::size_t>(j)], xT);
            }
            out.residual.segment(row, n) = trans;
            row += n;
        }
        return out;
    }

    /**
     * Build the full co-state from its decision slice and report the admissibility
     * residual at the first crossing. The full p0 is carried as unknowns; the
     * n-1-r admissibility equations leave r+1 effective degrees of freedom.
     */
    struct InitialCostate
    {
        Vector p0;
        std::optional<Vector> residual; // nullopt if the flow never meets the guard
    };

    inline InitialCostate parameterize_initial_costate(const HybridProblem& problem, const Vector& x0,
                                                       const Vector& params, double t_max,
                                                       const IntegratorOptions& opts = {})
    {
        if (params.size() != problem.dim_state)
        {
            throw DomainError("initial co-state parameters must have length n");
        }
        InitialCostate out;
        out.p0       = params;
        out.residual = admissibility_residual(problem, {x0, params, problem.t0}, t_max, opts);
        return out;
    }

    struct ShootingResult
    {
        HybridArc arc;
        Vector decision;
        Vector residual;
        double residual_norm = std::numeric_limits<double>::infinity();
        int iterations       = 0;
        bool converged       = false;
        int branches_tried   = 0;
        int branch_switches  = 0;
    };

    namespace detail
    {
        inline ShootingResult newton_on_branch(const ShootingSpec& spec, JumpSeeds seeds)
        {
            int switches = 0;
            ResidualFn residual = [&](const Vector& d) -> std::optional<Vector> {
                auto sim = simulate_with_spec(spec, d, &seeds);
                switches += sim.branch_switches;
                if (!sim.ok())
                {
                    return std::nullopt;
                }
                return sim.residual;
            };
            const auto report = damped_newton(residual, spec.initial_guess, spec.newton);

            ShootingResult out;
            out.decision      = report.solution;
            out.iterations    = report.iterations;
            out.residual_norm = report.residual_norm;
            out.branch_switches = switches;
            auto sim          = simulate_with_spec(spec, report.solution, &seeds);
            if (sim.ok())
            {
                out.arc           = std::move(sim.arc);
                out.residual      = sim.residual;
                out.residual_norm = max_abs(sim.residual);
                out.converged     = out.residual_norm <= spec.newton.tolerance * 10.0;
            }
            return out;
        }
    } // namespace detail

    /**
     * Solve the shooting problem by damped Newton. When the interior jump at the
     * initial guess has several roots, each root seeds its own Newton run and the
     * converged arc of least cost is returned.
     */
    inline ShootingResult solve_report(const ShootingSpec& spec)
    {
        JumpSeeds probe;
        probe.collect_roots = true;
        const auto first    = simulate_with_spec(spec, spec.initial_guess, &probe);

        std::vector<JumpSeeds> branches;
        branches.push_back(JumpSeeds{probe.mu, false});
        if (first.ok())
        {
            for (std::size_t k = 0; k < first.arc.events.size(); ++k)
            {
                const auto& roots = first.arc.events[k].roots;
                for (std::size_t j = 1; j < roots.size() && branches.size() < 16; ++j)
                {
                    JumpSeeds alt{probe.mu, false};
                    alt.mu[k] = roots[j].mu;
                    branches.push_back(std::move(alt));
                }
            }
        }

        ShootingResult best;
        bool have = false;
        for (auto& seeds : branches)
        {
            auto result           = detail::newton_on_branch(spec, seeds);
            result.branches_tried = static_cast<int>(branches.size());
            const bool better     = !have || (result.converged && !best.converged)
                                || (result.converged == best.converged
                                    && (result.converged ? result.arc.cost < best.arc.cost
                                                         : result.residual_norm < best.residual_norm));
            if (better)
            {
                best = std::move(result);
                have = true;
            }
        }
        return best;
    }

    inline ShootingResult solve(const ShootingSpec& spec)
    {
        auto result = solve_report(spec);
        if (!result.converged)
        {
            throw NoConvergence("shooting with " + std::to_string(spec.reset_count) + " resets did not converge",
                                result.residual_norm);
        }
        return result;
    }

    struct ScanRow
    {
        int reset_count      = 0;
        double cost          = std::numeric_limits<double>::quiet_NaN();
        double residual_norm = std::numeric_limits<double>::infinity();
        bool converged       = false;
        std::string message;
        std::optional<ShootingResult> result;
    };

    struct ScanTable
    {
        std::vector<ScanRow> rows;
        std::optional<int> minimizer; // index into rows of the least-cost converged row
    };

    using SeedProvider = std::function<std::optional<Vector>(int reset_count)>;

    /// Numerical settings shared by every row of a scan.
    struct SolverSettings
    {
        NewtonOptions newton{1e-9, 50, 1e-7, 30};
        IntegratorOptions integrator;
        double jump_tolerance = 1e-11;

        void apply(ShootingSpec& spec) const
        {
            spec.newton         = newton;
            spec.integrator     = integrator;
            spec.jump_tolerance = jump_tolerance;
        }
    };

    /// Solve for every reset count 0..n_max and mark the least-cost converged row.
    inline ScanTable scan_reset_counts(const HybridProblem& problem, const Vector& x0, int n_max,
                                       const SeedProvider& seeds, const SolverSettings& settings = {})
    {
        if (n_max < 0)
        {
            throw DomainError("n_max must be non-negative");
        }
        ScanTable table;
        for (int N = 0; N <= n_max; ++N)
        {
            ScanRow row;
            row.reset_count = N;
            try
            {
                auto guess = seeds ? seeds(N) : std::nullopt;
                if (!guess)
                {
                    ShootingSpec layout;
                    layout.problem     = problem;
                    layout.reset_count = N;
                    guess              = Vector::Zero(layout.decision_len());
                }
                auto spec = make_shooting_spec(problem, x0, N, *guess);
                settings.apply(spec);
                auto result     = solve_report(spec);
                row.converged     = result.converged;
                row.residual_norm = result.residual_norm;
                if (result.converged)
                {
                    row.cost = result.arc.cost;
                }
                else
                {
                    row.message = "did not converge";
                }
                row.result = std::move(result);
            }
            catch (const Error& e)
            {
                row.message = e.what();
            }
            table.rows.push_back(std::move(row));
        }
        for (std::size_t i = 0; i < table.rows.size(); ++i)
        {
            const auto& r = table.rows[i];
            if (r.converged && (!table.minimizer || r.cost < table.rows[static_cast<std::size_t>(*table.minimizer)].cost))
            {
                table.minimizer = static_cast<int>(i);
            }
        }
        return table;
    }
} // namespace hybrid_pmp
