#pragma once

// Direct-method cross-check of the indirect solver: forward simulation of the
// raw hybrid dynamics under piecewise-constant controls plus a penalty on the
// terminal constraints. Nothing here touches co-states or the Hamiltonian.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "integrator.hpp"
#include "problem.hpp"

namespace hybrid_pmp::oracle
{
    /// Piecewise-constant controls: row k of values holds u on [knots[k], knots[k+1]).
    struct ControlGrid
    {
        std::vector<double> knots;
        Matrix values;

        Eigen::Index intervals() const { return values.rows(); }
        double t0() const { return knots.front(); }
        double T() const { return knots.back(); }

        Vector at(double t) const
        {
            const auto it = std::upper_bound(knots.begin(), knots.end(), t);
            auto k        = static_cast<Eigen::Index>(it - knots.begin()) - 1;
            k             = std::clamp<Eigen::Index>(k, 0, intervals() - 1);
            return values.row(k).transpose();
        }

        static std::vector<double> uniform_knots(double t0, double T, Eigen::Index intervals)
        {
            std::vector<double> knots(static_cast<std::size_t>(intervals) + 1);
            for (Eigen::Index k = 0; k <= intervals; ++k)
            {
                knots[static_cast<std::size_t>(k)] =
                    k == intervals ? T : t0 + (T - t0) * static_cast<double>(k) / static_cast<double>(intervals);
            }
            return knots;
        }

        static ControlGrid zeros(const HybridProblem& problem, Eigen::Index intervals)
        {
            return {uniform_knots(problem.t0, problem.T, intervals), Matrix::Zero(intervals, problem.dim_control)};
        }

        /// Midpoint samples of a control signal on the given knots.
        static ControlGrid sample_on(std::vector<double> knots, int dim_control,
                                     const std::function<Vector(double)>& signal)
        {
            ControlGrid grid{std::move(knots), Matrix()};
            const auto K = static_cast<Eigen::Index>(grid.knots.size()) - 1;
            grid.values  = Matrix::Zero(std::max<Eigen::Index>(K, 0), dim_control);
            for (Eigen::Index k = 0; k < K; ++k)
            {
                const double mid = 0.5 * (grid.knots[static_cast<std::size_t>(k)] + grid.knots[static_cast<std::size_t>(k) + 1]);
                grid.values.row(k) = signal(mid).transpose();
            }
            return grid;
        }

        static ControlGrid sample(const HybridProblem& problem, Eigen::Index intervals,
                                  const std::function<Vector(double)>& signal)
        {
            return sample_on(uniform_knots(problem.t0, problem.T, intervals), problem.dim_control, signal);
        }
    };

    struct DirectResult
    {
        double cost      = 0.0;
        double violation = 0.0; // ||psi(x(T))||
        int bounce_count = 0;
        std::vector<double> impact_times;
        std::vector<double> times;
        std::vector<Vector> states;
        Vector terminal;
    };

    /**
     * Simulate the controlled hybrid system from x0 under a time-dependent control
     * signal whose smooth pieces are separated by the given breakpoints. Resets are
     * applied at every guard crossing, however many occur.
     */
    inline DirectResult simulate_open_loop(const HybridProblem& problem, const Vector& x0,
                                           const std::function<Vector(double)>& control,
                                           const std::vector<double>& breakpoints,
                                           const IntegratorOptions& opts = {})
    {
        const Eigen::Index n = problem.dim_state;
        DirectResult out;
        RawState y(static_cast<std::size_t>(n) + 1, 0.0);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            y[static_cast<std::size_t>(i)] = x0(i);
        }

        auto state_of = [n](const RawState& s) { return Vector(Eigen::Map<const Vector>(s.data(), n)); };
        // Current smooth piece; the control is sampled strictly inside it so that
        // a piecewise signal never leaks across a breakpoint.
        double piece_lo = problem.t0;
        double piece_hi = problem.T;
        auto rhs        = [&](double t, const RawState& s, RawState& ds) {
            const double eps = 1e-12 * (1.0 + std::abs(t));
            const Vector x   = state_of(s);
            const Vector u   = control(std::clamp(t, piece_lo + eps, std::max(piece_lo + eps, piece_hi - eps)));
            const Vector dx = problem.dynamics(x, u);
            for (Eigen::Index i = 0; i < n; ++i)
            {
                ds[static_cast<std::size_t>(i)] = dx(i);
            }
            ds[static_cast<std::size_t>(n)] = problem.running_cost(x, u);
        };
        auto guard  = [&](const RawState& s) { return problem.guard_fn(state_of(s)); };
        auto accept = [&](const RawState& s) { return problem.direction_ok(state_of(s)); };

        out.times.push_back(problem.t0);
        out.states.push_back(x0);

        std::vector<double> stops;
        for (double b : breakpoints)
        {
            if (b > problem.t0 && b < problem.T)
            {
                stops.push_back(b);
            }
        }
        stops.push_back(problem.T);

        double t            = problem.t0;
        double dwell_until  = problem.t0 - 1.0;
        for (double stop : stops)
        {
            piece_lo = t;
            piece_hi = stop;
            while (t < stop)
            {
                IntegratorOptions piece = opts;
                piece.dwell             = t < dwell_until ? dwell_until - t : 0.0;
                const auto raw          = integrate_until_event(rhs, guard, accept, y, t, stop, piece);
                for (std::size_t k = 1; k < raw.times.size(); ++k)
                {
                    out.times.push_back(raw.times[k]);
                    out.states.push_back(state_of(raw.states[k]));
                }
                y = raw.states.back();
                t = raw.times.back();
                if (raw.reason == Termination::guard_hit)
                {
                    const Vector post = problem.reset_fn(state_of(y));
                    for (Eigen::Index i = 0; i < n; ++i)
                    {
                        y[static_cast<std::size_t>(i)] = post(i);
                    }
                    out.impact_times.push_back(t);
                    ++out.bounce_count;
                    dwell_until = t + opts.dwell;
                    out.times.push_back(t);
                    out.states.push_back(post);
                }
                else
                {
                    t = stop;
                }
            }
        }

        out.terminal = state_of(y);
        out.cost     = y[static_cast<std::size_t>(n)] + problem.terminal(out.terminal);
        double sq    = 0.0;
        for (const auto& psi : problem.target_fns)
        {
            const double v = psi(out.terminal);
            sq += v * v;
        }
        out.violation = std::sqrt(sq);
        return out;
    }

    inline DirectResult direct_cost(const HybridProblem& problem, const Vector& x0, const ControlGrid& controls,
                                    const IntegratorOptions& opts = {})
    {
        const Eigen::Index K = controls.intervals();
        if (controls.knots.size() != static_cast<std::size_t>(K) + 1)
        {
            throw DomainError("control grid needs one more knot than intervals");
        }
        if (K > 0 && controls.values.cols() != problem.dim_control)
        {
            throw DomainError("control grid has the wrong number of columns");
        }
        if (!std::is_sorted(controls.knots.begin(), controls.knots.end()))
        {
            throw DomainError("control grid knots must be non-decreasing");
        }
        HybridProblem horizon = problem;
        horizon.t0            = controls.t0();
        horizon.T             = controls.T();
        if (K == 0)
        {
            return simulate_open_loop(horizon, x0, [&](double) { return Vector(Vector::Zero(problem.dim_control)); },
                                      {}, opts);
        }
        const std::vector<double> breaks(controls.knots.begin() + 1, controls.knots.end() - 1);
        return simulate_open_loop(horizon, x0, [&](double t) { return controls.at(t); }, breaks, opts);
    }

    struct RefineOptions
    {
        int iterations        = 2000;
        double penalty_weight = 1e4;
        std::uint64_t seed    = 42;
        double initial_sigma  = 0.05;
    };

    struct DirectCandidate
    {
        ControlGrid controls;
        DirectResult simulation;
        double penalized_cost = 0.0;
        int iterations        = 0;
        int accepted          = 0;
        std::uint64_t seed    = 0;
    };

    inline double penalized(const DirectResult& r, double weight)
    {
        return r.cost + weight * r.violation * r.violation;
    }

    /**
     * Random-perturbation polishing of piecewise-constant controls under the
     * penalized objective. Each proposal perturbs one control channel on a random
     * window of intervals with a smooth bump; improvements are kept and the step
     * size adapts to the acceptance rate. Deterministic for a fixed seed.
     */
    inline DirectCandidate refine(const HybridProblem& problem, const Vector& x0, const ControlGrid& seed_controls,
                                  const RefineOptions& opts = {}, const IntegratorOptions& integrator = {})
    {
        DirectCandidate best;
        best.controls       = seed_controls;
        best.simulation     = direct_cost(problem, x0, best.controls, integrator);
        best.penalized_cost = penalized(best.simulation, opts.penalty_weight);
        best.seed           = opts.seed;

        const Eigen::Index K = seed_controls.intervals();
        const Eigen::Index m = seed_controls.values.cols();
        if (K == 0 || m == 0)
        {
            return best;
        }

        std::mt19937_64 rng(opts.seed);
        std::uniform_int_distribution<Eigen::Index> pick_interval(0, K - 1);
        std::uniform_int_distribution<Eigen::Index> pick_channel(0, m - 1);
        std::uniform_int_distribution<Eigen::Index> pick_width(1, std::max<Eigen::Index>(1, K / 5));
        std::normal_distribution<double> normal(0.0, 1.0);
        double sigma = opts.initial_sigma;

        for (int it = 0; it < opts.iterations; ++it)
        {
            ++best.iterations;
            const Eigen::Index centre = pick_interval(rng);
            const Eigen::Index width  = pick_width(rng);
            const Eigen::Index chan   = pick_channel(rng);
            const double amplitude    = sigma * normal(rng);

            ControlGrid trial = best.controls;
            for (Eigen::Index k = std::max<Eigen::Index>(0, centre - width);
                 k <= std::min<Eigen::Index>(K - 1, centre + width); ++k)
            {
                const double s    = static_cast<double>(k - centre) / static_cast<double>(width + 1);
                const double bump = std::cos(0.5 * std::numbers::pi * s);
                trial.values(k, chan) += amplitude * bump * bump;
            }
            DirectResult sim;
            try
            {
                sim = direct_cost(problem, x0, trial, integrator);
            }
            catch (const StepFailure&)
            {
                sigma *= 0.9;
                continue;
            }
            const double value = penalized(sim, opts.penalty_weight);
            if (value < best.penalized_cost)
            {
                best.controls       = std::move(trial);
                best.simulation     = std::move(sim);
                best.penalized_cost = value;
                ++best.accepted;
                sigma = std::min(1.0, sigma * 1.2);
            }
            else
            {
                sigma = std::max(1e-6, sigma * 0.97);
            }
        }
        return best;
    }
} // namespace hybrid_pmp::oracle
