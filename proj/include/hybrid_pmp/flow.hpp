#pragma once

#include <optional>
#include <vector>

#include "hamiltonian.hpp"
#include "integrator.hpp"

namespace hybrid_pmp
{
    /// A point (x, p) of phase space at time t.
    struct CotangentState
    {
        Vector x;
        Vector p;
        double t = 0.0;
    };

    struct ArcSample
    {
        double t = 0.0;
        Vector x;
        Vector p;
        Vector u;
        double H = 0.0;
    };

    /// Piece of an extremal between two resets (or a reset and the horizon).
    struct ContinuousArc
    {
        std::vector<ArcSample> samples;
        CotangentState start;
        CotangentState end;
        double running_cost = 0.0;
        Termination reason  = Termination::horizon_end;

        bool hit_guard() const { return reason == Termination::guard_hit; }
    };

    namespace detail
    {
        inline RawState pack(const CotangentState& s)
        {
            const auto n = s.x.size();
            RawState y(2 * n + 1, 0.0);
            for (Eigen::Index i = 0; i < n; ++i)
            {
                y[i]     = s.x(i);
                y[n + i] = s.p(i);
            }
            return y;
        }

        inline Vector head(const RawState& y, Eigen::Index n)
        {
            return Eigen::Map<const Vector>(y.data(), n);
        }

        inline Vector segment(const RawState& y, Eigen::Index start, Eigen::Index n)
        {
            return Eigen::Map<const Vector>(y.data() + start, n);
        }
    } // namespace detail

    /**
     * Integrate Hamilton's equations from start until the state meets the guard
     * (downward crossing, direction predicate satisfied) or t_max is reached.
     * The running cost is integrated as an extra state component.
     */
    inline ContinuousArc flow_until_guard(const HybridProblem& problem, const CotangentState& start, double t_max,
                                          const IntegratorOptions& opts = {})
    {
        const Eigen::Index n = problem.dim_state;
        auto rhs = [&](double /*t*/, const RawState& y, RawState& dy) {
            const Vector x = detail::head(y, n);
            const Vector p = detail::segment(y, n, n);
            const auto field = hamiltonian_rhs(problem, x, p);
            const Vector u   = optimal_control(problem, x, p);
            for (Eigen::Index i = 0; i < n; ++i)
            {
                dy[i]     = field.x_dot(i);
                dy[n + i] = field.p_dot(i);
            }
            dy[2 * n] = problem.running_cost(x, u);
        };
        auto guard  = [&](const RawState& y) { return problem.guard_fn(detail::head(y, n)); };
        auto accept = [&](const RawState& y) { return problem.direction_ok(detail::head(y, n)); };

        const RawTrajectory raw = integrate_until_event(rhs, guard, accept, detail::pack(start), start.t, t_max, opts);

        ContinuousArc arc;
        arc.reason = raw.reason;
        arc.samples.reserve(raw.times.size());
        for (std::size_t k = 0; k < raw.times.size(); ++k)
        {
            ArcSample s;
            s.t          = raw.times[k];
            s.x          = detail::head(raw.states[k], n);
            s.p          = detail::segment(raw.states[k], n, n);
            const auto h = optimized_hamiltonian(problem, s.x, s.p);
            s.u          = h.control;
            s.H          = h.H;
            arc.samples.push_back(std::move(s));
        }
        arc.start        = {arc.samples.front().x, arc.samples.front().p, arc.samples.front().t};
        arc.end          = {arc.samples.back().x, arc.samples.back().p, arc.samples.back().t};
        arc.running_cost = raw.states.back()[2 * n];
        return arc;
    }

    /// Elapsed time until the next guard crossing, or nullopt if none occurs before t_max.
    inline std::optional<double> return_time(const HybridProblem& problem, const CotangentState& state, double t_max,
                                             const IntegratorOptions& opts = {})
    {
        const auto arc = flow_until_guard(problem, state, t_max, opts);
        if (!arc.hit_guard())
        {
            return std::nullopt;
        }
        return arc.end.t - state.t;
    }
} // namespace hybrid_pmp
