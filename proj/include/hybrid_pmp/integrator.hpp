#pragma once

#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace hybrid_pmp
{
    struct IntegratorOptions
    {
        double rel_tol = 1e-10;
        double abs_tol = 1e-12;
        /// Guard detection stays disarmed for this long after the start.
        double dwell = 1e-6;
        /// Event localization stops once |g| falls below this.
        double event_tol = 1e-12;
        /// When positive, samples are emitted on a uniform grid instead of at step ends.
        double sample_dt = 0.0;
        std::size_t max_steps = 2'000'000;
    };

    enum class Termination
    {
        guard_hit,
        horizon_end,
    };

    using RawState = std::vector<double>;

    struct RawTrajectory
    {
        std::vector<double> times;
        std::vector<RawState> states;
        Termination reason = Termination::horizon_end;
    };

    /**
     * Integrate y' = rhs(t, y) from (t0, y0) to t_max with an adaptive Dormand-Prince
     * 5(4) pair, stopping at the first armed downward zero crossing of guard(y)
     * at which accept(y) holds. The crossing is refined on the dense output by
     * bracketed root finding.
     */
    template <class Rhs, class Guard, class Accept>
    RawTrajectory integrate_until_event(Rhs&& rhs, Guard&& guard, Accept&& accept, const RawState& y0, double t0,
                                        double t_max, const IntegratorOptions& opts)
    {
        namespace odeint = boost::numeric::odeint;
        using stepper_t  = odeint::runge_kutta_dopri5<RawState>;

        RawTrajectory out;
        out.times.push_back(t0);
        out.states.push_back(y0);
        if (!(t_max > t0))
        {
            out.reason = Termination::horizon_end;
            return out;
        }

        auto system = [&rhs](const RawState& y, RawState& dy, double t) { rhs(t, y, dy); };

        auto stepper = odeint::make_dense_output(opts.abs_tol, opts.rel_tol, stepper_t());
        const double span = t_max - t0;
        stepper.initialize(y0, t0, std::min(1e-4, span));

        const double armed_at = t0 + opts.dwell;
        double next_sample    = t0 + opts.sample_dt;
        RawState probe(y0.size());

        auto state_at = [&](double t) {
            stepper.calc_state(t, probe);
            return probe;
        };
        auto emit_until = [&](double t_stop) {
            if (opts.sample_dt <= 0.0)
            {
                return;
            }
            while (next_sample < t_stop - 1e-12 * (1.0 + std::abs(t_stop)))
            {
                out.times.push_back(next_sample);
                out.states.push_back(state_at(next_sample));
                next_sample += opts.sample_dt;
            }
        };
        auto finish = [&](double t_end, Termination reason) {
            emit_until(t_end);
            RawState y_end = state_at(t_end);
            if (out.times.back() >= t_end)
            {
                out.times.back()  = t_end;
                out.states.back() = y_end;
            }
            else
            {
                out.times.push_back(t_end);
                out.states.push_back(std::move(y_end));
            }
            out.reason = reason;
            return out;
        };

        std::size_t steps = 0;
        while (true)
        {
            if (++steps > opts.max_steps)
            {
                throw StepFailure("step budget exhausted before reaching the horizon");
            }
            std::pair<double, double> step;
            try
            {
                step = stepper.do_step(system);
            }
            catch (const odeint::step_adjustment_error& e)
            {
                throw StepFailure(std::string("step size controller failed: ") + e.what());
            }
            const double t_prev = step.first;
            const double t_new  = step.second;
            if (!(t_new > t_prev) || t_new - t_prev < 1e-15 * (1.0 + std::abs(t_new)))
            {
                throw StepFailure("step size underflow");
            }
            for (double v : stepper.current_state())
            {
                if (!std::isfinite(v))
                {
                    throw StepFailure("non-finite state during integration");
                }
            }

            const double t_hi = std::min(t_new, t_max);
            if (t_hi > armed_at)
            {
                const double t_lo = std::max(t_prev, armed_at);
                const double g_lo = guard(state_at(t_lo));
                const double g_hi = guard(state_at(t_hi));
                if (g_lo > 0.0 && g_hi <= 0.0)
                {
                    double t_event = t_hi;
                    if (g_hi < -opts.event_tol)
                    {
                        auto g_of_t = [&](double t) { return guard(state_at(t)); };
                        std::uintmax_t iters = 200;
                        const double eps     = std::numeric_limits<double>::epsilon();
                        auto tol = [&](double a, double b) {
                            if (std::abs(b - a) <= 4.0 * eps * std::max(1.0, std::abs(a)))
                            {
                                return true;
                            }
                            const double mid = 0.5 * (a + b);
                            return std::abs(g_of_t(mid)) <= opts.event_tol * 1e-2;
                        };
                        auto bracket = boost::math::tools::toms748_solve(g_of_t, t_lo, t_hi, g_lo, g_hi, tol, iters);
                        double best  = std::abs(g_hi);
                        for (double t : {bracket.first, 0.5 * (bracket.first + bracket.second), bracket.second})
                        {
                            const double g = std::abs(g_of_t(t));
                            if (g < best)
                            {
                                best    = g;
                                t_event = t;
                            }
                        }
                    }
                    if (accept(state_at(t_event)))
                    {
                        return finish(t_event, Termination::guard_hit);
                    }
                }
            }
            if (t_new >= t_max)
            {
                return finish(t_max, Termination::horizon_end);
            }
            emit_until(t_new);
            if (opts.sample_dt <= 0.0)
            {
                out.times.push_back(t_new);
                out.states.push_back(stepper.current_state());
            }
        }
    }
} // namespace hybrid_pmp
