#pragma once

/**
 * Controlled bouncing ball with an internal variable.
 *
 *   x' = y,  y' = -1 + u,  z' = v,          x > 0
 *   (x, y, z) -> (x, -y, 1)                  x = 0, y < 0
 *   min 1/2 int_0^5 (u^2 + v^2 + z^2) dt,    x(5) = 1, y(5) = 0, z(5) = 0
 *
 * The reset collapses z, so its restriction to the guard {x = 0} has rank 1 and
 * the fibers are the z-lines. Optimal controls are u = -p_y, v = -p_z and
 *
 *   H = -1/2 p_y^2 - 1/2 p_z^2 + 1/2 z^2 + p_x y - p_y.
 */

#include <cmath>
#include <optional>

#include "../reset_jump.hpp"
#include "../shooting.hpp"

namespace hybrid_pmp::bouncing_ball
{
    inline constexpr const char* example_id = "bouncing_ball_internal";

    struct BallState
    {
        double x  = 0.0;
        double y  = 0.0;
        double z  = 0.0;
        double px = 0.0;
        double py = 0.0;
        double pz = 0.0;

        Vector position() const { return Vector{{x, y, z}}; }
        Vector costate() const { return Vector{{px, py, pz}}; }
        CotangentState cotangent(double t = 0.0) const { return {position(), costate(), t}; }

        static BallState from(const CotangentState& s)
        {
            return {s.x(0), s.x(1), s.x(2), s.p(0), s.p(1), s.p(2)};
        }
    };

    inline Vector initial_state() { return Vector{{0.5, 0.0, 1.0}}; }

    inline HybridProblem make_problem()
    {
        HybridProblem p;
        p.name        = example_id;
        p.dim_state   = 3;
        p.dim_control = 2;
        p.dynamics    = [](const Vector& x, const Vector& u) { return Vector{{x(1), -1.0 + u(0), u(1)}}; };
        p.running_cost = [](const Vector& x, const Vector& u) {
            return 0.5 * (u(0) * u(0) + u(1) * u(1) + x(2) * x(2));
        };
        p.guard_fn        = [](const Vector& x) { return x(0); };
        p.guard_gradient  = [](const Vector&) { return Vector{{1.0, 0.0, 0.0}}; };
        p.guard_direction = [](const Vector& x) { return x(1) < 0.0; };
        p.reset_fn        = [](const Vector& x) { return Vector{{x(0), -x(1), 1.0}}; };
        p.reset_jacobian  = [](const Vector&) {
            Matrix j = Matrix::Zero(3, 3);
            j(0, 0)  = 1.0;
            j(1, 1)  = -1.0;
            return j;
        };
        p.target_fns = {
            [](const Vector& x) { return x(0) - 1.0; },
            [](const Vector& x) { return x(1); },
            [](const Vector& x) { return x(2); },
        };
        p.t0         = 0.0;
        p.T          = 5.0;
        p.reset_rank = 1;
        p.control_minimizer = [](const Vector&, const Vector& costate) {
            return Vector{{-costate(1), -costate(2)}};
        };
        p.hamiltonian_gradient = [](const Vector& x, const Vector& costate) {
            return HamiltonianGradient{Vector{{x(1), -costate(1) - 1.0, -costate(2)}},
                                       Vector{{0.0, costate(0), x(2)}}};
        };
        return p;
    }

    /// The optimized Hamiltonian written out in closed form.
    inline double hamiltonian(const BallState& s)
    {
        return -0.5 * s.py * s.py - 0.5 * s.pz * s.pz + 0.5 * s.z * s.z + s.px * s.y - s.py;
    }

    /// Time at which p_z vanishes starting from z(t0) = z0, p_z(t0) = A; nullopt outside 0 <= A < z0.
    inline std::optional<double> closed_form_impact_time(double z0, double A, double t0)
    {
        if (!(A >= 0.0 && A < z0))
        {
            return std::nullopt;
        }
        return 0.5 * std::log((z0 + A) / (z0 - A)) + t0;
    }

    /// Inverse of closed_form_impact_time: the p_z(t0) that makes p_z vanish at t_star.
    inline double closed_form_impact_costate(double z0, double t_star, double t0)
    {
        const double e = std::exp(2.0 * (t_star - t0));
        return (e - 1.0) / (e + 1.0) * z0;
    }

    struct ZCostate
    {
        double z  = 0.0;
        double pz = 0.0;
    };

    /// Exact (z, p_z) after elapsed time tau from (z0, A); the pair decouples from (x, y).
    inline ZCostate closed_form_z_flow(double z0, double A, double tau)
    {
        const double ep = std::exp(tau);
        const double em = std::exp(-tau);
        return {0.5 * (z0 - A) * ep + 0.5 * (z0 + A) * em, 0.5 * (A - z0) * ep + 0.5 * (A + z0) * em};
    }

    /**
     * Residuals of the closed-form admissible set at s.
     *
     * Component 0 is the general relation
     *   p_x - [3/tau (1 + p_y) - 6x/tau^3 - 6y/tau^2],
     * component 1 the post-reset specialization
     *   p_y - [tau/3 p_x - (2 y-/tau + 1)]  with y- = -y,
     * meaningful at x = 0. tau = 1/2 ln((z + p_z)/(z - p_z)) is the time at which
     * p_z vanishes (z = 1 after a reset).
     */
    inline Vector closed_form_xi_residual(const BallState& s)
    {
        if (!(s.z > 0.0) || !(std::abs(s.pz) < s.z))
        {
            throw DomainError("closed-form admissible set needs |p_z| < z");
        }
        const double tau = 0.5 * std::log((s.z + s.pz) / (s.z - s.pz));
        if (!(tau > 0.0))
        {
            throw DomainError("p_z must be positive for the ball to reach p_z = 0 in forward time");
        }
        const double y_pre = -s.y;
        Vector r(2);
        r(0) = s.px - (3.0 / tau * (1.0 + s.py) - 6.0 * s.x / (tau * tau * tau) - 6.0 * s.y / (tau * tau));
        r(1) = s.py - (tau / 3.0 * s.px - (2.0 * y_pre / tau + 1.0));
        return r;
    }

    /// The p_x that puts (x, y, z; p_x, p_y, p_z) on the admissible set.
    inline double closed_form_admissible_px(const BallState& s)
    {
        BallState probe = s;
        probe.px        = 0.0;
        return -closed_form_xi_residual(probe)(0);
    }

    /**
     * Lifted reset family at a pre-impact state with p_z = 0:
     *   p_x+ = 1/y- [1/2 (1 - z^2 - A^2) - p_x- y- + 2 p_y-],  p_y+ = -p_y-,  p_z+ = A.
     */
    inline BallState closed_form_jump(const BallState& pre, double A)
    {
        if (std::abs(pre.pz) > 1e-8)
        {
            throw InconsistentCostate(std::abs(pre.pz));
        }
        BallState post;
        post.x  = pre.x;
        post.y  = -pre.y;
        post.z  = 1.0;
        post.px = (0.5 * (1.0 - pre.z * pre.z - A * A) - pre.px * pre.y + 2.0 * pre.py) / pre.y;
        post.py = -pre.py;
        post.pz = A;
        return post;
    }

    /// Pre-impact state of the jump worked out for the example.
    inline BallState demo_pre_state() { return {0.0, -1.0, 0.1, 1.0, 1.0, 0.0}; }

    /// Shooting seeds per reset count: [p0 (3) | A of the final jump (N >= 1)].
    inline std::optional<Vector> seed(int reset_count)
    {
        switch (reset_count)
        {
        case 0: return Vector{{-0.05, -1.1, 1.0}};
        case 1: return Vector{{-0.64, -0.37, 0.79, 1.0}};
        case 2: return Vector{{-0.11, 0.17, 0.72, 1.09}};
        case 3: return Vector{{1.15, 0.46, 0.74, 1.10}};
        default: return std::nullopt;
        }
    }

    struct InteriorJump
    {
        int reset_count = 0;
        ResetEvent event;
    };

    struct ReproductionReport
    {
        ScanTable table;
        JumpSolution demo_jump;
        std::vector<InteriorJump> interior_jumps; // first interior reset of every converged N >= 2 arc
    };

    inline JumpSolution solve_demo_jump(const SolverSettings& settings = {})
    {
        const auto problem = make_problem();
        JumpSolveOptions opts;
        opts.integrator = settings.integrator;
        return solve_jump(problem, demo_pre_state().cotangent(problem.t0), problem.T, opts);
    }

    /// Reset-count scan from the nominal initial state for N = 0..3 plus the jump diagnostics.
    inline ReproductionReport reproduce_results(const SolverSettings& settings = {})
    {
        ReproductionReport report;
        report.table     = scan_reset_counts(make_problem(), initial_state(), 3, seed, settings);
        report.demo_jump = solve_demo_jump(settings);
        for (const auto& row : report.table.rows)
        {
            if (row.converged && row.reset_count >= 2 && row.result && !row.result->arc.events.empty())
            {
                report.interior_jumps.push_back({row.reset_count, row.result->arc.events.front()});
            }
        }
        return report;
    }
} // namespace hybrid_pmp::bouncing_ball
