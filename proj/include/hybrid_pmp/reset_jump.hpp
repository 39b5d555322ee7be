#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

#include "flow.hpp"
#include "newton.hpp"

namespace hybrid_pmp
{
    /// One point of the lifted reset family: p+ = p- o pinv(reset_*) + sum mu_i a_i.
    struct JumpCandidate
    {
        CotangentState pre;
        Vector post_x;
        Vector mu;
        Vector post_p;

        CotangentState post() const { return {post_x, post_p, pre.t}; }
    };

    /// p applied to each fiber direction; zero iff p annihilates the fibers of the reset.
    inline Vector consistency_residual(const GuardFrame& frame, const Vector& p)
    {
        return frame.fiber_basis.transpose() * p;
    }

    inline double max_abs(const Vector& v)
    {
        return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
    }

    /// Restriction of p to the guard, pushed through the pseudo-inverse of the reset.
    inline Vector lifted_costate(const GuardFrame& frame, const Vector& p)
    {
        const Matrix pinv  = right_pseudo_inverse(frame.reset_jacobian, frame.rank);
        const Vector p_tan = frame.tangent_basis.transpose() * p;
        return pinv.transpose() * p_tan;
    }

    /// max over tangent basis vectors v of |post_p . reset_*(v) - p- . v|
    inline double tangent_mismatch(const GuardFrame& frame, const JumpCandidate& c)
    {
        const Vector lhs = frame.reset_jacobian.transpose() * c.post_p;
        const Vector rhs = frame.tangent_basis.transpose() * c.pre.p;
        return max_abs(lhs - rhs);
    }

    /**
     * Build the jump candidate with annihilator coefficients mu.
     *
     * Throws InconsistentCostate when the consistency residual of pre.p exceeds
     * consistency_tol; pass infinity to skip the check.
     */
    inline JumpCandidate jump_candidate(const HybridProblem& problem, const GuardFrame& frame, const CotangentState& pre,
                                        const Vector& mu, double consistency_tol = 1e-8)
    {
        if (mu.size() != frame.annihilator_dim())
        {
            throw DomainError("annihilator coefficient vector has the wrong length");
        }
        const double inconsistency = max_abs(consistency_residual(frame, pre.p));
        if (!(inconsistency <= consistency_tol))
        {
            throw InconsistentCostate(inconsistency);
        }
        JumpCandidate c;
        c.pre    = pre;
        c.post_x = problem.reset_fn(pre.x);
        c.mu     = mu;
        c.post_p = lifted_costate(frame, pre.p) + frame.image_annihilator_basis.transpose() * mu;
        return c;
    }

    /// H(reset(x-), p+) - H(x-, p-)
    inline double energy_residual(const HybridProblem& problem, const JumpCandidate& c)
    {
        return optimized_hamiltonian(problem, c.post_x, c.post_p).H - optimized_hamiltonian(problem, c.pre.x, c.pre.p).H;
    }

    /// Consistency residual at the end of an arc, or nullopt if the arc missed the guard.
    inline std::optional<Vector> admissibility_from_arc(const HybridProblem& problem, const ContinuousArc& arc)
    {
        if (!arc.hit_guard())
        {
            return std::nullopt;
        }
        return consistency_residual(build_guard_frame(problem, arc.end.x), arc.end.p);
    }

    /// Flow to the next guard crossing and report the consistency residual there.
    inline std::optional<Vector> admissibility_residual(const HybridProblem& problem, const CotangentState& state,
                                                        double t_max, const IntegratorOptions& opts = {})
    {
        return admissibility_from_arc(problem, flow_until_guard(problem, state, t_max, opts));
    }

    struct JumpSolveOptions
    {
        NewtonOptions newton;
        IntegratorOptions integrator;
        /// Warm start tried before the grid.
        std::optional<Vector> initial_mu;
        /// Run every grid start and report all distinct roots; otherwise stop at the first root.
        bool collect_all_roots = true;
        double consistency_tol = 1e-8;
        double root_merge_tol  = 1e-6;
    };

    struct JumpRoot
    {
        Vector mu;
        double residual_norm = 0.0;
        int iterations       = 0;
    };

    struct JumpSolution
    {
        JumpCandidate candidate;
        double energy_residual = 0.0;
        Vector admissibility;           // consistency residual at the next crossing
        double next_crossing_time = 0.0;
        double residual_norm      = 0.0;
        int iterations            = 0;
        int starts_tried          = 0;
        std::vector<JumpRoot> roots;    // all distinct roots, best residual first
    };

    /// Multi-start grid of annihilator coefficients: {-0.9,-0.5,0,0.5,0.9}^k scaled by (1 + |p-|).
    inline std::vector<Vector> jump_start_grid(Eigen::Index dim, double scale)
    {
        static constexpr double levels[] = {-0.9, -0.5, 0.0, 0.5, 0.9};
        std::vector<Vector> grid;
        std::vector<int> idx(static_cast<std::size_t>(dim), 0);
        while (true)
        {
            Vector mu(dim);
            for (Eigen::Index i = 0; i < dim; ++i)
            {
                mu(i) = levels[idx[static_cast<std::size_t>(i)]] * scale;
            }
            grid.push_back(mu);
            Eigen::Index k = 0;
            while (k < dim && ++idx[static_cast<std::size_t>(k)] == 5)
            {
                idx[static_cast<std::size_t>(k)] = 0;
                ++k;
            }
            if (k == dim)
            {
                break;
            }
        }
        return grid;
    }

    /**
     * Select the post-reset co-state: solve for annihilator coefficients mu such
     * that the Hamiltonian is continuous across the reset and the flow from the
     * post-reset state satisfies the consistency condition at its next guard
     * crossing. The system has n - r equations in n - r unknowns.
     */
    inline JumpSolution solve_jump(const HybridProblem& problem, const GuardFrame& frame, const CotangentState& pre,
                                   double t_max, const JumpSolveOptions& opts = {})
    {
        const Eigen::Index k = frame.annihilator_dim();
        const double inconsistency = max_abs(consistency_residual(frame, pre.p));
        if (!(inconsistency <= opts.consistency_tol))
        {
            throw InconsistentCostate(inconsistency);
        }
        const Vector base   = lifted_costate(frame, pre.p);
        const Vector post_x = problem.reset_fn(pre.x);
        const double H_pre  = optimized_hamiltonian(problem, pre.x, pre.p).H;
        const Matrix annihilator_t = frame.image_annihilator_basis.transpose();

        auto reset_residual = [&](const Vector& mu) -> std::optional<Vector> {
            const Vector post_p = base + annihilator_t * mu;
            const auto arc      = flow_until_guard(problem, {post_x, post_p, pre.t}, t_max, opts.integrator);
            if (!arc.hit_guard())
            {
                return std::nullopt;
            }
            const Vector adm = consistency_residual(build_guard_frame(problem, arc.end.x), arc.end.p);
            Vector r(1 + adm.size());
            r(0)              = optimized_hamiltonian(problem, post_x, post_p).H - H_pre;
            r.tail(adm.size()) = adm;
            return r;
        };

        std::vector<Vector> starts;
        if (opts.initial_mu)
        {
            starts.push_back(*opts.initial_mu);
        }
        const bool warm_only = opts.initial_mu.has_value() && !opts.collect_all_roots;
        const auto grid      = jump_start_grid(k, 1.0 + pre.p.norm());

        JumpSolution out;
        std::vector<JumpRoot> roots;
        double best_failed = std::numeric_limits<double>::infinity();
        bool any_crossing  = false;

        auto run = [&](const Vector& start) {
            ++out.starts_tried;
            const auto report = damped_newton(reset_residual, start, opts.newton);
            if (report.residual.size() > 0)
            {
                any_crossing = true;
            }
            if (!report.converged)
            {
                best_failed = std::min(best_failed, report.residual_norm);
                return false;
            }
            const double scale = 1.0 + report.solution.norm();
            for (auto& root : roots)
            {
                if ((root.mu - report.solution).norm() <= opts.root_merge_tol * scale)
                {
                    return true;
                }
            }
            roots.push_back({report.solution, report.residual_norm, report.iterations});
            return true;
        };

        bool warm_converged = false;
        if (opts.initial_mu)
        {
            warm_converged = run(*opts.initial_mu);
        }
        if (!(warm_only && warm_converged))
        {
            for (const auto& start : grid)
            {
                if (run(start) && !opts.collect_all_roots)
                {
                    break;
                }
            }
        }

        if (roots.empty())
        {
            if (!any_crossing)
            {
                throw NoNextCrossing();
            }
            throw NoConvergence("jump selection failed after " + std::to_string(out.starts_tried) + " starts",
                                best_failed);
        }

        // With a warm start, the root it converged to is the selected branch.
        std::size_t selected = 0;
        if (!(opts.initial_mu && warm_converged))
        {
            selected = static_cast<std::size_t>(
                std::min_element(roots.begin(), roots.end(),
                                 [](const JumpRoot& a, const JumpRoot& b) { return a.residual_norm < b.residual_norm; })
                - roots.begin());
        }
        const JumpRoot chosen = roots[selected];
        std::stable_sort(roots.begin(), roots.end(),
                         [](const JumpRoot& a, const JumpRoot& b) { return a.residual_norm < b.residual_norm; });

        out.candidate  = jump_candidate(problem, frame, pre, chosen.mu, std::numeric_limits<double>::infinity());
        out.iterations = chosen.iterations;
        out.roots      = std::move(roots);

        const auto arc = flow_until_guard(problem, out.candidate.post(), t_max, opts.integrator);
        out.energy_residual    = energy_residual(problem, out.candidate);
        out.admissibility      = *admissibility_from_arc(problem, arc);
        out.next_crossing_time = arc.end.t;
        out.residual_norm      = std::max(std::abs(out.energy_residual), max_abs(out.admissibility));
        return out;
    }

    inline JumpSolution solve_jump(const HybridProblem& problem, const CotangentState& pre, double t_max,
                                   const JumpSolveOptions& opts = {})
    {
        return solve_jump(problem, build_guard_frame(problem, pre.x), pre, t_max, opts);
    }

    /// Split of the annihilator coefficients used by the final reset.
    struct FinalJumpChart
    {
        Vector energy_direction; // unit vector along which energy is solved
        Matrix free_directions;  // (n-r) x (n-r-1), orthonormal complement
    };

    inline FinalJumpChart final_jump_chart(const HybridProblem& problem, const GuardFrame& frame,
                                           const CotangentState& pre)
    {
        const Vector base          = lifted_costate(frame, pre.p);
        const Vector post_x        = problem.reset_fn(pre.x);
        const Matrix annihilator_t = frame.image_annihilator_basis.transpose();
        const Eigen::Index k       = frame.annihilator_dim();

        Vector grad(k);
        for (Eigen::Index i = 0; i < k; ++i)
        {
            const double h = 1e-6 * (1.0 + base.norm());
            const Vector a = annihilator_t.col(i);
            grad(i)        = (optimized_hamiltonian(problem, post_x, base + h * a).H
                       - optimized_hamiltonian(problem, post_x, base - h * a).H)
                      / (2.0 * h);
        }
        if (!(grad.norm() > 0.0))
        {
            throw DomainError("Hamiltonian is stationary along the annihilator; energy cannot fix the final jump");
        }
        FinalJumpChart chart;
        chart.energy_direction = grad.normalized();
        chart.free_directions  = k > 1 ? orthonormal_complement(chart.energy_direction) : Matrix(k, 0);
        return chart;
    }

    /**
     * Final reset: no consistency is needed downstream, so n - r - 1 annihilator
     * directions stay free and only energy continuity is imposed along the
     * remaining one.
     */
    inline JumpCandidate final_jump(const HybridProblem& problem, const GuardFrame& frame, const CotangentState& pre,
                                    const Vector& free_params, double consistency_tol = 1e-8)
    {
        const auto chart = final_jump_chart(problem, frame, pre);
        if (free_params.size() != chart.free_directions.cols())
        {
            throw DomainError("final jump expects " + std::to_string(chart.free_directions.cols())
                              + " free parameters");
        }
        const Vector offset = chart.free_directions * free_params;
        auto energy         = [&](double s) {
            return energy_residual(problem, jump_candidate(problem, frame, pre, offset + s * chart.energy_direction,
                                                           consistency_tol));
        };
        double s = 0.0;
        double e = energy(s);
        for (int iter = 0; iter < 60 && std::abs(e) > 1e-13 * (1.0 + std::abs(s)); ++iter)
        {
            const double h     = 1e-6 * (1.0 + std::abs(s));
            const double slope = (energy(s + h) - energy(s - h)) / (2.0 * h);
            if (!(std::abs(slope) > 0.0))
            {
                break;
            }
            double step   = -e / slope;
            double lambda = 1.0;
            double e_new  = energy(s + step);
            while (std::abs(e_new) >= std::abs(e) && lambda > 1e-6)
            {
                lambda *= 0.5;
                e_new = energy(s + lambda * step);
            }
            if (std::abs(e_new) >= std::abs(e))
            {
                break;
            }
            s += lambda * step;
            e = e_new;
        }
        if (!(std::abs(e) <= 1e-10 * (1.0 + std::abs(s))))
        {
            throw NoConvergence("energy equation of the final jump has no root along the solved direction",
                                std::abs(e));
        }
        return jump_candidate(problem, frame, pre, offset + s * chart.energy_direction, consistency_tol);
    }
} // namespace hybrid_pmp
