#pragma once

#include "problem.hpp"

namespace hybrid_pmp
{
    struct HamiltonianValue
    {
        double H = 0.0;
        Vector control;
    };

    inline Vector optimal_control(const HybridProblem& problem, const Vector& x, const Vector& p)
    {
        if (!problem.control_minimizer)
        {
            throw NoMinimizer();
        }
        return problem.control_minimizer(x, p);
    }

    /// H(x,p) = min_u <p, f(x,u)> + l(x,u), through the problem's closed-form minimizer.
    inline HamiltonianValue optimized_hamiltonian(const HybridProblem& problem, const Vector& x, const Vector& p)
    {
        HamiltonianValue out;
        out.control = optimal_control(problem, x, p);
        out.H       = p.dot(problem.dynamics(x, out.control)) + problem.running_cost(x, out.control);
        return out;
    }

    struct HamiltonianRhs
    {
        Vector x_dot;
        Vector p_dot;
    };

    /// (dH/dp, -dH/dx) by central differences of the optimized Hamiltonian.
    inline HamiltonianRhs hamiltonian_rhs_fd(const HybridProblem& problem, const Vector& x, const Vector& p)
    {
        const Eigen::Index n = x.size();
        HamiltonianRhs out{Vector(n), Vector(n)};
        Vector xp = x;
        Vector pp = p;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const double hp = 1e-6 * (1.0 + std::abs(p(i)));
            pp(i)           = p(i) + hp;
            const double up = optimized_hamiltonian(problem, x, pp).H;
            pp(i)           = p(i) - hp;
            const double um = optimized_hamiltonian(problem, x, pp).H;
            pp(i)           = p(i);
            out.x_dot(i)    = (up - um) / (2.0 * hp);

            const double hx = 1e-6 * (1.0 + std::abs(x(i)));
            xp(i)           = x(i) + hx;
            const double vp = optimized_hamiltonian(problem, xp, p).H;
            xp(i)           = x(i) - hx;
            const double vm = optimized_hamiltonian(problem, xp, p).H;
            xp(i)           = x(i);
            out.p_dot(i)    = -(vp - vm) / (2.0 * hx);
        }
        return out;
    }

    /// Hamiltonian vector field; analytic when the problem provides it.
    inline HamiltonianRhs hamiltonian_rhs(const HybridProblem& problem, const Vector& x, const Vector& p)
    {
        if (problem.hamiltonian_gradient)
        {
            if (!problem.control_minimizer)
            {
                throw NoMinimizer();
            }
            auto grad = problem.hamiltonian_gradient(x, p);
            return {std::move(grad.dH_dp), -grad.dH_dx};
        }
        return hamiltonian_rhs_fd(problem, x, p);
    }
} // namespace hybrid_pmp
