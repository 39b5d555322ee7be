#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace hybrid_pmp
{
    using VectorField   = std::function<Vector(const Vector& x, const Vector& u)>;
    using StageCost     = std::function<double(const Vector& x, const Vector& u)>;
    using ScalarField   = std::function<double(const Vector& x)>;
    using GradientField = std::function<Vector(const Vector& x)>;
    using StateMap      = std::function<Vector(const Vector& x)>;
    using JacobianMap   = std::function<Matrix(const Vector& x)>;
    using StatePredicate = std::function<bool(const Vector& x)>;
    /// Closed-form argmin over u of <p, f(x,u)> + l(x,u).
    using ControlMinimizer = std::function<Vector(const Vector& x, const Vector& p)>;

    struct HamiltonianGradient
    {
        Vector dH_dp;
        Vector dH_dx;
    };

    using HamiltonianGradientMap = std::function<HamiltonianGradient(const Vector& x, const Vector& p)>;

    /**
     * Optimal control problem for a hybrid system on R^n with a single
     * codimension-one guard {g = 0} and a constant-rank reset map.
     *
     * The flow set is {g > 0}; a reset fires when g crosses to zero from above
     * at a point where guard_direction holds. The target set is the common zero
     * set of target_fns.
     */
    struct HybridProblem
    {
        std::string name;
        int dim_state   = 0;
        int dim_control = 0;

        VectorField dynamics;
        StageCost running_cost;
        ScalarField terminal_cost;              // empty means zero
        GradientField terminal_cost_gradient;   // optional

        ScalarField guard_fn;
        GradientField guard_gradient;           // optional
        StatePredicate guard_direction;         // empty means always true

        StateMap reset_fn;
        JacobianMap reset_jacobian;             // optional, ambient n x n

        std::vector<ScalarField> target_fns;

        double t0 = 0.0;
        double T  = 1.0;
        int reset_rank = 0;

        ControlMinimizer control_minimizer;       // required by the Hamiltonian machinery
        HamiltonianGradientMap hamiltonian_gradient; // optional analytic (dH/dp, dH/dx)

        double guard_tolerance = 1e-8;

        void validate() const
        {
            if (dim_state <= 0 || dim_control <= 0)
            {
                throw DomainError("problem dimensions must be positive");
            }
            if (reset_rank <= 0 || reset_rank > dim_state - 1)
            {
                throw DomainError("reset rank must satisfy 0 < r <= n-1");
            }
            if (!dynamics || !running_cost || !guard_fn || !reset_fn)
            {
                throw DomainError("problem is missing dynamics, cost, guard or reset");
            }
            if (!(T >= t0))
            {
                throw DomainError("horizon must satisfy T >= t0");
            }
        }

        double terminal(const Vector& x) const { return terminal_cost ? terminal_cost(x) : 0.0; }

        bool direction_ok(const Vector& x) const { return !guard_direction || guard_direction(x); }
    };

    /// Central finite-difference gradient of a scalar field.
    inline Vector fd_gradient(const ScalarField& f, const Vector& x, double rel_step = 1e-6)
    {
        Vector grad(x.size());
        Vector probe = x;
        for (Eigen::Index i = 0; i < x.size(); ++i)
        {
            const double h = rel_step * (1.0 + std::abs(x(i)));
            probe(i)       = x(i) + h;
            const double fp = f(probe);
            probe(i)        = x(i) - h;
            const double fm = f(probe);
            probe(i)        = x(i);
            grad(i)         = (fp - fm) / (2.0 * h);
        }
        return grad;
    }

    inline Vector guard_normal(const HybridProblem& problem, const Vector& x)
    {
        return problem.guard_gradient ? problem.guard_gradient(x) : fd_gradient(problem.guard_fn, x);
    }

    inline Vector terminal_gradient(const HybridProblem& problem, const Vector& x)
    {
        if (problem.terminal_cost_gradient)
        {
            return problem.terminal_cost_gradient(x);
        }
        if (!problem.terminal_cost)
        {
            return Vector::Zero(x.size());
        }
        return fd_gradient(problem.terminal_cost, x);
    }

    /// Local geometry of the guard and the reset at a guard point.
    struct GuardFrame
    {
        Vector point;
        Vector guard_normal;             // dg, annihilates T_x S
        Matrix tangent_basis;            // n x (n-1), orthonormal columns
        Matrix reset_jacobian;           // n x (n-1), reset differential in tangent_basis
        Matrix fiber_basis;              // n x (n-1-r), ambient vectors spanning ker(reset) on T_x S
        Matrix image_annihilator_basis;  // (n-r) x n, rows annihilate the image of the reset
        int rank = 0;

        Eigen::Index fiber_dim() const { return fiber_basis.cols(); }
        Eigen::Index annihilator_dim() const { return image_annihilator_basis.rows(); }
    };

    /// Reset differential restricted to the guard, expressed in the given tangent basis.
    inline Matrix restricted_reset_jacobian(const HybridProblem& problem, const Vector& x, const Matrix& tangent)
    {
        if (problem.reset_jacobian)
        {
            return problem.reset_jacobian(x) * tangent;
        }
        Matrix jac(problem.dim_state, tangent.cols());
        for (Eigen::Index j = 0; j < tangent.cols(); ++j)
        {
            const double h = 1e-6 * (1.0 + x.norm());
            jac.col(j)     = (problem.reset_fn(x + h * tangent.col(j)) - problem.reset_fn(x - h * tangent.col(j)))
                       / (2.0 * h);
        }
        return jac;
    }

    /**
     * Build the guard frame at x: orthonormal tangent basis completing dg,
     * the restricted reset Jacobian, the fiber directions (kernel of the reset
     * on the guard) and the annihilator of the image of the reset.
     */
    inline GuardFrame build_guard_frame(const HybridProblem& problem, const Vector& x)
    {
        const double g = problem.guard_fn(x);
        if (!(std::abs(g) <= problem.guard_tolerance))
        {
            throw NotOnGuard(g);
        }
        const int n = problem.dim_state;
        const int r = problem.reset_rank;

        GuardFrame frame;
        frame.point        = x;
        frame.guard_normal = guard_normal(problem, x);
        if (!(frame.guard_normal.norm() > 0.0))
        {
            throw DomainError("guard gradient vanishes at the evaluated point");
        }
        frame.tangent_basis  = orthonormal_complement(frame.guard_normal);
        frame.reset_jacobian = restricted_reset_jacobian(problem, x, frame.tangent_basis);

        Eigen::JacobiSVD<Matrix> svd(frame.reset_jacobian, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const int found = numerical_rank(svd.singularValues());
        if (found != r)
        {
            throw RankMismatch(r, found);
        }
        frame.rank = r;

        Matrix kernel     = svd.matrixV().rightCols(n - 1 - r);
        frame.fiber_basis = frame.tangent_basis * kernel;
        for (Eigen::Index j = 0; j < frame.fiber_basis.cols(); ++j)
        {
            canonical_sign(frame.fiber_basis.col(j));
        }
        Matrix coker                  = svd.matrixU().rightCols(n - r);
        frame.image_annihilator_basis = coker.transpose();
        for (Eigen::Index i = 0; i < frame.image_annihilator_basis.rows(); ++i)
        {
            Vector row = frame.image_annihilator_basis.row(i).transpose();
            canonical_sign(row);
            frame.image_annihilator_basis.row(i) = row.transpose();
        }
        return frame;
    }
} // namespace hybrid_pmp
