#pragma once

#include <functional>
#include <limits>
#include <optional>

#include "linalg.hpp"

namespace hybrid_pmp
{
    struct NewtonOptions
    {
        double tolerance   = 1e-9; // on max |residual|
        int max_iterations = 50;
        double fd_step     = 1e-7; // forward-difference step, scaled by max(1, |x_j|)
        int max_backtracks = 30;
    };

    struct NewtonReport
    {
        Vector solution;
        Vector residual;
        double residual_norm = std::numeric_limits<double>::infinity();
        int iterations       = 0;
        bool converged       = false;
    };

    /// Residual map; nullopt marks a point where the residual is undefined
    /// (wrong reset count, missed guard), which the line search backs away from.
    using ResidualFn = std::function<std::optional<Vector>(const Vector&)>;

    inline std::optional<Matrix> forward_difference_jacobian(const ResidualFn& f, const Vector& x, const Vector& fx,
                                                             double step)
    {
        Matrix jac(fx.size(), x.size());
        Vector probe = x;
        for (Eigen::Index j = 0; j < x.size(); ++j)
        {
            const double h = step * std::max(1.0, std::abs(x(j)));
            probe(j)       = x(j) + h;
            auto fp        = f(probe);
            if (fp)
            {
                jac.col(j) = (*fp - fx) / h;
            }
            else
            {
                probe(j) = x(j) - h;
                auto fm  = f(probe);
                if (!fm)
                {
                    return std::nullopt;
                }
                jac.col(j) = (fx - *fm) / h;
            }
            probe(j) = x(j);
        }
        return jac;
    }

    /**
     * Damped Newton iteration with a forward-difference Jacobian.
     *
     * Steps come from a complete orthogonal decomposition (least-squares when the
     * system is not square or the Jacobian is singular) and are halved until the
     * residual 2-norm decreases.
     */
    inline NewtonReport damped_newton(const ResidualFn& f, Vector x0, const NewtonOptions& opts = {})
    {
        NewtonReport report;
        report.solution = std::move(x0);
        auto r0         = f(report.solution);
        if (!r0)
        {
            return report;
        }
        report.residual      = *r0;
        report.residual_norm = report.residual.size() ? report.residual.cwiseAbs().maxCoeff() : 0.0;

        for (int iter = 0; iter < opts.max_iterations; ++iter)
        {
            if (report.residual_norm <= opts.tolerance)
            {
                report.converged = true;
                return report;
            }
            auto jac = forward_difference_jacobian(f, report.solution, report.residual, opts.fd_step);
            if (!jac)
            {
                return report;
            }
            const Vector dx = jac->completeOrthogonalDecomposition().solve(-report.residual);
            if (!dx.allFinite())
            {
                return report;
            }
            ++report.iterations;

            const double norm0 = report.residual.norm();
            double lambda      = 1.0;
            bool accepted      = false;
            for (int k = 0; k <= opts.max_backtracks; ++k, lambda *= 0.5)
            {
                const Vector trial = report.solution + lambda * dx;
                auto rt            = f(trial);
                if (rt && rt->allFinite() && rt->norm() < (1.0 - 1e-4 * lambda) * norm0)
                {
                    report.solution      = trial;
                    report.residual      = *rt;
                    report.residual_norm = rt->cwiseAbs().maxCoeff();
                    accepted             = true;
                    break;
                }
            }
            if (!accepted)
            {
                return report;
            }
        }
        report.converged = report.residual_norm <= opts.tolerance;
        return report;
    }
} // namespace hybrid_pmp
