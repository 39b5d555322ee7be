#pragma once

#include <random>

#include "hybrid_pmp/examples/bouncing_ball.hpp"

namespace testing_support
{
    using namespace hybrid_pmp;

    inline std::mt19937_64& rng()
    {
        static std::mt19937_64 engine(20240611);
        return engine;
    }

    inline double uniform(double lo, double hi)
    {
        return std::uniform_real_distribution<double>(lo, hi)(rng());
    }

    inline Vector random_vector(Eigen::Index n, double lo, double hi)
    {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            v(i) = uniform(lo, hi);
        }
        return v;
    }

    /// Ball dynamics and cost with the identity as reset map (full rank on the guard).
    inline HybridProblem identity_reset_problem()
    {
        auto p           = bouncing_ball::make_problem();
        p.name           = "identity_reset";
        p.reset_fn       = [](const Vector& x) { return x; };
        p.reset_jacobian = [](const Vector&) { return Matrix(Matrix::Identity(3, 3)); };
        p.reset_rank     = 2;
        return p;
    }

    /// Same as identity_reset_problem but the guard can never be crossed.
    inline HybridProblem unreachable_guard_problem()
    {
        auto p            = identity_reset_problem();
        p.name            = "unreachable_guard";
        p.guard_direction = [](const Vector&) { return false; };
        return p;
    }
} // namespace testing_support
