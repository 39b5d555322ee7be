#pragma once

#include <stdexcept>
#include <string>

namespace hybrid_pmp
{
    /// Base class of every error raised by the solver stack.
    class Error : public std::runtime_error
    {
      public:
        using std::runtime_error::runtime_error;
    };

    /// Numerical rank of a reset Jacobian differs from the declared rank.
    class RankMismatch : public Error
    {
      public:
        RankMismatch(int expected, int found)
            : Error("reset Jacobian has numerical rank " + std::to_string(found) + ", expected "
                    + std::to_string(expected))
            , expected_rank(expected)
            , found_rank(found)
        {
        }

        int expected_rank;
        int found_rank;
    };

    class NotOnGuard : public Error
    {
      public:
        explicit NotOnGuard(double g)
            : Error("point is not on the guard: |g(x)| = " + std::to_string(g))
            , guard_value(g)
        {
        }

        double guard_value;
    };

    class NoMinimizer : public Error
    {
      public:
        NoMinimizer()
            : Error("problem supplies no closed-form control minimizer")
        {
        }
    };

    class StepFailure : public Error
    {
      public:
        using Error::Error;
    };

    /// Pre-reset co-state does not annihilate the fibers of the reset.
    class InconsistentCostate : public Error
    {
      public:
        explicit InconsistentCostate(double residual)
            : Error("pre-reset co-state violates the consistency condition (residual "
                    + std::to_string(residual) + ")")
            , residual_norm(residual)
        {
        }

        double residual_norm;
    };

    class NoConvergence : public Error
    {
      public:
        NoConvergence(const std::string& what, double best)
            : Error(what + " (best residual " + std::to_string(best) + ")")
            , best_residual(best)
        {
        }

        double best_residual;
    };

    /// Every candidate post-reset flow misses the guard before the horizon.
    class NoNextCrossing : public Error
    {
      public:
        NoNextCrossing()
            : Error("no candidate post-reset co-state returns to the guard before the horizon")
        {
        }
    };

    class DomainError : public Error
    {
      public:
        using Error::Error;
    };

    class ConfigError : public Error
    {
      public:
        ConfigError(const std::string& field, const std::string& what)
            : Error(field.empty() ? what : field + ": " + what)
            , field(field)
        {
        }

        std::string field;
    };
} // namespace hybrid_pmp
