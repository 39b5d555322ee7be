#include <catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"

using namespace hybrid_pmp;
using namespace testing_support;
using Catch::Approx;

namespace
{
    const double table_costs[] = {3.012, 2.0809, 1.4685, 2.2376};

    const ShootingResult& solved(int N)
    {
        static std::vector<std::optional<ShootingResult>> cache(4);
        auto& slot = cache[static_cast<std::size_t>(N)];
        if (!slot)
        {
            slot = solve(make_shooting_spec(bouncing_ball::make_problem(), bouncing_ball::initial_state(), N,
                                            *bouncing_ball::seed(N)));
        }
        return *slot;
    }

    double trapezoid_cost(const HybridProblem& problem, const HybridArc& arc)
    {
        double total = 0.0;
        for (const auto& piece : arc.arcs)
        {
            for (std::size_t k = 1; k < piece.samples.size(); ++k)
            {
                const auto& a = piece.samples[k - 1];
                const auto& b = piece.samples[k];
                total += 0.5 * (b.t - a.t) * (problem.running_cost(a.x, a.u) + problem.running_cost(b.x, b.u));
            }
        }
        return total + problem.terminal(arc.terminal.x);
    }
} // namespace

TEST_CASE("shooting layout for the ball is square for every reset count")
{
    const auto problem = bouncing_ball::make_problem();
    for (int N = 0; N <= 5; ++N)
    {
        ShootingSpec spec;
        spec.problem     = problem;
        spec.reset_count = N;
        CHECK(spec.decision_len() == spec.residual_len());
        CHECK(spec.decision_len() == (N == 0 ? 3 : 4));
        CHECK(spec.admissibility_len() == (N == 0 ? 0 : 1));
        CHECK(spec.final_free_len() == (N == 0 ? 0 : 1));
        CHECK(spec.effective_costate_dof() == (N == 0 ? 3 : problem.reset_rank + 1));
    }
}

TEST_CASE("make_shooting_spec rejects malformed inputs")
{
    const auto problem = bouncing_ball::make_problem();
    CHECK_THROWS_AS(make_shooting_spec(problem, bouncing_ball::initial_state(), -1, Vector::Zero(3)), DomainError);
    CHECK_THROWS_AS(make_shooting_spec(problem, Vector::Zero(2), 0, Vector::Zero(3)), DomainError);
    CHECK_THROWS_AS(make_shooting_spec(problem, bouncing_ball::initial_state(), 1, Vector::Zero(3)), DomainError);
}

TEST_CASE("initial co-states on the closed-form admissible surface")
{
    const auto problem = bouncing_ball::make_problem();
    const Vector x0    = bouncing_ball::initial_state();
    int checked        = 0;
    for (int i = 0; i < 200 && checked < 10; ++i)
    {
        bouncing_ball::BallState s{x0(0), x0(1), x0(2), 0.0, uniform(-1.5, 0.5), uniform(0.2, 0.95)};
        s.px             = bouncing_ball::closed_form_admissible_px(s);
        const double tau = *bouncing_ball::closed_form_impact_time(s.z, s.pz, 0.0);
        const auto arc   = flow_until_guard(problem, s.cotangent(), 10.0);
        if (!arc.hit_guard() || std::abs(arc.end.t - tau) > 1e-6)
        {
            continue;
        }
        ++checked;
        const auto init = parameterize_initial_costate(problem, x0, s.costate(), 10.0);
        REQUIRE(init.residual);
        CHECK(max_abs(*init.residual) <= 1e-8);
    }
    CHECK(checked >= 5);
}

TEST_CASE("reference costs for zero to three resets")
{
    for (int N = 0; N <= 3; ++N)
    {
        const auto& r = solved(N);
        INFO("N = " << N);
        CHECK(r.converged);
        CHECK(r.residual_norm <= 1e-8);
        CHECK(static_cast<int>(r.arc.events.size()) == N);
        CHECK(std::abs(r.arc.cost - table_costs[N]) <= 0.01 * table_costs[N] + (N == 0 ? 0.005 : 0.0));
    }
}

TEST_CASE("the reset-free cost matches the analytic optimum")
{
    // 1/2 (T + 12 dx^2 / T^3) for the double integrator plus 1/2 coth(T) for the z channel.
    CHECK(solved(0).arc.cost == Approx(2.512 + 0.5 / std::tanh(5.0)).margin(1e-7));
}

TEST_CASE("converged arcs satisfy the reset conditions")
{
    const auto problem = bouncing_ball::make_problem();
    for (int N = 1; N <= 3; ++N)
    {
        const auto& arc = solved(N).arc;
        INFO("N = " << N);
        for (std::size_t i = 0; i < arc.events.size(); ++i)
        {
            const auto& e = arc.events[i];
            CHECK(std::abs(e.energy_jump) <= 1e-8);
            CHECK(std::abs(problem.guard_fn(e.pre.x)) <= 1e-10);
            CHECK(e.pre.x(1) < 0.0);
            CHECK(e.final == (i + 1 == arc.events.size()));
            CHECK(max_abs(e.consistency) <= 1e-8);
            CHECK(std::abs(e.pre.p(2)) <= 1e-8);
        }
        for (std::size_t i = 1; i < arc.arcs.size(); ++i)
        {
            CHECK(arc.arcs[i].start.t == Approx(arc.arcs[i - 1].end.t).margin(1e-14));
        }
    }
}

TEST_CASE("terminal state reaches the target")
{
    for (int N = 0; N <= 3; ++N)
    {
        CHECK((solved(N).arc.terminal.x - Vector{{1.0, 0.0, 0.0}}).norm() <= 1e-6);
        CHECK(solved(N).arc.terminal.t == Approx(5.0).margin(1e-12));
    }
}

TEST_CASE("reported cost agrees with quadrature along a finely sampled arc")
{
    const auto problem = bouncing_ball::make_problem();
    auto spec = make_shooting_spec(problem, bouncing_ball::initial_state(), 2, solved(2).decision);
    spec.integrator.sample_dt = 1e-3;
    const auto sim = simulate_with_spec(spec, solved(2).decision);
    REQUIRE(sim.ok());
    CHECK(trapezoid_cost(problem, sim.arc) == Approx(sim.arc.cost).epsilon(1e-5));
    CHECK(sim.arc.cost == Approx(solved(2).arc.cost).epsilon(1e-9));
}

TEST_CASE("a wrong reset count is reported as a structured mismatch")
{
    const auto problem = bouncing_ball::make_problem();
    const auto& zero   = solved(0);
    Vector decision(4);
    decision << zero.decision, 0.5;
    const auto spec = make_shooting_spec(problem, bouncing_ball::initial_state(), 1, decision);
    const auto sim  = simulate_with_spec(spec, decision);
    REQUIRE(sim.mismatch);
    CHECK(sim.mismatch->expected == 1);
    CHECK(sim.mismatch->realized == 0);
    CHECK_FALSE(sim.ok());
}

TEST_CASE("scan marks two resets as the minimizer")
{
    const auto table = scan_reset_counts(bouncing_ball::make_problem(), bouncing_ball::initial_state(), 3,
                                         bouncing_ball::seed);
    REQUIRE(table.rows.size() == 4);
    REQUIRE(table.minimizer);
    CHECK(table.rows[static_cast<std::size_t>(*table.minimizer)].reset_count == 2);
    for (const auto& row : table.rows)
    {
        CHECK(row.converged);
    }
}

TEST_CASE("scan on a problem whose guard cannot be crossed")
{
    const auto table =
        scan_reset_counts(unreachable_guard_problem(), bouncing_ball::initial_state(), 2, SeedProvider{});
    REQUIRE(table.rows.size() == 3);
    CHECK(table.rows[0].converged);
    CHECK_FALSE(table.rows[1].converged);
    CHECK_FALSE(table.rows[2].converged);
    REQUIRE(table.minimizer);
    CHECK(*table.minimizer == 0);
}

TEST_CASE("a partial terminal target uses transversality")
{
    auto problem       = bouncing_ball::make_problem();
    problem.target_fns = {[](const Vector& x) { return x(0) - 1.0; }};
    auto spec          = make_shooting_spec(problem, bouncing_ball::initial_state(), 0, Vector{{0.0, -1.0, 1.0, 0.0}});
    REQUIRE(spec.decision_len() == 4);
    REQUIRE(spec.residual_len() == 4);
    const auto r = solve(spec);
    CHECK(r.arc.terminal.x(0) == Approx(1.0).margin(1e-8));
    CHECK(std::abs(r.arc.terminal.p(1)) <= 1e-8);
    CHECK(std::abs(r.arc.terminal.p(2)) <= 1e-8);
    // u = lambda (T - t) with lambda = 39/125 plus 1/2 tanh(T) for the free z channel.
    CHECK(r.arc.cost == Approx(0.5 * 13.0 * 39.0 / 125.0 + 0.5 * std::tanh(5.0)).margin(1e-7));
}

TEST_CASE("solve throws when Newton cannot converge")
{
    auto spec = make_shooting_spec(unreachable_guard_problem(), bouncing_ball::initial_state(), 1, Vector::Zero(3));
    CHECK_THROWS_AS(solve(spec), NoConvergence);
}
