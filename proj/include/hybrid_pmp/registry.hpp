#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "examples/bouncing_ball.hpp"

namespace hybrid_pmp
{
    struct ExampleEntry
    {
        std::string id;
        std::function<HybridProblem()> make_problem;
        std::function<Vector()> initial_state;
        SeedProvider seeds;
    };

    inline const std::vector<ExampleEntry>& examples()
    {
        static const std::vector<ExampleEntry> entries = {
            {bouncing_ball::example_id, bouncing_ball::make_problem, bouncing_ball::initial_state,
             bouncing_ball::seed},
        };
        return entries;
    }

    inline std::optional<ExampleEntry> find_example(const std::string& id)
    {
        for (const auto& e : examples())
        {
            if (e.id == id)
            {
                return e;
            }
        }
        return std::nullopt;
    }
} // namespace hybrid_pmp
