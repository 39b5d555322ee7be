#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "oracle.hpp"
#include "shooting.hpp"

namespace hybrid_pmp::io
{
    using json = nlohmann::json;

    /// Round to 12 significant digits so that serialized output is stable.
    inline double round12(double v)
    {
        if (!std::isfinite(v))
        {
            return v;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return std::strtod(buf, nullptr);
    }

    inline std::string fmt12(double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return buf;
    }

    inline json number(double v)
    {
        if (!std::isfinite(v))
        {
            return nullptr;
        }
        return round12(v);
    }

    inline json to_json(const Vector& v)
    {
        json arr = json::array();
        for (Eigen::Index i = 0; i < v.size(); ++i)
        {
            arr.push_back(number(v(i)));
        }
        return arr;
    }

    inline json to_json(const CotangentState& s)
    {
        return {{"t", number(s.t)}, {"x", to_json(s.x)}, {"p", to_json(s.p)}};
    }

    /// Arc samples as CSV rows: t, x1..xn, p1..pn, u1..um, H.
    inline void write_arc_csv(std::ostream& os, const std::vector<ContinuousArc>& arcs, int n, int m)
    {
        os << "t";
        for (int i = 1; i <= n; ++i)
        {
            os << ",x" << i;
        }
        for (int i = 1; i <= n; ++i)
        {
            os << ",p" << i;
        }
        for (int i = 1; i <= m; ++i)
        {
            os << ",u" << i;
        }
        os << ",H\n";
        for (const auto& arc : arcs)
        {
            for (const auto& s : arc.samples)
            {
                os << fmt12(s.t);
                for (int i = 0; i < n; ++i)
                {
                    os << ',' << fmt12(s.x(i));
                }
                for (int i = 0; i < n; ++i)
                {
                    os << ',' << fmt12(s.p(i));
                }
                for (int i = 0; i < m; ++i)
                {
                    os << ',' << fmt12(s.u(i));
                }
                os << ',' << fmt12(s.H) << '\n';
            }
        }
    }

    inline json jump_record(const JumpSolution& sol)
    {
        json roots = json::array();
        for (const auto& r : sol.roots)
        {
            roots.push_back({{"mu", to_json(r.mu)}, {"residual_norm", number(r.residual_norm)},
                             {"iterations", r.iterations}});
        }
        return {
            {"pre", to_json(sol.candidate.pre)},
            {"post", {{"t", number(sol.candidate.pre.t)}, {"x", to_json(sol.candidate.post_x)},
                      {"p", to_json(sol.candidate.post_p)}}},
            {"mu", to_json(sol.candidate.mu)},
            {"residual_norms", {{"energy", number(std::abs(sol.energy_residual))},
                                {"admissibility", number(max_abs(sol.admissibility))},
                                {"stacked", number(sol.residual_norm)}}},
            {"next_crossing_time", number(sol.next_crossing_time)},
            {"iterations", sol.iterations},
            {"starts_tried", sol.starts_tried},
            {"roots", roots},
        };
    }

    inline json events_record(const HybridArc& arc)
    {
        json events = json::array();
        for (const auto& e : arc.events)
        {
            events.push_back({
                {"t", number(e.t)},
                {"pre", to_json(e.pre)},
                {"post", {{"x", to_json(e.jump.post_x)}, {"p", to_json(e.jump.post_p)}}},
                {"mu", to_json(e.jump.mu)},
                {"final", e.final},
                {"energy_jump", number(e.energy_jump)},
                {"consistency", to_json(e.consistency)},
            });
        }
        return {{"events", events}, {"terminal", to_json(arc.terminal)}, {"cost", number(arc.cost)}};
    }

    inline json summary_record(int N, const ShootingResult& r)
    {
        return {{"N", N},
                {"cost", r.converged ? number(r.arc.cost) : json(nullptr)},
                {"residual_norm", number(r.residual_norm)},
                {"converged", r.converged},
                {"iterations", r.iterations}};
    }

    inline json table_record(const ScanTable& table)
    {
        json rows = json::array();
        for (const auto& row : table.rows)
        {
            json r = {{"N", row.reset_count},
                      {"cost", row.converged ? number(row.cost) : json(nullptr)},
                      {"residual_norm", number(row.residual_norm)},
                      {"converged", row.converged}};
            if (!row.message.empty())
            {
                r["message"] = row.message;
            }
            rows.push_back(r);
        }
        json out = {{"rows", rows}};
        out["minimizer_N"] = table.minimizer ? json(table.rows[static_cast<std::size_t>(*table.minimizer)].reset_count)
                                             : json(nullptr);
        return out;
    }

    inline json oracle_record(const oracle::DirectCandidate& c)
    {
        return {{"seed", c.seed},
                {"iterations", c.iterations},
                {"accepted", c.accepted},
                {"cost", number(c.simulation.cost)},
                {"penalized_cost", number(c.penalized_cost)},
                {"violation", number(c.simulation.violation)},
                {"bounce_count", c.simulation.bounce_count}};
    }

    /// Human-readable table mirroring "# resets | cost".
    inline std::string summary_table(const ScanTable& table)
    {
        std::string out = "# Resets | Cost\n---------+-----------\n";
        for (std::size_t i = 0; i < table.rows.size(); ++i)
        {
            const auto& row = table.rows[i];
            char line[96];
            if (row.converged)
            {
                std::snprintf(line, sizeof line, "%8d | %.4f%s\n", row.reset_count, row.cost,
                              table.minimizer && static_cast<std::size_t>(*table.minimizer) == i ? "  (min)" : "");
            }
            else
            {
                std::snprintf(line, sizeof line, "%8d | failed\n", row.reset_count);
            }
            out += line;
        }
        return out;
    }

    inline void write_text(const std::filesystem::path& path, const std::string& text)
    {
        std::ofstream os(path, std::ios::binary);
        if (!os)
        {
            throw Error("cannot open " + path.string() + " for writing");
        }
        os << text;
    }

    inline void write_json(const std::filesystem::path& path, const json& j)
    {
        write_text(path, j.dump(2) + "\n");
    }
} // namespace hybrid_pmp::io
