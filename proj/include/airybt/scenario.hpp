// SPDX-License-Identifier: Apache-2.0
//
// airybt: near-field Airy beam training laboratory
// Copyright (C) 2026 The airybt authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace airybt
{
    inline constexpr double speed_of_light = 299792458.0; // m/s

    struct point
    {
        double x = 0.0;
        double y = 0.0;
    };

    struct region
    {
        double x_min = 0.0, x_max = 0.0;
        double y_min = 0.0, y_max = 0.0;
    };

    // Axis-aligned rectangular blocker. The boundary is part of the obstacle.
    struct obstacle
    {
        point center;
        double dx = 0.0; // extent along x, m
        double dy = 0.0; // extent along y, m
        double attenuation = 0.0;

        double x_lo() const { return center.x - 0.5 * dx; }
        double x_hi() const { return center.x + 0.5 * dx; }
        double y_lo() const { return center.y - 0.5 * dy; }
        double y_hi() const { return center.y + 0.5 * dy; }
    };

    struct scenario_config
    {
        double frequency_hz = 100e9;
        int n_antennas = 255;
        double antenna_spacing = 0.0; // m, 0 selects lambda/2
        double grid_step_x = 0.0;     // m, 0 selects lambda/2
        double grid_step_y = 0.0;     // m, 0 selects the antenna spacing
        airybt::region region{0.0, 4.0, -2.0, 2.0};
        std::vector<obstacle> obstacles;
        double attenuation_default = 0.0;

        double wavelength() const { return speed_of_light / frequency_hz; }
        double wavenumber() const { return 2.0 * std::numbers::pi / wavelength(); }
        double spacing() const { return antenna_spacing > 0.0 ? antenna_spacing : 0.5 * wavelength(); }
        double step_x() const { return grid_step_x > 0.0 ? grid_step_x : 0.5 * wavelength(); }
        double step_y() const { return grid_step_y > 0.0 ? grid_step_y : spacing(); }
        double aperture() const { return (n_antennas - 1) * spacing(); }
        int index_min() const { return (1 - n_antennas) / 2; }
        int index_max() const { return (n_antennas - 1) / 2; }
        double antenna_y(int n) const { return n * spacing(); }

        void validate() const
        {
            if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz))
                throw parameter_error("carrier frequency must be positive");
            if (n_antennas < 1 || n_antennas % 2 == 0)
                throw parameter_error("antenna count must be a positive odd integer, got " + std::to_string(n_antennas));
            if (!(attenuation_default >= 0.0 && attenuation_default < 1.0))
                throw parameter_error("default attenuation must lie in [0,1)");
            for (const auto &o : obstacles)
            {
                if (!(o.dx > 0.0 && o.dy > 0.0))
                    throw geometry_error("obstacle dimensions must be strictly positive");
                if (!(o.attenuation >= 0.0 && o.attenuation < 1.0))
                    throw parameter_error("obstacle attenuation must lie in [0,1)");
            }
        }
    };

    // Rasterization shared by every module. Columns start on the aperture plane
    // (x_min = 0) with x_i = x_min + i*step_x for i = 0 .. floor(extent/step_x).
    // Rows are anchored on y = 0 so every antenna sits on a row centre:
    // y_j = (j + row_offset)*step_y with row_offset = ceil(y_min/step_y).
    class grid_spec
    {
    public:
        grid_spec() = default;
        grid_spec(double x0, double step_x, std::size_t cols, long row_offset, double step_y, std::size_t rows)
            : x0_(x0), dx_(step_x), cols_(cols), row_offset_(row_offset), dy_(step_y), rows_(rows)
        {
        }

        std::size_t cols() const { return cols_; }
        std::size_t rows() const { return rows_; }
        double step_x() const { return dx_; }
        double step_y() const { return dy_; }
        long row_offset() const { return row_offset_; }

        double x(std::size_t col) const { return x0_ + static_cast<double>(col) * dx_; }
        double y(std::size_t row) const { return static_cast<double>(static_cast<long>(row) + row_offset_) * dy_; }

        // Nearest cell; nullopt outside the grid (half a step of slack at the edges).
        std::optional<std::size_t> col_of(double xv) const
        {
            const double f = std::round((xv - x0_) / dx_);
            if (!std::isfinite(f) || f < 0.0 || f > static_cast<double>(cols_ - 1))
                return std::nullopt;
            return static_cast<std::size_t>(f);
        }
        std::optional<std::size_t> row_of(double yv) const
        {
            const double f = std::round(yv / dy_) - static_cast<double>(row_offset_);
            if (!std::isfinite(f) || f < 0.0 || f > static_cast<double>(rows_ - 1))
                return std::nullopt;
            return static_cast<std::size_t>(f);
        }

        // Row holding antenna index n.
        std::size_t antenna_row(int n) const { return static_cast<std::size_t>(n - row_offset_); }

    private:
        double x0_ = 0.0;
        double dx_ = 0.0;
        std::size_t cols_ = 0;
        long row_offset_ = 0;
        double dy_ = 0.0;
        std::size_t rows_ = 0;
    };

    struct cell
    {
        std::size_t col = 0;
        std::size_t row = 0;
        bool operator==(const cell &) const = default;
    };

    namespace detail
    {
        inline constexpr double lattice_eps = 1e-9;
    }

    inline grid_spec build_grid(const scenario_config &config)
    {
        config.validate();
        const double lambda = config.wavelength();
        const double half = 0.5 * lambda * (1.0 + 1e-12);
        const double dx = config.step_x(), dy = config.step_y();
        if (dx > half || dy > half)
            throw sampling_error("grid steps must not exceed lambda/2");
        if (std::abs(dy - config.spacing()) > 1e-12 * config.spacing())
            throw sampling_error("row spacing must equal the antenna spacing");

        const auto &reg = config.region;
        if (!(reg.x_max > reg.x_min) || !(reg.y_max > reg.y_min))
            throw geometry_error("scenario region is empty or inverted");
        if (reg.x_min != 0.0)
            throw geometry_error("region must start on the aperture plane (x_min = 0)");

        const auto cols = static_cast<std::size_t>(std::floor((reg.x_max - reg.x_min) / dx + detail::lattice_eps)) + 1;
        const long j_lo = static_cast<long>(std::ceil(reg.y_min / dy - detail::lattice_eps));
        const long j_hi = static_cast<long>(std::floor(reg.y_max / dy + detail::lattice_eps));
        if (j_hi < j_lo)
            throw geometry_error("scenario region holds no grid rows");
        if (config.index_min() < j_lo || config.index_max() > j_hi)
            throw geometry_error("aperture does not fit inside the region's y-extent");

        for (const auto &o : config.obstacles)
            if (o.x_lo() < reg.x_min || o.x_hi() > reg.x_max || o.y_lo() < reg.y_min || o.y_hi() > reg.y_max)
                throw geometry_error("obstacle extends outside the scenario region");

        return grid_spec(reg.x_min, dx, cols, j_lo, dy, static_cast<std::size_t>(j_hi - j_lo + 1));
    }

    inline bool contains(const obstacle &o, point p, double tol = 1e-12)
    {
        return p.x >= o.x_lo() - tol && p.x <= o.x_hi() + tol && p.y >= o.y_lo() - tol && p.y <= o.y_hi() + tol;
    }

    // True when column x_index intersects at least one obstacle's x-extent.
    inline bool column_has_obstacle(const scenario_config &config, const grid_spec &grid, std::size_t x_index)
    {
        const double xv = grid.x(x_index);
        return std::any_of(config.obstacles.begin(), config.obstacles.end(),
                           [&](const obstacle &o) { return xv >= o.x_lo() - 1e-12 && xv <= o.x_hi() + 1e-12; });
    }

    // Multiplicative mask for one grid column. Overlaps keep the most opaque value.
    inline std::vector<double> blockage_mask_row(const scenario_config &config, const grid_spec &grid, std::size_t x_index)
    {
        if (x_index >= grid.cols())
            throw geometry_error("column index outside the grid");
        std::vector<double> row(grid.rows(), 1.0);
        const double xv = grid.x(x_index);
        for (const auto &o : config.obstacles)
        {
            if (xv < o.x_lo() - 1e-12 || xv > o.x_hi() + 1e-12)
                continue;
            for (std::size_t j = 0; j < grid.rows(); ++j)
                if (contains(o, {xv, grid.y(j)}))
                    row[j] = std::min(row[j], o.attenuation);
        }
        return row;
    }

    // Closed segment a-b against closed rectangle, Liang-Barsky slab clipping.
    inline bool segment_hits(const obstacle &o, point a, point b)
    {
        double t0 = 0.0, t1 = 1.0;
        const double d[2] = {b.x - a.x, b.y - a.y};
        const double lo[2] = {o.x_lo(), o.y_lo()};
        const double hi[2] = {o.x_hi(), o.y_hi()};
        const double p0[2] = {a.x, a.y};
        for (int k = 0; k < 2; ++k)
        {
            if (d[k] == 0.0)
            {
                if (p0[k] < lo[k] || p0[k] > hi[k])
                    return false;
                continue;
            }
            double ta = (lo[k] - p0[k]) / d[k];
            double tb = (hi[k] - p0[k]) / d[k];
            if (ta > tb)
                std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1)
                return false;
        }
        return true;
    }

    // Fraction of antennas whose straight path to the receiver crosses an obstacle.
    inline double blockage_ratio(const scenario_config &config, point receiver)
    {
        if (!(receiver.x > 0.0))
            throw geometry_error("receiver must lie in front of the aperture plane");
        if (config.obstacles.empty())
            return 0.0;
        int blocked = 0;
        for (int n = config.index_min(); n <= config.index_max(); ++n)
        {
            const point a{0.0, config.antenna_y(n)};
            if (std::any_of(config.obstacles.begin(), config.obstacles.end(),
                            [&](const obstacle &o) { return segment_hits(o, a, receiver); }))
                ++blocked;
        }
        return static_cast<double>(blocked) / config.n_antennas;
    }

    // ---- JSON --------------------------------------------------------------

    inline nlohmann::json to_json(const scenario_config &c)
    {
        nlohmann::json j;
        j["frequency_hz"] = c.frequency_hz;
        j["n_antennas"] = c.n_antennas;
        j["region"] = {{"x_min", c.region.x_min}, {"x_max", c.region.x_max}, {"y_min", c.region.y_min}, {"y_max", c.region.y_max}};
        j["obstacles"] = nlohmann::json::array();
        for (const auto &o : c.obstacles)
            j["obstacles"].push_back({{"cx", o.center.x}, {"cy", o.center.y}, {"dx", o.dx}, {"dy", o.dy}, {"attenuation", o.attenuation}});
        j["attenuation_default"] = c.attenuation_default;
        if (c.grid_step_x > 0.0)
            j["grid_step_x"] = c.grid_step_x;
        return j;
    }

    inline scenario_config scenario_from_json(const nlohmann::json &j)
    {
        try
        {
            scenario_config c;
            c.frequency_hz = j.at("frequency_hz").get<double>();
            c.n_antennas = j.at("n_antennas").get<int>();
            const auto &r = j.at("region");
            c.region = {r.at("x_min").get<double>(), r.at("x_max").get<double>(), r.at("y_min").get<double>(), r.at("y_max").get<double>()};
            c.attenuation_default = j.value("attenuation_default", 0.0);
            c.grid_step_x = j.value("grid_step_x", 0.0);
            for (const auto &o : j.value("obstacles", nlohmann::json::array()))
            {
                obstacle ob;
                ob.center = {o.at("cx").get<double>(), o.at("cy").get<double>()};
                ob.dx = o.at("dx").get<double>();
                ob.dy = o.at("dy").get<double>();
                ob.attenuation = o.value("attenuation", c.attenuation_default);
                c.obstacles.push_back(ob);
            }
            c.validate();
            return c;
        }
        catch (const nlohmann::json::exception &e)
        {
            throw config_error(std::string("malformed scenario JSON: ") + e.what());
        }
    }

    inline scenario_config load_scenario(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw config_error("cannot open scenario file " + path);
        nlohmann::json j;
        try
        {
            in >> j;
        }
        catch (const nlohmann::json::exception &e)
        {
            throw config_error(std::string("scenario file is not JSON: ") + e.what());
        }
        return scenario_from_json(j);
    }

    // 64-bit FNV-1a over bytes.
    inline std::uint64_t fnv1a(const std::string &bytes, std::uint64_t h = 0xcbf29ce484222325ULL)
    {
        for (unsigned char ch : bytes)
        {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    inline std::string hex64(std::uint64_t v)
    {
        static constexpr char digits[] = "0123456789abcdef";
        std::string s(16, '0');
        for (int i = 15; i >= 0; --i, v >>= 4)
            s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        return s;
    }

    inline std::string scenario_hash(const scenario_config &c) { return hex64(fnv1a(to_json(c).dump())); }
}
