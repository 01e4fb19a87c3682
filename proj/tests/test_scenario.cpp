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

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace airybt;

namespace
{
    scenario_config detour_scenario()
    {
        scenario_config c;
        c.region = {0.0, 3.0, -1.0, 1.0};
        c.obstacles.push_back({{1.2, 0.2}, 0.8, 0.4, 0.0});
        return c;
    }
}

TEST(Scenario, WavelengthAndSpacing)
{
    scenario_config c;
    EXPECT_NEAR(c.wavelength(), 2.99792458e-3, 1e-15);
    EXPECT_DOUBLE_EQ(c.spacing(), c.wavelength() / 2);
    EXPECT_DOUBLE_EQ(c.step_x(), c.spacing());
    EXPECT_EQ(c.index_min(), -127);
    EXPECT_EQ(c.index_max(), 127);
}

TEST(Scenario, EvenAntennaCountRejected)
{
    scenario_config c;
    c.n_antennas = 64;
    EXPECT_THROW(c.validate(), parameter_error);
    EXPECT_THROW(build_grid(c), parameter_error);
}

TEST(Scenario, ReferenceGridRows)
{
    scenario_config c;
    const auto g = build_grid(c);
    // 4 m / (lambda/2) is about 2668.5; rows are anchored at y = 0.
    EXPECT_NEAR(static_cast<double>(g.rows()), 2667.0, 3.0);
    EXPECT_EQ(g.rows() % 2, 1u);
    EXPECT_EQ(g.cols(), static_cast<std::size_t>(std::floor(4.0 / c.step_x() + 1e-9)) + 1);
}

TEST(Scenario, AntennasOccupyCentredRows)
{
    scenario_config c;
    const auto g = build_grid(c);
    const auto r0 = g.antenna_row(c.index_min());
    for (int n = c.index_min(); n <= c.index_max(); ++n)
    {
        EXPECT_EQ(g.antenna_row(n), r0 + static_cast<std::size_t>(n - c.index_min()));
        EXPECT_NEAR(g.y(g.antenna_row(n)), c.antenna_y(n), 1e-12);
    }
    EXPECT_NEAR(g.y(g.antenna_row(0)), 0.0, 1e-15);
}

TEST(Scenario, CoarseStepRejected)
{
    scenario_config c;
    c.grid_step_y = c.wavelength();
    EXPECT_THROW(build_grid(c), sampling_error);
    scenario_config d;
    d.grid_step_x = d.wavelength();
    EXPECT_THROW(build_grid(d), sampling_error);
}

TEST(Scenario, ObstacleOutsideRegionRejected)
{
    scenario_config c;
    c.obstacles.push_back({{4.0, 0.0}, 0.2, 0.2, 0.0});
    EXPECT_THROW(build_grid(c), geometry_error);
    scenario_config d;
    d.obstacles.push_back({{1.0, 0.0}, 0.0, 0.2, 0.0});
    EXPECT_THROW(d.validate(), geometry_error);
}

TEST(Scenario, MaskRowFreeSpaceIsOnes)
{
    scenario_config c;
    const auto g = build_grid(c);
    const auto row = blockage_mask_row(c, g, 300);
    EXPECT_EQ(row.size(), g.rows());
    for (double v : row)
        EXPECT_EQ(v, 1.0);
}

TEST(Scenario, MaskRowReferenceObstacle)
{
    scenario_config c;
    c.obstacles.push_back({{0.5, 0.0}, 0.2, 0.2, 0.0});
    const auto g = build_grid(c);
    const auto col = *g.col_of(0.5);
    const auto row = blockage_mask_row(c, g, col);
    for (std::size_t r = 0; r < g.rows(); ++r)
        EXPECT_EQ(row[r], std::abs(g.y(r)) <= 0.1 ? 0.0 : 1.0) << "row " << r;
    for (double x : {0.39, 0.61, 1.0})
        for (double v : blockage_mask_row(c, g, *g.col_of(x)))
            EXPECT_EQ(v, 1.0);
}

TEST(Scenario, OverlappingObstaclesTakeMinimum)
{
    scenario_config c;
    c.obstacles.push_back({{1.0, 0.0}, 0.2, 0.4, 0.5});
    c.obstacles.push_back({{1.0, 0.1}, 0.2, 0.2, 0.2});
    const auto g = build_grid(c);
    const auto row = blockage_mask_row(c, g, *g.col_of(1.0));
    EXPECT_EQ(row[*g.row_of(0.1)], 0.2);
    EXPECT_EQ(row[*g.row_of(-0.1)], 0.5);
    EXPECT_EQ(row[*g.row_of(0.5)], 1.0);
    for (double v : row)
        EXPECT_TRUE(v == 1.0 || v == 0.5 || v == 0.2);
}

TEST(Scenario, BlockageRatioTrivialCases)
{
    scenario_config c;
    EXPECT_EQ(blockage_ratio(c, {2.0, 0.3}), 0.0);
    c.obstacles.push_back({{1.0, 0.0}, 0.1, 3.0, 0.0});
    EXPECT_EQ(blockage_ratio(c, {2.0, 0.3}), 1.0);
    EXPECT_THROW(blockage_ratio(c, {0.0, 0.3}), geometry_error);
}

TEST(Scenario, BlockageRatioDetourMatchesSampledOracle)
{
    const auto c = detour_scenario();
    const point rx{2.5, -0.1};
    const double expect = oracle::sampled_blockage(c, rx);
    EXPECT_NEAR(blockage_ratio(c, rx), expect, 1e-12);
    EXPECT_NEAR(blockage_ratio(c, rx), 96.0 / 255.0, 1e-12);
}

TEST(Scenario, BlockageMonotoneUnderDilation)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 40; ++t)
    {
        scenario_config c;
        c.region = {0.0, 3.0, -1.0, 1.0};
        obstacle o{{0.5 + u(rng), -0.4 + 0.8 * u(rng)}, 0.05 + 0.2 * u(rng), 0.05 + 0.2 * u(rng), 0.0};
        c.obstacles = {o};
        const point rx{2.0 + u(rng) * 0.9, -0.9 + 1.8 * u(rng)};
        const double before = blockage_ratio(c, rx);
        c.obstacles[0].dx *= 1.0 + u(rng);
        c.obstacles[0].dy *= 1.0 + u(rng);
        EXPECT_GE(blockage_ratio(c, rx), before);
    }
}

TEST(Scenario, GridRoundTrip)
{
    scenario_config c;
    const auto g = build_grid(c);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(0.0, 4.0), uy(-1.99, 1.99);
    for (int t = 0; t < 1000; ++t)
    {
        const double x = ux(rng), y = uy(rng);
        const auto col = g.col_of(x);
        const auto row = g.row_of(y);
        ASSERT_TRUE(col && row);
        EXPECT_LE(std::abs(g.x(*col) - x), 0.5 * g.step_x() + 1e-12);
        EXPECT_LE(std::abs(g.y(*row) - y), 0.5 * g.step_y() + 1e-12);
    }
    EXPECT_FALSE(g.col_of(-1.0));
    EXPECT_FALSE(g.row_of(5.0));
}

TEST(Scenario, JsonRoundTripAndHash)
{
    const auto c = detour_scenario();
    const auto back = scenario_from_json(to_json(c));
    EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
    EXPECT_EQ(scenario_hash(back), scenario_hash(c));
    auto moved = c;
    moved.obstacles[0].center.y += 0.01;
    EXPECT_NE(scenario_hash(moved), scenario_hash(c));
    EXPECT_THROW(scenario_from_json(nlohmann::json::parse(R"({"n_antennas": 3})")), config_error);
}
