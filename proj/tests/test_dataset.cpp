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
#include <set>

#include "oracles.hpp"

using namespace airybt;

namespace
{
    const std::string config_dir = AIRYBT_CONFIG_DIR;

    scenario_config toy() { return load_scenario(config_dir + "/toy.json"); }

    codebook_spec small_spec()
    {
        codebook_spec s;
        s.l1 = 64;
        s.l2 = 3;
        s.l3 = 5;
        s.r_min = 0.3;
        s.r_max = 1.8;
        return s;
    }

    receiver_sampling random_sampling(std::size_t count, std::uint64_t seed)
    {
        receiver_sampling s;
        s.area = {0.3, 1.8, -0.75, 0.75};
        s.random = true;
        s.count = count;
        s.seed = seed;
        return s;
    }

    std::string bytes_of(const dataset &ds) { return serialize_dataset(ds); }
    dataset parse(const std::string &s) { return parse_dataset(std::span<const char>(s.data(), s.size())); }

    // Records whose stored fields are exactly representable on disk.
    dataset random_dataset(std::size_t n, std::uint64_t seed)
    {
        const auto c = toy();
        const auto spec = small_spec();
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<float> u(-1.0f, 1.0f);
        dataset ds;
        ds.manifest = make_manifest(c, spec, random_sampling(n, seed), spec.l1, n);
        for (std::size_t i = 0; i < n; ++i)
        {
            training_record r;
            r.x = 0.3 + 1.5 * std::ldexp(static_cast<double>(rng() >> 11), -53);
            r.y = std::ldexp(static_cast<double>(rng() >> 11), -53) - 0.5;
            r.blockage = std::abs(u(rng));
            for (std::size_t k = 0; k < spec.l1; ++k)
                r.pattern.emplace_back(u(rng), u(rng));
            r.labels = {rng() % spec.l1, rng() % spec.l2, rng() % spec.l3};
            r.gain = std::abs(u(rng)) * 1e3f;
            ds.records.push_back(std::move(r));
        }
        return ds;
    }

    dataset generated(std::size_t count)
    {
        static const dataset ds = generate_dataset(toy(), small_spec(), random_sampling(100, 3));
        dataset out = ds;
        out.records.resize(count);
        out.manifest["record_count"] = count;
        return out;
    }
}

TEST(Sampling, LatticeSkipsObstacleCells)
{
    const auto c = toy();
    const auto grid = build_grid(c);
    receiver_sampling s;
    s.area = {0.3, 0.5, -0.1, 0.1};
    s.stride = 1;
    const auto cells = sample_receivers(c, grid, s);
    ASSERT_FALSE(cells.empty());
    std::size_t inside = 0;
    for (std::size_t col = 0; col < grid.cols(); ++col)
        for (std::size_t row = 0; row < grid.rows(); ++row)
        {
            const point p{grid.x(col), grid.y(row)};
            if (p.x >= 0.3 - 1e-9 && p.x <= 0.5 + 1e-9 && p.y >= -0.1 - 1e-9 && p.y <= 0.1 + 1e-9 && contains(c.obstacles[0], p))
                ++inside;
        }
    EXPECT_GT(inside, 0u);
    for (const auto &cl : cells)
        EXPECT_FALSE(contains(c.obstacles[0], {grid.x(cl.col), grid.y(cl.row)}));
}

TEST(Sampling, RandomIsDistinctSortedAndSeeded)
{
    const auto c = toy();
    const auto grid = build_grid(c);
    const auto a = sample_receivers(c, grid, random_sampling(500, 9));
    const auto b = sample_receivers(c, grid, random_sampling(500, 9));
    EXPECT_EQ(a, b);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto &cl : a)
        seen.insert({cl.col, cl.row});
    EXPECT_EQ(seen.size(), 500u);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [](const cell &p, const cell &q) { return p.col != q.col ? p.col < q.col : p.row < q.row; }));
    EXPECT_NE(a, sample_receivers(c, grid, random_sampling(500, 10)));
}

TEST(Sampling, Rejections)
{
    const auto c = toy();
    const auto grid = build_grid(c);
    auto s = random_sampling(10, 0);
    s.area.x_max = 2.0;
    EXPECT_THROW(sample_receivers(c, grid, s), geometry_error);
    s = random_sampling(10, 0);
    s.area = {0.3, 0.301, 0.0, 0.0};
    EXPECT_THROW(sample_receivers(c, grid, s), size_error);
    receiver_sampling l;
    l.area = {0.3, 1.8, -0.75, 0.75};
    l.stride = 0;
    EXPECT_THROW(sample_receivers(c, grid, l), parameter_error);
}

TEST(Generate, LabelsAreTheExhaustiveOptimum)
{
    const auto ds = generated(100);
    ASSERT_EQ(ds.records.size(), 100u);
    EXPECT_EQ(ds.pattern_length(), 64u);
    const auto c = toy();
    const auto grid = build_grid(c);
    const propagator prop(c, grid);
    const auto cb = build_codebook(small_spec(), c);
    const auto dft = build_dft_codebook(c, 64);
    for (std::size_t i = 0; i < ds.records.size(); i += 20)
    {
        const auto &r = ds.records[i];
        const auto best = exhaustive_sweep(cb, simulated_gains(prop, {r.x, r.y}));
        EXPECT_EQ(best.best, r.labels);
        EXPECT_NEAR(best.gain, r.gain, 1e-9 * r.gain);
        EXPECT_NEAR(r.blockage, oracle::sampled_blockage(c, {r.x, r.y}), 2e-3);
        const auto p = dft_sweep(prop, dft, point{r.x, r.y});
        for (std::size_t k = 0; k < p.size(); ++k)
            EXPECT_NEAR(std::abs(p[k] - r.pattern[k]), 0.0, 1e-9 * (1.0 + std::abs(p[k])));
    }
}

TEST(Generate, FullOcclusionLabelsFirstCodeword)
{
    auto c = toy();
    c.obstacles = {{{0.2, 0.0}, 0.02, 1.5, 0.0}};
    const auto ds = generate_dataset(c, small_spec(), random_sampling(5, 1));
    for (const auto &r : ds.records)
    {
        EXPECT_EQ(r.gain, 0.0);
        EXPECT_EQ(r.labels, (index3{0, 0, 0}));
        EXPECT_EQ(r.blockage, 1.0);
        for (const auto &v : r.pattern)
            EXPECT_EQ(v, cplx(0.0));
    }
}

TEST(Split, SizesAndDeterminism)
{
    const auto s = split_dataset(1000, 4);
    EXPECT_EQ(s.train.size(), 800u);
    EXPECT_EQ(s.val.size(), 100u);
    EXPECT_EQ(s.test.size(), 100u);
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.val.begin(), s.val.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i)
        EXPECT_EQ(all[i], i);

    const auto t = split_dataset(43, 4);
    EXPECT_EQ(t.train.size(), 34u);
    EXPECT_EQ(t.val.size(), 4u);
    EXPECT_EQ(t.test.size(), 5u);

    const auto again = split_dataset(1000, 4);
    EXPECT_EQ(again.train, s.train);
    EXPECT_EQ(again.test, s.test);
    EXPECT_NE(split_dataset(1000, 5).train, s.train);
    EXPECT_THROW(split_dataset(9, 0), size_error);
}

TEST(DatasetFile, RoundTripBitExact)
{
    const auto ds = random_dataset(1000, 17);
    const auto a = bytes_of(ds);
    const auto back = parse(a);
    EXPECT_EQ(back.records, ds.records);
    EXPECT_EQ(back.manifest, ds.manifest);
    EXPECT_EQ(bytes_of(back), a);

    const std::string path = ::testing::TempDir() + "d.abtd";
    write_records(path, ds);
    EXPECT_EQ(bytes_of(read_records(path)), a);
    std::remove(path.c_str());
}

TEST(DatasetFile, RecordSize)
{
    EXPECT_EQ(record_size(255), 32u + 8u * 255u);
    const auto ds = random_dataset(3, 1);
    const auto a = bytes_of(ds);
    const std::size_t header = a.size() - 3 * record_size(64);
    EXPECT_EQ(a.substr(0, 8), "ABTD0001");
    EXPECT_GT(header, 20u);
}

TEST(DatasetFile, DistinctRejections)
{
    const auto good = bytes_of(random_dataset(20, 2));
    auto m = good;
    m[3] = 'X';
    EXPECT_THROW(parse(m), magic_error);

    auto v = good;
    v[8] = 2;
    EXPECT_THROW(parse(v), version_error);

    auto rs = good;
    rs[16] = static_cast<char>(rs[16] + 1);
    EXPECT_THROW(parse(rs), shape_error);

    EXPECT_THROW(parse(good.substr(0, good.size() - 1)), truncation_error);
    EXPECT_THROW(parse(good + "x"), format_error);

    auto ds = random_dataset(20, 2);
    ds.records[7].labels.l1 = 64;
    EXPECT_THROW(parse(bytes_of(ds)), range_error);
    ds.records[7].labels = {0, 3, 0};
    EXPECT_THROW(parse(bytes_of(ds)), range_error);
}

TEST(Audit, AcceptsGeneratedAndFlagsTampering)
{
    const auto ds = generated(20);
    EXPECT_TRUE(audit_dataset(ds, 0.25, 1).ok());
    EXPECT_TRUE(audit_dataset(parse(bytes_of(ds)), 0.25, 1).ok());

    auto bad = ds;
    for (auto &r : bad.records)
        r.labels.l2 = (r.labels.l2 + 1) % 3;
    EXPECT_GT(audit_dataset(bad, 0.25, 1).label_mismatches, 0u);

    bad = ds;
    for (auto &r : bad.records)
        r.gain *= 1.01;
    EXPECT_GT(audit_dataset(bad, 0.25, 1).gain_mismatches, 0u);
}

TEST(Manifest, HashDriftRejected)
{
    const auto c = toy();
    const auto spec = small_spec();
    const auto m = make_manifest(c, spec, random_sampling(10, 0), 64, 10);
    EXPECT_NO_THROW(check_manifest(m, c, spec));
    auto c2 = c;
    c2.obstacles[0].dx = 0.11;
    EXPECT_THROW(check_manifest(m, c2, spec), config_error);
    auto s2 = spec;
    s2.c_max = 4.0;
    EXPECT_THROW(check_manifest(m, c, s2), config_error);
}
