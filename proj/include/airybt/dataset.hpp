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
#include <cstring>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "codebook.hpp"
#include "error.hpp"
#include "field.hpp"
#include "network.hpp"
#include "search.hpp"
#include "scenario.hpp"

namespace airybt
{
    struct training_record
    {
        double x = 0.0, y = 0.0;
        double blockage = 0.0;
        std::vector<cplx> pattern;
        index3 labels;
        double gain = 0.0;

        bool operator==(const training_record &) const = default;
    };

    // Where receivers are placed. The lattice mode takes every `stride`-th grid
    // cell in x and y; the random mode draws `count` distinct cells.
    struct receiver_sampling
    {
        region area{0.5, 4.0, -2.0, 2.0};
        std::size_t stride = 1;
        bool random = false;
        std::size_t count = 0;
        std::uint64_t seed = 0;
    };

    inline nlohmann::json to_json(const receiver_sampling &s)
    {
        return {{"x_min", s.area.x_min}, {"x_max", s.area.x_max}, {"y_min", s.area.y_min}, {"y_max", s.area.y_max},
                {"stride", s.stride},    {"mode", s.random ? "random" : "lattice"}, {"count", s.count}, {"seed", s.seed}};
    }

    inline receiver_sampling sampling_from_json(const nlohmann::json &j)
    {
        try
        {
            receiver_sampling s;
            s.area = {j.at("x_min").get<double>(), j.at("x_max").get<double>(), j.at("y_min").get<double>(), j.at("y_max").get<double>()};
            s.stride = j.value("stride", std::size_t{1});
            const auto mode = j.value("mode", std::string("lattice"));
            if (mode != "lattice" && mode != "random")
                throw config_error("sampling mode must be lattice or random");
            s.random = mode == "random";
            s.count = j.value("count", std::size_t{0});
            s.seed = j.value("seed", std::uint64_t{0});
            return s;
        }
        catch (const nlohmann::json::exception &e)
        {
            throw config_error(std::string("malformed receiver sampling: ") + e.what());
        }
    }

    // Grid cells for the receivers, in row-major (x outer) order. Cells inside
    // an obstacle are skipped.
    inline std::vector<cell> sample_receivers(const scenario_config &config, const grid_spec &grid, const receiver_sampling &s)
    {
        const auto &a = s.area;
        const double tol = 1e-9;
        if (!(a.x_min > 0.0) || a.x_max < a.x_min || a.y_max < a.y_min)
            throw geometry_error("receiver region must be ordered and lie in front of the array");
        const auto &g = config.region;
        if (a.x_max > g.x_max + tol || a.y_min < g.y_min - tol || a.y_max > g.y_max + tol)
            throw geometry_error("receiver region extends outside the simulation grid");
        if (s.stride == 0)
            throw parameter_error("sampling stride must be positive");
        std::vector<std::size_t> cols, rows;
        for (std::size_t c = 0; c < grid.cols(); ++c)
            if (grid.x(c) >= a.x_min - tol && grid.x(c) <= a.x_max + tol)
                cols.push_back(c);
        for (std::size_t r = 0; r < grid.rows(); ++r)
            if (grid.y(r) >= a.y_min - tol && grid.y(r) <= a.y_max + tol)
                rows.push_back(r);
        const std::size_t step = s.random ? 1 : s.stride;
        std::vector<cell> cells;
        for (std::size_t i = 0; i < cols.size(); i += step)
            for (std::size_t k = 0; k < rows.size(); k += step)
            {
                const point p{grid.x(cols[i]), grid.y(rows[k])};
                const bool inside = std::any_of(config.obstacles.begin(), config.obstacles.end(), [&](const obstacle &o) { return contains(o, p); });
                if (!inside)
                    cells.push_back({cols[i], rows[k]});
            }
        if (s.random)
        {
            if (s.count > cells.size())
                throw size_error("more random receivers requested than free cells");
            std::mt19937_64 rng(s.seed);
            for (std::size_t i = 0; i < s.count; ++i)
                std::swap(cells[i], cells[i + rng() % (cells.size() - i)]);
            cells.resize(s.count);
            std::sort(cells.begin(), cells.end(), [](const cell &p, const cell &q) { return p.col != q.col ? p.col < q.col : p.row < q.row; });
        }
        return cells;
    }

    struct dataset
    {
        nlohmann::json manifest;
        std::vector<training_record> records;

        std::size_t pattern_length() const { return manifest.at("pattern_length").get<std::size_t>(); }
        codebook_spec spec() const { return codebook_spec_from_json(manifest.at("codebook")); }
        scenario_config scenario() const { return scenario_from_json(manifest.at("scenario")); }
    };

    inline std::string codebook_hash(const codebook_spec &s) { return hex64(fnv1a(to_json(s).dump())); }

    inline nlohmann::json make_manifest(const scenario_config &config, const codebook_spec &spec, const receiver_sampling &sampling,
                                        std::size_t pattern_length, std::size_t records)
    {
        return {{"format", "abtd"},
                {"scenario", to_json(config)},
                {"scenario_hash", scenario_hash(config)},
                {"codebook", to_json(spec)},
                {"codebook_hash", codebook_hash(spec)},
                {"sampling", to_json(sampling)},
                {"pattern_length", pattern_length},
                {"record_count", records},
                {"split", nullptr}};
    }

    // Throws when the manifest was produced from a different scenario or codebook.
    inline void check_manifest(const nlohmann::json &manifest, const scenario_config &config, const codebook_spec &spec)
    {
        if (manifest.value("scenario_hash", std::string()) != scenario_hash(config))
            throw config_error("dataset scenario hash does not match the scenario");
        if (manifest.value("codebook_hash", std::string()) != codebook_hash(spec))
            throw config_error("dataset codebook hash does not match the codebook");
    }

    struct generation_options
    {
        unsigned jobs = 1;
        propagation_options propagation{};
        double noise_sigma = 0.0; // additive complex Gaussian on the pattern, off by default
        std::uint64_t noise_seed = 0;
    };

    // Per receiver best codeword of a full sweep, one propagation per codeword.
    struct sweep_table
    {
        std::vector<std::size_t> best_flat;
        std::vector<double> best_gain;
    };

    inline sweep_table best_codewords(const propagator &prop, const codebook &cb, std::span<const cell> receivers, unsigned jobs)
    {
        const auto plan = prop.make_plan({receivers.begin(), receivers.end()});
        sweep_table t{std::vector<std::size_t>(receivers.size(), 0), std::vector<double>(receivers.size(), -1.0)};
        const auto idx = all_indices(cb);
        for_each_field(prop, cb, idx, plan, jobs, [&](std::size_t f, std::span<const cplx> v) {
            for (std::size_t r = 0; r < receivers.size(); ++r)
            {
                const double g = beam_gain(v[r]);
                if (g > t.best_gain[r])
                {
                    t.best_gain[r] = g;
                    t.best_flat[r] = f;
                }
            }
        });
        return t;
    }

    inline dataset generate_dataset(const scenario_config &config, const codebook_spec &spec, const receiver_sampling &sampling,
                                    const generation_options &opt = {})
    {
        const auto grid = build_grid(config);
        const propagator prop(config, grid, opt.propagation);
        const auto cells = sample_receivers(config, grid, sampling);
        const auto dft = build_dft_codebook(config, spec.l1);
        const auto cb = build_codebook(spec, config);

        auto patterns = dft_sweep(prop, dft, cells, opt.jobs);
        if (opt.noise_sigma > 0.0)
        {
            std::mt19937_64 rng(opt.noise_seed);
            std::normal_distribution<double> n(0.0, opt.noise_sigma / std::sqrt(2.0));
            for (auto &p : patterns)
                for (auto &v : p)
                    v += cplx(n(rng), n(rng));
        }
        const auto best = best_codewords(prop, cb, cells, opt.jobs);

        dataset ds;
        ds.manifest = make_manifest(config, spec, sampling, dft.size(), cells.size());
        ds.records.reserve(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i)
        {
            training_record r;
            r.x = grid.x(cells[i].col);
            r.y = grid.y(cells[i].row);
            r.blockage = blockage_ratio(config, {r.x, r.y});
            r.pattern = std::move(patterns[i]);
            r.labels = cb.unflat(best.best_flat[i]);
            r.gain = best.best_gain[i];
            ds.records.push_back(std::move(r));
        }
        return ds;
    }

    // ---- split ------------------------------------------------------------------

    struct dataset_split
    {
        std::vector<std::size_t> train, val, test;
    };

    // Seeded Fisher-Yates shuffle; train = floor(0.8 n), val = floor(0.1 n),
    // test = the rest.
    inline dataset_split split_dataset(std::size_t n, std::uint64_t seed)
    {
        if (n < 10)
            throw size_error("need at least 10 records to split");
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::mt19937_64 rng(seed);
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(idx[i], idx[rng() % (i + 1)]);
        const std::size_t n_train = n * 8 / 10, n_val = n / 10;
        dataset_split s;
        s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
        return s;
    }

    inline nlohmann::json to_json(const dataset_split &s, std::uint64_t seed)
    {
        return {{"seed", seed}, {"train", s.train}, {"val", s.val}, {"test", s.test}};
    }

    // ---- record file ------------------------------------------------------------
    //
    // Little-endian: "ABTD0001" | u32 version | u32 L1 | u32 record size |
    // u32 manifest length | manifest JSON | records of
    //   f64 x, f64 y, f32 blockage, f32 pattern[2 L1] (re, im interleaved),
    //   u16 l1, u16 l2, u16 l3, u16 pad, f32 gain.

    inline constexpr char dataset_magic[8] = {'A', 'B', 'T', 'D', '0', '0', '0', '1'};
    inline constexpr std::uint32_t dataset_version = 1;

    inline std::size_t record_size(std::size_t l1) { return 8 + 8 + 4 + 8 * l1 + 4 * 2 + 4; }

    inline std::string serialize_dataset(const dataset &ds)
    {
        const std::size_t l1 = ds.pattern_length();
        if (ds.manifest.at("record_count").get<std::size_t>() != ds.records.size())
            throw format_error("manifest record count does not match the records");
        if (l1 > 0xffffffffu)
            throw format_error("pattern length out of range");
        detail::byte_writer out;
        out.bytes(dataset_magic, 8);
        out.pod(dataset_version);
        out.pod<std::uint32_t>(static_cast<std::uint32_t>(l1));
        out.pod<std::uint32_t>(static_cast<std::uint32_t>(record_size(l1)));
        out.str(ds.manifest.dump());
        for (const auto &r : ds.records)
        {
            if (r.pattern.size() != l1)
                throw format_error("record pattern length does not match the header");
            if (r.labels.l1 > 0xffff || r.labels.l2 > 0xffff || r.labels.l3 > 0xffff)
                throw range_error("label does not fit in 16 bits");
            out.pod(r.x);
            out.pod(r.y);
            out.pod(static_cast<float>(r.blockage));
            for (const auto &v : r.pattern)
            {
                out.pod(static_cast<float>(v.real()));
                out.pod(static_cast<float>(v.imag()));
            }
            out.pod(static_cast<std::uint16_t>(r.labels.l1));
            out.pod(static_cast<std::uint16_t>(r.labels.l2));
            out.pod(static_cast<std::uint16_t>(r.labels.l3));
            out.pod(std::uint16_t{0});
            out.pod(static_cast<float>(r.gain));
        }
        return std::move(out.buffer());
    }

    inline dataset parse_dataset(std::span<const char> bytes)
    {
        detail::byte_reader in(bytes);
        char magic[8];
        in.bytes(magic, 8);
        if (std::memcmp(magic, dataset_magic, 8) != 0)
            throw magic_error("not an ABTD dataset file");
        if (const auto v = in.pod<std::uint32_t>(); v != dataset_version)
            throw version_error("unsupported dataset version " + std::to_string(v));
        const std::size_t l1 = in.pod<std::uint32_t>();
        if (in.pod<std::uint32_t>() != record_size(l1))
            throw shape_error("record size does not match the pattern length");
        dataset ds;
        try
        {
            ds.manifest = nlohmann::json::parse(in.str());
        }
        catch (const nlohmann::json::exception &e)
        {
            throw format_error(std::string("dataset manifest is not JSON: ") + e.what());
        }
        std::size_t count = 0;
        codebook_spec spec;
        try
        {
            count = ds.manifest.at("record_count").get<std::size_t>();
            spec = codebook_spec_from_json(ds.manifest.at("codebook"));
            if (ds.manifest.at("pattern_length").get<std::size_t>() != l1)
                throw shape_error("manifest pattern length disagrees with the header");
        }
        catch (const nlohmann::json::exception &e)
        {
            throw format_error(std::string("incomplete dataset manifest: ") + e.what());
        }
        const std::size_t rs = record_size(l1);
        if (in.remaining() / rs < count)
            throw truncation_error("dataset file holds fewer records than its manifest declares");
        if (in.remaining() != count * rs)
            throw format_error("dataset file has trailing bytes");
        ds.records.resize(count);
        for (auto &r : ds.records)
        {
            r.x = in.pod<double>();
            r.y = in.pod<double>();
            r.blockage = in.pod<float>();
            r.pattern.resize(l1);
            for (auto &v : r.pattern)
            {
                const float re = in.pod<float>();
                const float im = in.pod<float>();
                v = cplx(re, im);
            }
            r.labels.l1 = in.pod<std::uint16_t>();
            r.labels.l2 = in.pod<std::uint16_t>();
            r.labels.l3 = in.pod<std::uint16_t>();
            in.pod<std::uint16_t>();
            r.gain = in.pod<float>();
            if (r.labels.l1 >= spec.l1 || r.labels.l2 >= spec.l2 || r.labels.l3 >= spec.l3)
                throw range_error("record label outside the codebook");
        }
        return ds;
    }

    inline void write_records(const std::string &path, const dataset &ds) { detail::spit(path, serialize_dataset(ds)); }

    inline dataset read_records(const std::string &path)
    {
        const auto bytes = detail::slurp(path);
        return parse_dataset(std::span<const char>(bytes.data(), bytes.size()));
    }

    // ---- audit --------------------------------------------------------------

    struct audit_report
    {
        std::size_t checked = 0;
        std::size_t label_mismatches = 0;
        std::size_t gain_mismatches = 0;
        std::size_t pattern_mismatches = 0;
        bool ok() const { return label_mismatches == 0 && gain_mismatches == 0 && pattern_mismatches == 0; }
    };

    // Re-sweeps a random fraction of the records (at least one) and compares
    // labels, gains and patterns against the stored values. Stored values are
    // single precision, so comparisons allow float rounding; a label that
    // differs only by an exact tie is accepted.
    inline audit_report audit_dataset(const dataset &ds, double fraction = 0.01, std::uint64_t seed = 0, unsigned jobs = 1,
                                      propagation_options popt = {})
    {
        const auto config = ds.scenario();
        const auto spec = ds.spec();
        check_manifest(ds.manifest, config, spec);
        audit_report rep;
        if (ds.records.empty())
            return rep;
        const std::size_t n = ds.records.size();
        const std::size_t want = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))), 1, n);
        std::vector<std::size_t> pick(n);
        std::iota(pick.begin(), pick.end(), std::size_t{0});
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < want; ++i)
            std::swap(pick[i], pick[i + rng() % (n - i)]);
        pick.resize(want);
        std::sort(pick.begin(), pick.end());

        const auto grid = build_grid(config);
        const propagator prop(config, grid, popt);
        std::vector<cell> cells;
        for (auto i : pick)
            cells.push_back(receiver_cell(grid, {ds.records[i].x, ds.records[i].y}));
        const auto cb = build_codebook(spec, config);
        const auto plan = prop.make_plan(cells);
        std::vector<std::vector<double>> gains(cells.size(), std::vector<double>(cb.size()));
        const auto idx = all_indices(cb);
        for_each_field(prop, cb, idx, plan, jobs, [&](std::size_t f, std::span<const cplx> v) {
            for (std::size_t r = 0; r < cells.size(); ++r)
                gains[r][f] = beam_gain(v[r]);
        });
        const auto patterns = dft_sweep(prop, build_dft_codebook(config, ds.pattern_length()), cells, jobs);

        const double rel = 1e-6;
        for (std::size_t k = 0; k < pick.size(); ++k)
        {
            const auto &rec = ds.records[pick[k]];
            ++rep.checked;
            const auto &g = gains[k];
            const auto best = static_cast<std::size_t>(std::max_element(g.begin(), g.end()) - g.begin());
            const double scale = std::max(g[best], 1e-300);
            const auto stored = cb.flat(rec.labels);
            if (stored != best && std::abs(g[stored] - g[best]) > rel * scale)
                ++rep.label_mismatches;
            if (std::abs(rec.gain - g[best]) > rel * scale)
                ++rep.gain_mismatches;
            double peak = 0.0;
            for (const auto &v : patterns[k])
                peak = std::max(peak, std::abs(v));
            for (std::size_t l = 0; l < patterns[k].size(); ++l)
                if (std::abs(rec.pattern[l] - patterns[k][l]) > rel * std::max(peak, 1e-300))
                {
                    ++rep.pattern_mismatches;
                    break;
                }
        }
        return rep;
    }
}
