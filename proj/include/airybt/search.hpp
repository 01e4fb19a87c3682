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
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "codebook.hpp"
#include "error.hpp"
#include "field.hpp"
#include "network.hpp"
#include "parallel.hpp"
#include "scenario.hpp"

namespace airybt
{
    // Propagates the listed codewords and hands their probe values to
    // fn(position, values) in list order. Work is split into chunks evaluated
    // in parallel; the callback always runs on the calling thread.
    template <class Fn>
    void for_each_field(const propagator &prop, const codebook &cb, std::span<const std::size_t> flat, const probe_plan &plan, unsigned jobs,
                        Fn &&fn)
    {
        jobs = std::max(1u, jobs);
        const std::size_t chunk = std::max<std::size_t>(jobs * 4, 16);
        std::vector<std::vector<cplx>> values(chunk);
        for (std::size_t start = 0; start < flat.size(); start += chunk)
        {
            const std::size_t n = std::min(chunk, flat.size() - start);
            parallel_for(n, jobs, [&](std::size_t i) { values[i] = prop.probe(cb.at(flat[start + i]).field, plan); });
            for (std::size_t i = 0; i < n; ++i)
                fn(start + i, std::span<const cplx>(values[i]));
        }
    }

    inline std::vector<std::size_t> all_indices(const codebook &cb)
    {
        std::vector<std::size_t> idx(cb.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        return idx;
    }

    inline cell receiver_cell(const grid_spec &grid, point receiver)
    {
        const auto c = grid.col_of(receiver.x);
        const auto r = grid.row_of(receiver.y);
        if (!c || !r)
            throw geometry_error("receiver lies outside the simulation grid");
        return {*c, *r};
    }

    // ---- beam patterns -------------------------------------------------------

    // Received field of every DFT codeword at each receiver: result[receiver][l].
    inline std::vector<std::vector<cplx>> dft_sweep(const propagator &prop, const codebook &dft, std::span<const cell> receivers, unsigned jobs = 1)
    {
        const auto plan = prop.make_plan({receivers.begin(), receivers.end()});
        std::vector<std::vector<cplx>> out(receivers.size(), std::vector<cplx>(dft.size()));
        const auto idx = all_indices(dft);
        for_each_field(prop, dft, idx, plan, jobs, [&](std::size_t l, std::span<const cplx> v) {
            for (std::size_t r = 0; r < receivers.size(); ++r)
                out[r][l] = v[r];
        });
        return out;
    }

    inline std::vector<cplx> dft_sweep(const propagator &prop, const codebook &dft, point receiver, unsigned jobs = 1)
    {
        const cell c = receiver_cell(prop.grid(), receiver);
        return std::move(dft_sweep(prop, dft, std::span<const cell>(&c, 1), jobs).front());
    }

    inline std::vector<double> pattern_magnitude(std::span<const cplx> pattern)
    {
        std::vector<double> m(pattern.size());
        for (std::size_t i = 0; i < m.size(); ++i)
            m[i] = std::abs(pattern[i]);
        return m;
    }

    // ---- gain sources ---------------------------------------------------------

    // Returns |E|^2 at the receiver for each requested flat codebook index.
    using gain_source = std::function<std::vector<double>(const codebook &, std::span<const std::size_t>)>;

    // Simulates on demand with a per-source cache keyed by flat index.
    inline gain_source simulated_gains(const propagator &prop, point receiver, unsigned jobs = 1)
    {
        const cell c = receiver_cell(prop.grid(), receiver);
        auto plan = std::make_shared<probe_plan>(prop.make_plan({c}));
        auto cache = std::make_shared<std::map<std::size_t, double>>();
        return [&prop, plan, cache, jobs](const codebook &cb, std::span<const std::size_t> flat) {
            std::vector<std::size_t> missing;
            for (auto f : flat)
                if (!cache->count(f))
                    missing.push_back(f);
            std::sort(missing.begin(), missing.end());
            missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
            for_each_field(prop, cb, missing, *plan, jobs, [&](std::size_t i, std::span<const cplx> v) { (*cache)[missing[i]] = beam_gain(v[0]); });
            std::vector<double> out;
            out.reserve(flat.size());
            for (auto f : flat)
                out.push_back(cache->at(f));
            return out;
        };
    }

    // Probe values for a unit excitation of each element, as [probe][element].
    inline std::vector<std::vector<cplx>> element_responses(const propagator &prop, const probe_plan &plan, std::size_t probes, unsigned jobs = 1)
    {
        const auto n = static_cast<std::size_t>(prop.config().n_antennas);
        std::vector<std::vector<cplx>> cols(n);
        parallel_for(n, jobs, [&](std::size_t e) {
            std::vector<cplx> v(n);
            v[e] = 1.0;
            cols[e] = prop.probe(aperture_field(std::move(v)), plan);
        });
        std::vector<std::vector<cplx>> out(probes, std::vector<cplx>(n));
        for (std::size_t e = 0; e < n; ++e)
            for (std::size_t p = 0; p < probes; ++p)
                out[p][e] = cols[e][p];
        return out;
    }

    // Gains by superposing element responses. Propagation is linear in the
    // aperture excitation, so N propagations serve the whole codebook; values
    // agree with simulated_gains up to rounding.
    inline gain_source response_gains(const propagator &prop, point receiver, unsigned jobs = 1)
    {
        const cell c = receiver_cell(prop.grid(), receiver);
        const auto h = std::make_shared<std::vector<cplx>>(element_responses(prop, prop.make_plan({c}), 1, jobs)[0]);
        return [h](const codebook &cb, std::span<const std::size_t> flat) {
            if (static_cast<std::size_t>(cb.n_antennas()) != h->size())
                throw input_error("codebook antenna count does not match the propagator");
            std::vector<double> out;
            out.reserve(flat.size());
            for (auto f : flat)
            {
                const auto cw = cb.at(f);
                cplx s = 0.0;
                for (std::size_t e = 0; e < h->size(); ++e)
                    s += (*h)[e] * cw.field.values[e];
                out.push_back(beam_gain(s));
            }
            return out;
        };
    }

    // Looks gains up in a precomputed table indexed by flat codebook index.
    inline gain_source tabulated_gains(std::vector<double> table)
    {
        auto t = std::make_shared<std::vector<double>>(std::move(table));
        return [t](const codebook &cb, std::span<const std::size_t> flat) {
            if (t->size() != cb.size())
                throw parameter_error("gain table does not cover the codebook");
            std::vector<double> out;
            out.reserve(flat.size());
            for (auto f : flat)
                out.push_back(t->at(f));
            return out;
        };
    }

    // ---- searches -------------------------------------------------------------

    struct search_result
    {
        std::string method;
        index3 best;
        beam_params params;
        double gain = 0.0;
        std::size_t overhead = 0;
        // (measurements so far, best gain so far), recorded when the best improves.
        std::vector<std::pair<std::size_t, double>> improvements;
    };

    namespace detail
    {
        // Sweeps `flat` in order, continuing the running best of `r`.
        inline void sweep_into(search_result &r, const codebook &cb, std::span<const std::size_t> flat, const gain_source &gains, bool &have_best)
        {
            const auto g = gains(cb, flat);
            for (std::size_t i = 0; i < flat.size(); ++i)
            {
                ++r.overhead;
                // Strict improvement keeps the earliest winner; within one sweep
                // that is the smallest flat index.
                if (!have_best || g[i] > r.gain)
                {
                    have_best = true;
                    r.gain = g[i];
                    r.best = cb.unflat(flat[i]);
                    r.improvements.emplace_back(r.overhead, r.gain);
                }
            }
            r.params = cb.params(r.best);
        }
    }

    // Evaluates the listed codewords in the given order and keeps the argmax.
    inline search_result sweep_subset(const std::string &method, const codebook &cb, std::vector<std::size_t> flat, const gain_source &gains)
    {
        if (flat.empty())
            throw parameter_error("cannot sweep an empty codebook");
        search_result r;
        r.method = method;
        bool have = false;
        detail::sweep_into(r, cb, flat, gains, have);
        return r;
    }

    inline search_result exhaustive_sweep(const codebook &cb, const gain_source &gains, const std::string &method = "airy-bs")
    {
        return sweep_subset(method, cb, all_indices(cb), gains);
    }

    // Flat indices of the c = 0 slice of an Airy codebook, in flat order.
    inline std::vector<std::size_t> focusing_indices(const codebook &cb)
    {
        const auto z = cb.zero_curvature_index();
        if (!z)
            throw parameter_error("curvature set does not contain zero");
        std::vector<std::size_t> idx;
        for (std::size_t a = 0; a < cb.dims(0); ++a)
            for (std::size_t b = 0; b < cb.dims(1); ++b)
                idx.push_back(cb.flat({a, b, *z}));
        return idx;
    }

    // Exhaustive sweep restricted to the focusing (c = 0) codewords.
    inline search_result focusing_sweep(const codebook &cb, const gain_source &gains)
    {
        return sweep_subset("focus-bs", cb, focusing_indices(cb), gains);
    }

    // Stage 1 sweeps the focusing slice for the best angle and distance; stage 2
    // sweeps every curvature at that pair. The result is the stage 2 winner.
    inline search_result hierarchical_search(const codebook &cb, const gain_source &gains)
    {
        auto stage1 = focusing_sweep(cb, gains);
        search_result r;
        r.method = "airy-hier";
        r.overhead = stage1.overhead;
        r.improvements = stage1.improvements;
        std::vector<std::size_t> stage2;
        for (std::size_t c = 0; c < cb.dims(2); ++c)
            stage2.push_back(cb.flat({stage1.best.l1, stage1.best.l2, c}));
        const auto g = gains(cb, stage2);
        bool have = false;
        double overall = stage1.gain;
        for (std::size_t i = 0; i < stage2.size(); ++i)
        {
            ++r.overhead;
            if (!have || g[i] > r.gain)
            {
                have = true;
                r.gain = g[i];
                r.best = cb.unflat(stage2[i]);
            }
            if (g[i] > overall)
            {
                overall = g[i];
                r.improvements.emplace_back(r.overhead, overall);
            }
        }
        r.params = cb.params(r.best);
        return r;
    }

    // Cartesian product of the top-k indices of each task, as flat codebook
    // indices in ascending order. A codebook with a single curvature accepts two
    // probability vectors.
    inline std::vector<std::size_t> candidate_codebook(const std::vector<std::vector<double>> &probs, const std::vector<std::size_t> &k,
                                                       const codebook &cb)
    {
        const std::size_t tasks = probs.size();
        if ((tasks != 3 && !(tasks == 2 && cb.dims(2) == 1)) || k.size() != tasks)
            throw input_error("expected one probability vector and one k per codebook dimension");
        std::vector<std::vector<std::size_t>> top(3, std::vector<std::size_t>{0});
        for (std::size_t t = 0; t < tasks; ++t)
        {
            if (probs[t].size() != cb.dims(static_cast<int>(t)))
                throw input_error("probability vector length does not match the codebook");
            if (k[t] == 0)
                throw parameter_error("candidate count must be positive");
            top[t] = topk(probs[t], k[t]);
        }
        std::vector<std::size_t> flat;
        for (auto a : top[0])
            for (auto b : top[1])
                for (auto c : top[2])
                    flat.push_back(cb.flat({a, b, c}));
        std::sort(flat.begin(), flat.end());
        return flat;
    }

    inline void check_network_matches(const network_weights &w, const codebook &cb, std::size_t pattern_length)
    {
        const auto &d = w.descriptor();
        if (d.input_length != pattern_length)
            throw weights_error("network input length does not match the beam pattern length");
        const bool focus = cb.dims(2) == 1 && d.tasks() == 2;
        if (d.tasks() != 3 && !focus)
            throw weights_error("network task count does not match the codebook");
        for (std::size_t t = 0; t < d.tasks(); ++t)
            if (d.class_counts[t] != cb.dims(static_cast<int>(t)))
                throw weights_error("network class counts do not match the codebook dimensions");
    }

    // Candidate sweep driven by predicted probabilities. Overhead counts the
    // DFT sweep that produced the pattern plus every candidate.
    inline search_result dl_search_from_probabilities(const std::vector<std::vector<double>> &probs, const std::vector<std::size_t> &k,
                                                      const codebook &cb, const gain_source &gains, std::size_t pattern_length,
                                                      const std::string &method = "airy-dl")
    {
        const auto flat = candidate_codebook(probs, k, cb);
        search_result r;
        r.method = method;
        r.overhead = pattern_length;
        bool have = false;
        detail::sweep_into(r, cb, flat, gains, have);
        return r;
    }

    inline search_result dl_beam_training(std::span<const cplx> pattern, const network_weights &w, const codebook &cb, const gain_source &gains,
                                          std::vector<std::size_t> k = {3, 3, 5}, const std::string &method = "airy-dl")
    {
        check_network_matches(w, cb, pattern.size());
        k.resize(w.descriptor().tasks());
        const auto probs = forward(pattern, w).probs;
        return dl_search_from_probabilities(probs, k, cb, gains, pattern.size(), method);
    }

    // Overhead of each strategy on a codebook of the given dimensions.
    inline std::size_t expected_overhead(const std::string &method, std::size_t l1, std::size_t l2, std::size_t l3,
                                         const std::vector<std::size_t> &k = {3, 3, 5})
    {
        if (method == "airy-bs")
            return l1 * l2 * l3;
        if (method == "focus-bs")
            return l1 * l2;
        if (method == "airy-hier")
            return l1 * l2 + l3;
        if (method == "airy-dl" || method == "focus-dl")
        {
            std::size_t prod = 1;
            for (std::size_t t = 0; t < (method == "focus-dl" ? 2u : 3u) && t < k.size(); ++t)
                prod *= k[t];
            return l1 + prod;
        }
        throw config_error("unknown search method " + method);
    }

    // ---- CSV -----------------------------------------------------------------

    // Shortest text that reads back to the same double.
    inline std::string format_double(double v)
    {
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        if (std::isnan(v))
            return "nan";
        char buf[40];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return {buf, res.ptr};
    }

    inline void write_results_csv(std::ostream &out, const std::vector<search_result> &results)
    {
        out << "method,l1,l2,l3,theta,r,c,gain,overhead\n";
        for (const auto &r : results)
            out << r.method << ',' << r.best.l1 << ',' << r.best.l2 << ',' << r.best.l3 << ',' << format_double(r.params.theta) << ','
                << format_double(r.params.r) << ',' << format_double(r.params.c) << ',' << format_double(r.gain) << ',' << r.overhead << '\n';
    }

    inline void write_results_csv(const std::string &path, const std::vector<search_result> &results)
    {
        std::ofstream out(path);
        if (!out)
            throw input_error("cannot open " + path + " for writing");
        write_results_csv(out, results);
    }

    // One row per improvement: record index, measurement count, best gain.
    inline void write_trace_csv(std::ostream &out, const std::vector<search_result> &results)
    {
        out << "record,method,n,gain\n";
        for (std::size_t i = 0; i < results.size(); ++i)
            for (const auto &[n, g] : results[i].improvements)
                out << i << ',' << results[i].method << ',' << n << ',' << format_double(g) << '\n';
    }
}
