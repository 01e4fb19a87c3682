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
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "search.hpp"

namespace airybt
{
    // Gains of one method, aligned with the dataset records.
    struct method_gains
    {
        std::string method;
        std::vector<double> gains;
    };

    struct metric_bin
    {
        double lo = 0.0, hi = 0.0; // bin is (lo, hi], labelled by hi
        std::string method;
        std::size_t count = 0;
        double mean = 0.0;
    };

    // Bin k covers (k w, (k + 1) w]; a value sitting on the lowest edge of the
    // domain joins the first bin.
    inline long bin_index(double v, double width) { return static_cast<long>(std::ceil(v / width - 1e-9)) - 1; }

    inline std::vector<metric_bin> bin_gains(const std::vector<double> &values, const std::vector<method_gains> &methods, double width, long k_min,
                                             long k_max)
    {
        if (!(width > 0.0))
            throw parameter_error("bin width must be positive");
        for (const auto &m : methods)
            if (m.gains.size() != values.size())
                throw config_error("results for " + m.method + " do not cover every record");
        std::vector<metric_bin> out;
        for (long k = k_min; k <= k_max; ++k)
            for (const auto &m : methods)
                out.push_back({static_cast<double>(k) * width, static_cast<double>(k + 1) * width, m.method, 0, 0.0});
        const std::size_t stride = methods.size();
        for (std::size_t i = 0; i < values.size(); ++i)
        {
            const long k = std::clamp(bin_index(values[i], width), k_min, k_max);
            for (std::size_t j = 0; j < stride; ++j)
            {
                auto &b = out[static_cast<std::size_t>(k - k_min) * stride + j];
                ++b.count;
                b.mean += methods[j].gains[i];
            }
        }
        for (auto &b : out)
            if (b.count)
                b.mean /= static_cast<double>(b.count);
        return out;
    }

    // Fixed domain [0, 1] for blockage ratios.
    inline std::vector<metric_bin> blockage_bins(const std::vector<double> &ratios, const std::vector<method_gains> &methods, double width = 0.05)
    {
        const long k_max = static_cast<long>(std::ceil(1.0 / width - 1e-9)) - 1;
        return bin_gains(ratios, methods, width, 0, k_max);
    }

    // Domain spans the observed values.
    inline std::vector<metric_bin> coordinate_bins(const std::vector<double> &coords, const std::vector<method_gains> &methods, double width = 0.05)
    {
        if (coords.empty())
            return {};
        const auto [lo, hi] = std::minmax_element(coords.begin(), coords.end());
        return bin_gains(coords, methods, width, bin_index(*lo, width), bin_index(*hi, width));
    }

    inline void write_bins_csv(std::ostream &out, const std::vector<metric_bin> &bins)
    {
        out << "bin,lo,hi,method,count,mean_gain\n";
        for (const auto &b : bins)
            out << format_double(b.hi) << ',' << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.method << ',' << b.count << ','
                << format_double(b.mean) << '\n';
    }

    // Empirical CDF of the raw gains: one row per distinct value with the
    // fraction of samples at or below it.
    inline void write_cdf_csv(std::ostream &out, const std::vector<method_gains> &methods)
    {
        out << "method,gain,cdf\n";
        for (const auto &m : methods)
        {
            auto g = m.gains;
            std::sort(g.begin(), g.end());
            for (std::size_t i = 0; i < g.size(); ++i)
                if (i + 1 == g.size() || g[i + 1] != g[i])
                    out << m.method << ',' << format_double(g[i]) << ',' << format_double(static_cast<double>(i + 1) / static_cast<double>(g.size()))
                        << '\n';
        }
    }

    // Mean gain per method for each labelled group (obstacle height, obstacle
    // centre, ...). Each group carries its own label columns.
    struct group_gains
    {
        std::vector<double> label;
        std::vector<method_gains> methods;
    };

    inline void write_group_csv(std::ostream &out, const std::vector<std::string> &label_names, const std::vector<group_gains> &groups)
    {
        for (const auto &n : label_names)
            out << n << ',';
        out << "method,count,mean_gain\n";
        for (const auto &g : groups)
        {
            if (g.label.size() != label_names.size())
                throw config_error("group label arity does not match the header");
            for (const auto &m : g.methods)
            {
                double s = 0.0;
                for (double v : m.gains)
                    s += v;
                for (double v : g.label)
                    out << format_double(v) << ',';
                out << m.method << ',' << m.gains.size() << ',' << format_double(m.gains.empty() ? 0.0 : s / static_cast<double>(m.gains.size()))
                    << '\n';
            }
        }
    }

    // ---- overhead curve ------------------------------------------------------

    // Improvement traces of one method: per record, (measurements, best gain).
    struct method_trace
    {
        std::string method;
        std::vector<std::vector<std::pair<std::size_t, double>>> records;
    };

    // Mean over records of the best gain among the first n measurements, for
    // n = 1 .. n_max. Before the first measurement the best gain is zero.
    inline std::vector<double> overhead_curve(const method_trace &t, std::size_t n_max)
    {
        std::vector<double> curve(n_max, 0.0);
        for (const auto &rec : t.records)
        {
            double best = 0.0;
            std::size_t next = 0;
            for (std::size_t n = 1; n <= n_max; ++n)
            {
                while (next < rec.size() && rec[next].first <= n)
                    best = std::max(best, rec[next++].second);
                curve[n - 1] += best;
            }
        }
        if (!t.records.empty())
            for (auto &v : curve)
                v /= static_cast<double>(t.records.size());
        return curve;
    }

    inline void write_overhead_csv(std::ostream &out, const std::vector<method_trace> &traces, std::size_t n_max)
    {
        out << "method,n,mean_gain\n";
        for (const auto &t : traces)
        {
            const auto c = overhead_curve(t, n_max);
            for (std::size_t n = 1; n <= n_max; ++n)
                out << t.method << ',' << n << ',' << format_double(c[n - 1]) << '\n';
        }
    }

    // ---- reading CSV artefacts ------------------------------------------------

    namespace detail
    {
        inline std::vector<std::string> split_csv(const std::string &line)
        {
            std::vector<std::string> f;
            std::stringstream ss(line);
            std::string item;
            while (std::getline(ss, item, ','))
                f.push_back(item);
            if (!line.empty() && line.back() == ',')
                f.emplace_back();
            return f;
        }

        inline double parse_double(const std::string &s)
        {
            try
            {
                std::size_t pos = 0;
                const double v = std::stod(s, &pos);
                if (pos != s.size())
                    throw input_error("bad number " + s);
                return v;
            }
            catch (const std::logic_error &)
            {
                throw input_error("bad number " + s);
            }
        }
    }

    // Results CSV rows grouped by method, in file order.
    inline std::vector<method_gains> read_results_csv(std::istream &in)
    {
        std::string line;
        if (!std::getline(in, line) || line != "method,l1,l2,l3,theta,r,c,gain,overhead")
            throw input_error("results file lacks the expected header");
        std::vector<method_gains> out;
        while (std::getline(in, line))
        {
            if (line.empty())
                continue;
            const auto f = detail::split_csv(line);
            if (f.size() != 9)
                throw input_error("results row has the wrong number of fields");
            auto it = std::find_if(out.begin(), out.end(), [&](const method_gains &m) { return m.method == f[0]; });
            if (it == out.end())
            {
                out.push_back({f[0], {}});
                it = out.end() - 1;
            }
            it->gains.push_back(detail::parse_double(f[7]));
        }
        return out;
    }

    inline std::vector<method_gains> read_results_csv(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw input_error("cannot open " + path);
        return read_results_csv(in);
    }

    inline std::vector<method_trace> read_trace_csv(std::istream &in, std::size_t records)
    {
        std::string line;
        if (!std::getline(in, line) || line != "record,method,n,gain")
            throw input_error("trace file lacks the expected header");
        std::vector<method_trace> out;
        while (std::getline(in, line))
        {
            if (line.empty())
                continue;
            const auto f = detail::split_csv(line);
            if (f.size() != 4)
                throw input_error("trace row has the wrong number of fields");
            const auto rec = static_cast<std::size_t>(detail::parse_double(f[0]));
            if (rec >= records)
                throw input_error("trace refers to a record beyond the dataset");
            auto it = std::find_if(out.begin(), out.end(), [&](const method_trace &m) { return m.method == f[1]; });
            if (it == out.end())
            {
                out.push_back({f[1], std::vector<std::vector<std::pair<std::size_t, double>>>(records)});
                it = out.end() - 1;
            }
            it->records[rec].emplace_back(static_cast<std::size_t>(detail::parse_double(f[2])), detail::parse_double(f[3]));
        }
        return out;
    }

    inline std::vector<method_trace> read_trace_csv(const std::string &path, std::size_t records)
    {
        std::ifstream in(path);
        if (!in)
            throw input_error("cannot open " + path);
        return read_trace_csv(in, records);
    }
}
