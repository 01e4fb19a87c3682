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
#include <cstddef>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "field.hpp"

namespace airybt
{
    // Focus distance of a pure steering beam.
    inline constexpr double infinite_distance = std::numeric_limits<double>::infinity();

    // Steering angle theta (rad), focus distance r (m, may be infinite) and
    // curvature coefficient c (1/m).
    struct beam_params
    {
        double theta = 0.0;
        double r = infinite_distance;
        double c = 0.0;
    };

    // Element phase of a curved (Airy) beam. r = inf drops the focusing term,
    // c = 0 drops the cubic term.
    inline double airy_phase(int n, const beam_params &p, double wavenumber, double spacing)
    {
        if (!(p.r > 0.0))
            throw parameter_error("focus distance must be positive or infinite");
        const double y = n * spacing;
        double phase = -wavenumber * y * std::sin(p.theta);
        if (std::isfinite(p.r))
        {
            const double ct = std::cos(p.theta);
            phase += wavenumber * ct * ct / (2.0 * p.r) * y * y;
        }
        if (p.c != 0.0)
        {
            const double a = 2.0 * std::numbers::pi * p.c;
            phase -= a * a * a * y * y * y / 3.0;
        }
        return phase;
    }

    struct codeword
    {
        aperture_field field;
        beam_params params;
    };

    inline codeword make_codeword(const beam_params &params, int n_antennas, double wavenumber, double spacing)
    {
        if (n_antennas < 1 || n_antennas % 2 == 0)
            throw parameter_error("antenna count must be a positive odd integer");
        const double amp = 1.0 / std::sqrt(static_cast<double>(n_antennas));
        std::vector<cplx> v;
        v.reserve(static_cast<std::size_t>(n_antennas));
        for (int n = (1 - n_antennas) / 2; n <= (n_antennas - 1) / 2; ++n)
            v.push_back(std::polar(amp, airy_phase(n, params, wavenumber, spacing)));
        return {aperture_field(std::move(v)), params};
    }

    // Sampling of the (angle, distance, curvature) parameter space. A size of
    // one pins the set to a single value: sin(theta_min), r_min and c = 0.
    struct codebook_spec
    {
        std::size_t l1 = 255, l2 = 10, l3 = 51;
        double theta_min = -std::numbers::pi / 2, theta_max = std::numbers::pi / 2;
        double r_min = 0.5, r_max = 5.0;
        double c_max = 5.0;

        std::size_t size() const { return l1 * l2 * l3; }
    };

    inline nlohmann::json to_json(const codebook_spec &s)
    {
        return {{"l1", s.l1}, {"l2", s.l2}, {"l3", s.l3}, {"theta_min", s.theta_min}, {"theta_max", s.theta_max},
                {"r_min", s.r_min}, {"r_max", s.r_max}, {"c_max", s.c_max}};
    }

    inline codebook_spec codebook_spec_from_json(const nlohmann::json &j)
    {
        try
        {
            codebook_spec s;
            s.l1 = j.at("l1").get<std::size_t>();
            s.l2 = j.at("l2").get<std::size_t>();
            s.l3 = j.at("l3").get<std::size_t>();
            s.theta_min = j.value("theta_min", s.theta_min);
            s.theta_max = j.value("theta_max", s.theta_max);
            s.r_min = j.value("r_min", s.r_min);
            s.r_max = j.value("r_max", s.r_max);
            s.c_max = j.value("c_max", s.c_max);
            return s;
        }
        catch (const nlohmann::json::exception &e)
        {
            throw config_error(std::string("malformed codebook spec: ") + e.what());
        }
    }

    inline codebook_spec load_codebook_spec(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw config_error("cannot open codebook spec " + path);
        try
        {
            nlohmann::json j;
            in >> j;
            return codebook_spec_from_json(j);
        }
        catch (const nlohmann::json::exception &e)
        {
            throw config_error(std::string("codebook spec is not JSON: ") + e.what());
        }
    }

    // Zero-based sample indices into (Theta, R, C).
    struct index3
    {
        std::size_t l1 = 0, l2 = 0, l3 = 0;
        bool operator==(const index3 &) const = default;
    };

    // Uniformly sampled beam codebook. Codewords are generated on demand unless
    // materialize() is called. Flat order is l1 outer, l2 middle, l3 inner.
    class codebook
    {
    public:
        codebook(const codebook_spec &spec, int n_antennas, double wavenumber, double spacing)
            : spec_(spec), n_(n_antennas), k_(wavenumber), delta_(spacing)
        {
            if (spec.l1 == 0 || spec.l2 == 0 || spec.l3 == 0)
                throw parameter_error("codebook dimensions must be positive");
            if (n_antennas < 1 || n_antennas % 2 == 0)
                throw parameter_error("antenna count must be a positive odd integer");
            const double s_min = std::sin(spec.theta_min), s_max = std::sin(spec.theta_max);
            if (spec.theta_min < -std::numbers::pi / 2 - 1e-12 || spec.theta_max > std::numbers::pi / 2 + 1e-12 || s_max < s_min)
                throw parameter_error("angle range must be ordered within [-pi/2, pi/2]");
            if (!(spec.r_min > 0.0) || spec.r_max < spec.r_min)
                throw parameter_error("distance range must be positive and ordered");
            if (spec.c_max < 0.0)
                throw parameter_error("curvature bound must be non-negative");

            for (std::size_t l = 0; l < spec.l1; ++l)
            {
                const double s = spec.l1 == 1 ? s_min : s_min + static_cast<double>(l) * (s_max - s_min) / static_cast<double>(spec.l1 - 1);
                thetas_.push_back(std::asin(std::clamp(s, -1.0, 1.0)));
            }
            for (std::size_t l = 0; l < spec.l2; ++l)
                distances_.push_back(spec.l2 == 1 ? spec.r_min
                                                  : spec.r_min + static_cast<double>(l) * (spec.r_max - spec.r_min) / static_cast<double>(spec.l2 - 1));
            for (std::size_t l = 0; l < spec.l3; ++l)
            {
                if (spec.l3 == 1)
                    curvatures_.push_back(0.0);
                else
                {
                    // Written so the midpoint of an odd grid is exactly zero.
                    const double num = 2.0 * static_cast<double>(l) - static_cast<double>(spec.l3 - 1);
                    curvatures_.push_back(spec.c_max * num / static_cast<double>(spec.l3 - 1));
                }
            }
        }

        const codebook_spec &spec() const { return spec_; }
        int n_antennas() const { return n_; }
        std::size_t size() const { return thetas_.size() * distances_.size() * curvatures_.size(); }
        std::size_t dims(int task) const
        {
            return task == 0 ? thetas_.size() : task == 1 ? distances_.size() : curvatures_.size();
        }
        const std::vector<double> &thetas() const { return thetas_; }
        const std::vector<double> &distances() const { return distances_; }
        const std::vector<double> &curvatures() const { return curvatures_; }

        std::size_t flat(index3 i) const
        {
            if (i.l1 >= thetas_.size() || i.l2 >= distances_.size() || i.l3 >= curvatures_.size())
                throw parameter_error("codebook index out of range");
            return (i.l1 * distances_.size() + i.l2) * curvatures_.size() + i.l3;
        }
        index3 unflat(std::size_t f) const
        {
            if (f >= size())
                throw parameter_error("flat codebook index out of range");
            const std::size_t l3 = f % curvatures_.size();
            const std::size_t rest = f / curvatures_.size();
            return {rest / distances_.size(), rest % distances_.size(), l3};
        }

        beam_params params(index3 i) const { return {thetas_.at(i.l1), distances_.at(i.l2), curvatures_.at(i.l3)}; }
        beam_params params(std::size_t f) const { return params(unflat(f)); }

        codeword at(std::size_t f) const
        {
            if (!materialized_.empty())
                return materialized_.at(f);
            return make_codeword(params(f), n_, k_, delta_);
        }

        void materialize()
        {
            if (!materialized_.empty())
                return;
            materialized_.reserve(size());
            for (std::size_t f = 0; f < size(); ++f)
                materialized_.push_back(make_codeword(params(f), n_, k_, delta_));
        }
        bool is_materialized() const { return !materialized_.empty(); }

        // Index of c = 0 in the curvature set, if present.
        std::optional<std::size_t> zero_curvature_index() const
        {
            for (std::size_t l = 0; l < curvatures_.size(); ++l)
                if (curvatures_[l] == 0.0)
                    return l;
            return std::nullopt;
        }

        // Same angles and distances with C = {0}.
        codebook focusing() const
        {
            auto s = spec_;
            s.l3 = 1;
            codebook cb(s, n_, k_, delta_);
            cb.distances_ = distances_;
            return cb;
        }

    private:
        codebook_spec spec_;
        int n_;
        double k_, delta_;
        std::vector<double> thetas_, distances_, curvatures_;
        std::vector<codeword> materialized_;

        friend codebook build_dft_codebook(int, double, double, std::size_t);
    };

    inline codebook build_codebook(const codebook_spec &spec, int n_antennas, double wavenumber, double spacing)
    {
        return codebook(spec, n_antennas, wavenumber, spacing);
    }

    inline codebook build_codebook(const codebook_spec &spec, const scenario_config &config)
    {
        return codebook(spec, config.n_antennas, config.wavenumber(), config.spacing());
    }

    // Steering codewords on the uniform sin(theta) grid over [-1, 1]; the same
    // angle grid as an Airy codebook with the same L1. Size defaults to N.
    inline codebook build_dft_codebook(int n_antennas, double wavenumber, double spacing, std::size_t size = 0)
    {
        codebook_spec s;
        s.l1 = size == 0 ? static_cast<std::size_t>(std::max(n_antennas, 1)) : size;
        s.l2 = 1;
        s.l3 = 1;
        codebook cb(s, n_antennas, wavenumber, spacing);
        cb.distances_ = {infinite_distance};
        return cb;
    }

    inline codebook build_dft_codebook(const scenario_config &config, std::size_t size = 0)
    {
        return build_dft_codebook(config.n_antennas, config.wavenumber(), config.spacing(), size);
    }
}
