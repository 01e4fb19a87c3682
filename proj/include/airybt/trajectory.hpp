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
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include "codebook.hpp"
#include "error.hpp"

namespace airybt
{
    // One sample of the caustic, parametrised by the source coordinate y0.
    struct caustic_point
    {
        double y0 = 0.0;
        double x = 0.0;
        double y = 0.0;
        double a = 0.0; // normalised phase slope phi'(y0)/k
        double b = 0.0; // normalised phase curvature phi''(y0)/k
        bool valid = false;
    };

    namespace detail
    {
        inline double focus_term(const beam_params &p)
        {
            if (!std::isfinite(p.r))
                return 0.0;
            const double ct = std::cos(p.theta);
            return ct * ct / p.r;
        }
        inline double cubic_term(const beam_params &p, double wavenumber)
        {
            const double a = 2.0 * std::numbers::pi * p.c;
            return a * a * a / wavenumber;
        }
    }

    inline double phase_slope(double y0, const beam_params &p, double wavenumber)
    {
        return -std::sin(p.theta) + detail::focus_term(p) * y0 - detail::cubic_term(p, wavenumber) * y0 * y0;
    }

    inline double phase_curvature(double y0, const beam_params &p, double wavenumber)
    {
        return detail::focus_term(p) - 2.0 * detail::cubic_term(p, wavenumber) * y0;
    }

    inline caustic_point caustic_at(double y0, const beam_params &p, double wavenumber)
    {
        caustic_point cp;
        cp.y0 = y0;
        cp.a = phase_slope(y0, p, wavenumber);
        cp.b = phase_curvature(y0, p, wavenumber);
        const double one_minus = 1.0 - cp.a * cp.a;
        if (cp.b == 0.0 || !(one_minus > 0.0))
        {
            cp.x = cp.y = std::numeric_limits<double>::quiet_NaN();
            return cp;
        }
        cp.x = std::pow(one_minus, 1.5) / cp.b;
        cp.y = y0 - cp.a * one_minus / cp.b;
        cp.valid = cp.x > 0.0 && std::isfinite(cp.x) && std::isfinite(cp.y);
        return cp;
    }

    // Stationary-phase caustic sampled at `samples` uniform source points over
    // [-half_span, half_span]. Valid points come first, sorted by x; invalid
    // points follow in source order.
    inline std::vector<caustic_point> caustic_curve(const beam_params &p, double wavenumber, double half_span, std::size_t samples)
    {
        if (samples == 0)
            throw parameter_error("caustic needs at least one sample");
        if (!(p.r > 0.0))
            throw parameter_error("focus distance must be positive or infinite");
        std::vector<caustic_point> pts;
        pts.reserve(samples);
        for (std::size_t k = 0; k < samples; ++k)
        {
            const double y0 = samples == 1 ? 0.0 : -half_span + 2.0 * half_span * static_cast<double>(k) / static_cast<double>(samples - 1);
            pts.push_back(caustic_at(y0, p, wavenumber));
        }
        std::stable_partition(pts.begin(), pts.end(), [](const caustic_point &c) { return c.valid; });
        const auto end_valid = std::find_if(pts.begin(), pts.end(), [](const caustic_point &c) { return !c.valid; });
        std::stable_sort(pts.begin(), end_valid, [](const caustic_point &l, const caustic_point &r) { return l.x < r.x; });
        return pts;
    }

    struct stationarity_residual
    {
        double first = 0.0;  // |Phi'(y0)| / k
        double second = 0.0; // |Phi''(y0)| / |phi''(y0)|
    };

    // First- and second-order stationarity of the total phase phi(y0) - k r at
    // a caustic point, evaluated by direct substitution.
    inline stationarity_residual stationarity(const caustic_point &cp)
    {
        const double dy = cp.y - cp.y0;
        const double rc = std::hypot(dy, cp.x);
        return {std::abs(cp.a + dy / rc), std::abs(cp.b - cp.x * cp.x / (rc * rc * rc)) / std::abs(cp.b)};
    }

    // Closed-form paraxial trajectory y(x).
    inline double paraxial_trajectory(double x, const beam_params &p, double wavenumber)
    {
        if (!(x > 0.0))
            throw parameter_error("paraxial trajectory needs x > 0");
        if (p.c == 0.0)
            throw parameter_error("paraxial trajectory needs nonzero curvature");
        const double g = detail::focus_term(p);
        const double k4 = wavenumber / (32.0 * std::pow(std::numbers::pi, 3) * p.c * p.c * p.c);
        return x * std::sin(p.theta) - k4 * g * g * x - k4 / x + 2.0 * k4 * g;
    }

    // Slope dy/dx of the paraxial trajectory.
    inline double trajectory_slope(double x, const beam_params &p, double wavenumber)
    {
        if (!(x > 0.0) || p.c == 0.0)
            throw parameter_error("trajectory slope needs x > 0 and nonzero curvature");
        const double g = detail::focus_term(p);
        const double k4 = wavenumber / (32.0 * std::pow(std::numbers::pi, 3) * p.c * p.c * p.c);
        return std::sin(p.theta) - k4 * g * g + k4 / (x * x);
    }

    // Source coordinate whose paraxial ray touches the trajectory at x.
    inline double paraxial_source(double x, const beam_params &p, double wavenumber)
    {
        return (detail::focus_term(p) - 1.0 / x) / (2.0 * detail::cubic_term(p, wavenumber));
    }

    // Furthest distance the curved trajectory is sustained by an aperture of
    // length `aperture`: the tangency points of the rays from both array edges.
    inline double max_range(const beam_params &p, double wavenumber, double aperture)
    {
        const double ct = std::cos(p.theta);
        const double base = wavenumber * ct * ct;
        const double edge = 8.0 * std::pow(std::numbers::pi, 3) * p.c * p.c * p.c * p.r * aperture;
        auto branch = [&](double denom) { return denom <= 0.0 ? std::numeric_limits<double>::infinity() : wavenumber * p.r / denom; };
        return std::max(branch(base + edge), branch(base - edge));
    }

    inline void write_caustic_csv(std::ostream &out, const std::vector<caustic_point> &pts)
    {
        out << "y0,x_c,y_c,valid\n";
        out.precision(17);
        for (const auto &c : pts)
            out << c.y0 << ',' << c.x << ',' << c.y << ',' << (c.valid ? 1 : 0) << '\n';
    }
}
