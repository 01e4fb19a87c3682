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
    using mat = std::vector<std::vector<double>>; // [channel][t]

    const tensor &T(const network_weights &w, const std::string &n) { return w.get(n); }

    mat conv(const mat &in, const tensor &w, const tensor &b)
    {
        const std::size_t co = w.dims[0], ci = w.dims[1], k = w.dims[2], len = in[0].size();
        mat out(co, std::vector<double>(len));
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t t = 0; t < len; ++t)
            {
                double s = b.data[o];
                for (std::size_t i = 0; i < ci; ++i)
                    for (std::size_t q = 0; q < k; ++q)
                    {
                        const long src = static_cast<long>(t + q) - static_cast<long>(k / 2);
                        if (src >= 0 && src < static_cast<long>(len))
                            s += w.data[(o * ci + i) * k + q] * in[i][static_cast<std::size_t>(src)];
                    }
                out[o][t] = s;
            }
        return out;
    }

    void bn(mat &m, const network_weights &w, const std::string &p, double eps)
    {
        for (std::size_t c = 0; c < m.size(); ++c)
            for (auto &v : m[c])
                v = (v - T(w, p + ".mean").data[c]) / std::sqrt(T(w, p + ".var").data[c] + eps) * T(w, p + ".gamma").data[c] + T(w, p + ".beta").data[c];
    }

    mat pool(const mat &m)
    {
        mat out(m.size(), std::vector<double>(m[0].size() / 2));
        for (std::size_t c = 0; c < m.size(); ++c)
            for (std::size_t t = 0; t < out[c].size(); ++t)
                out[c][t] = std::max(m[c][2 * t], m[c][2 * t + 1]);
        return out;
    }

    // Straightforward evaluation of the architecture, written independently
    // of the library's forward pass.
    std::vector<std::vector<double>> reference_logits(const std::vector<cplx> &x, const network_weights &w)
    {
        const auto &d = w.descriptor();
        mat f;
        if (d.input_channels == 1)
        {
            f.emplace_back();
            for (const auto &v : x)
                f[0].push_back(std::abs(v));
        }
        else
        {
            f.assign(2, std::vector<double>(x.size()));
            for (std::size_t t = 0; t < x.size(); ++t)
            {
                f[0][t] = x[t].real();
                f[1][t] = x[t].imag();
            }
        }
        std::vector<mat> shared;
        for (std::size_t j = 0; j < d.stages(); ++j)
        {
            const auto p = "backbone." + std::to_string(j);
            auto g = conv(f, T(w, p + ".conv.weight"), T(w, p + ".conv.bias"));
            bn(g, w, p + ".bn", d.bn_epsilon);
            for (auto &row : g)
                for (auto &v : row)
                    v = std::max(v, 0.0);
            f = pool(g);
            shared.push_back(f);
        }
        std::vector<std::vector<double>> logits;
        for (std::size_t i = 0; i < d.tasks(); ++i)
        {
            mat feat = shared.back();
            if (d.attention)
            {
                mat prev;
                for (std::size_t j = 0; j < d.stages(); ++j)
                {
                    const auto p = "tasks." + std::to_string(i) + ".attn." + std::to_string(j);
                    mat in = shared[j];
                    if (j > 0)
                        for (auto &row : pool(prev))
                            in.push_back(row);
                    auto m = conv(in, T(w, p + ".conv1.weight"), T(w, p + ".conv1.bias"));
                    bn(m, w, p + ".bn1", d.bn_epsilon);
                    for (auto &row : m)
                        for (auto &v : row)
                            v = std::max(v, 0.0);
                    m = conv(m, T(w, p + ".conv2.weight"), T(w, p + ".conv2.bias"));
                    bn(m, w, p + ".bn2", d.bn_epsilon);
                    prev = shared[j];
                    for (std::size_t c = 0; c < m.size(); ++c)
                        for (std::size_t t = 0; t < m[c].size(); ++t)
                            prev[c][t] *= 1.0 / (1.0 + std::exp(-m[c][t]));
                }
                feat = prev;
            }
            const auto &fw = T(w, "heads." + std::to_string(i) + ".fc.weight");
            const auto &fb = T(w, "heads." + std::to_string(i) + ".fc.bias");
            std::vector<double> out(fw.dims[0]);
            for (std::size_t o = 0; o < out.size(); ++o)
            {
                double s = fb.data[o];
                std::size_t q = 0;
                for (const auto &row : feat)
                    for (double v : row)
                        s += fw.data[o * fw.dims[1] + q++] * v;
                out[o] = s;
            }
            logits.push_back(out);
        }
        return logits;
    }

    network_descriptor small_descriptor()
    {
        network_descriptor d;
        d.input_length = 33;
        d.backbone_channels = {8, 16, 12};
        d.class_counts = {33, 4, 7};
        return d;
    }

    std::vector<cplx> random_pattern(std::mt19937_64 &rng, std::size_t n)
    {
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<cplx> x(n);
        for (auto &v : x)
            v = {g(rng), g(rng)};
        return x;
    }

    std::string bytes_of(const network_weights &w) { return serialize_weights(w); }
}

TEST(Network, ReferenceParameterAccounting)
{
    network_descriptor d;
    EXPECT_EQ(backbone_parameter_count(d), 124608u);
    EXPECT_EQ(3 * backbone_parameter_count(d), 373824u);
    EXPECT_EQ(attention_parameter_count(d), 54928u);
    EXPECT_EQ(d.stage_length(0), 127u);
    EXPECT_EQ(d.stage_length(1), 63u);
    EXPECT_EQ(d.stage_length(2), 31u);
    EXPECT_EQ(d.head_features(), 256u * 31u);
    EXPECT_NEAR(static_cast<double>(backbone_macs(d)) / 1e9, 0.0094, 5e-5);
}

TEST(Network, ConstantNetworkReturnsSoftmaxOfBias)
{
    network_descriptor d;
    std::vector<std::vector<float>> bias;
    std::mt19937_64 rng(3);
    std::normal_distribution<float> g(0.0f, 2.0f);
    for (auto n : d.class_counts)
    {
        std::vector<float> b(n);
        for (auto &v : b)
            v = g(rng);
        bias.push_back(b);
    }
    const auto w = constant_network(d, bias);
    for (int t = 0; t < 3; ++t)
    {
        const auto out = forward(random_pattern(rng, 255), w);
        for (std::size_t i = 0; i < 3; ++i)
        {
            double m = -1e300, s = 0.0;
            for (float v : bias[i])
                m = std::max<double>(m, v);
            for (float v : bias[i])
                s += std::exp(v - m);
            for (std::size_t c = 0; c < bias[i].size(); ++c)
                EXPECT_NEAR(out.probs[i][c], std::exp(bias[i][c] - m) / s, 1e-12);
        }
    }
}

TEST(Network, EqualLogitsGiveUniform)
{
    const auto d = small_descriptor();
    const auto w = constant_network(d, {});
    std::mt19937_64 rng(4);
    const auto out = forward(random_pattern(rng, d.input_length), w);
    for (std::size_t i = 0; i < 3; ++i)
        for (double p : out.probs[i])
            EXPECT_NEAR(p, 1.0 / static_cast<double>(d.class_counts[i]), 1e-15);
}

TEST(Network, ForwardMatchesReference)
{
    const auto d = small_descriptor();
    const auto w = random_network(d, 99, 0.3f);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t)
    {
        const auto x = random_pattern(rng, d.input_length);
        const auto got = forward(x, w);
        const auto ref = reference_logits(x, w);
        for (std::size_t i = 0; i < ref.size(); ++i)
            for (std::size_t c = 0; c < ref[i].size(); ++c)
                EXPECT_NEAR(got.logits[i][c], ref[i][c], 1e-9);
    }
}

TEST(Network, MagnitudeInputMatchesReference)
{
    auto d = small_descriptor();
    d.input_channels = 1;
    const auto w = random_network(d, 98, 0.3f);
    std::mt19937_64 rng(15);
    auto x = random_pattern(rng, d.input_length);
    const auto got = forward(x, w);
    const auto ref = reference_logits(x, w);
    for (std::size_t i = 0; i < ref.size(); ++i)
        for (std::size_t c = 0; c < ref[i].size(); ++c)
            EXPECT_NEAR(got.logits[i][c], ref[i][c], 1e-9);
    // Only the magnitude reaches the network.
    for (auto &v : x)
        v = std::polar(std::abs(v), 1.234);
    const auto rotated = forward(x, w);
    for (std::size_t i = 0; i < ref.size(); ++i)
        for (std::size_t c = 0; c < ref[i].size(); ++c)
            EXPECT_NEAR(rotated.logits[i][c], got.logits[i][c], 1e-12);
    d.input_channels = 3;
    EXPECT_THROW(d.validate(), shape_error);
}

TEST(Network, ReferenceDimsForwardMatchesReference)
{
    const network_descriptor d;
    const auto w = random_network(d, 7, 0.05f);
    std::mt19937_64 rng(6);
    const auto x = random_pattern(rng, 255);
    const auto got = forward(x, w);
    const auto ref = reference_logits(x, w);
    for (std::size_t i = 0; i < ref.size(); ++i)
        for (std::size_t c = 0; c < ref[i].size(); ++c)
            EXPECT_NEAR(got.logits[i][c], ref[i][c], 1e-4);
}

TEST(Network, SoftmaxAndMaskInvariants)
{
    const auto d = small_descriptor();
    const auto w = random_network(d, 1, 0.1f);
    std::mt19937_64 rng(8);
    for (int t = 0; t < 10; ++t)
    {
        forward_trace tr;
        const auto out = forward(random_pattern(rng, d.input_length), w, &tr);
        for (const auto &p : out.probs)
        {
            double s = 0.0;
            for (double v : p)
            {
                EXPECT_GE(v, 0.0);
                s += v;
            }
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
        for (std::size_t i = 0; i < d.tasks(); ++i)
            for (std::size_t j = 0; j < d.stages(); ++j)
            {
                ASSERT_EQ(tr.masks[i][j].size(), tr.shared[j].size());
                for (std::size_t q = 0; q < tr.masks[i][j].size(); ++q)
                {
                    EXPECT_GT(tr.masks[i][j][q], 0.0);
                    EXPECT_LT(tr.masks[i][j][q], 1.0);
                    EXPECT_LE(std::abs(tr.attended[i][j][q]), std::abs(tr.shared[j][q]));
                }
            }
    }
}

TEST(Network, ArgmaxInvariantUnderLogitShift)
{
    const auto d = small_descriptor();
    auto w = random_network(d, 12, 0.3f);
    std::mt19937_64 rng(13);
    const auto x = random_pattern(rng, d.input_length);
    const auto a = forward(x, w);
    auto ts = w.tensors();
    for (auto &t : ts)
        if (t.name == "heads.1.fc.bias")
            for (auto &v : t.data)
                v += 3.5f;
    const network_weights shifted(d, ts);
    const auto b = forward(x, shifted);
    EXPECT_EQ(topk(a.probs[1], 1), topk(b.probs[1], 1));
}

TEST(Network, Deterministic)
{
    const auto d = small_descriptor();
    const auto w = random_network(d, 2);
    std::mt19937_64 rng(14);
    const auto x = random_pattern(rng, d.input_length);
    EXPECT_EQ(forward(x, w).logits, forward(x, w).logits);
}

TEST(Network, LengthMismatch)
{
    const auto d = small_descriptor();
    const auto w = random_network(d, 2);
    EXPECT_THROW(forward(std::vector<cplx>(d.input_length + 1), w), input_error);
}

TEST(TopK, Examples)
{
    EXPECT_EQ(topk(std::vector<double>{0.5, 0.3, 0.2}, 2), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(topk(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 3), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(topk(std::vector<double>{0.0, 0.0, 1.0, 0.0}, 1), (std::vector<std::size_t>{2}));
    EXPECT_EQ(topk(std::vector<double>{0.1, 0.4, 0.4, 0.1}, 4), (std::vector<std::size_t>{1, 2, 0, 3}));
    EXPECT_THROW(topk(std::vector<double>{0.5, 0.5}, 3), parameter_error);
    EXPECT_THROW(topk(std::vector<double>{0.5, std::nan("")}, 1), input_error);
}

TEST(Weights, RoundTripByteExact)
{
    const network_descriptor d;
    const auto w = random_network(d, 21);
    const auto a = bytes_of(w);
    const auto back = parse_weights(std::span<const char>(a.data(), a.size()));
    EXPECT_EQ(bytes_of(back), a);
    const std::string path = ::testing::TempDir() + "w.ampw";
    save_weights(path, back);
    EXPECT_EQ(bytes_of(load_weights(path)), a);
    std::remove(path.c_str());
}

TEST(Weights, SingleTaskVariant)
{
    network_descriptor d;
    d.attention = false;
    d.class_counts = {255};
    const auto w = random_network(d, 22);
    EXPECT_EQ(w.tensors().size(), 3u * 6u + 2u);
    const auto a = bytes_of(w);
    EXPECT_EQ(bytes_of(parse_weights(std::span<const char>(a.data(), a.size()))), a);
    EXPECT_EQ(forward(std::vector<cplx>(255), w).probs.size(), 1u);
}

TEST(Weights, DistinctRejections)
{
    const auto d = small_descriptor();
    const auto good = bytes_of(random_network(d, 23));
    auto parse = [](std::string s) { return parse_weights(std::span<const char>(s.data(), s.size())); };

    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(parse(bad_magic), magic_error);

    auto bad_version = good;
    bad_version[8] = 7;
    EXPECT_THROW(parse(bad_version), version_error);

    EXPECT_THROW(parse(good.substr(0, good.size() - 5)), truncation_error);

    // NaN in the last float of the data section.
    auto nan = good;
    const float q = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan.data() + nan.size() - 4, &q, 4);
    EXPECT_THROW(parse(nan), non_finite_error);

    // Descriptor says 8 output channels; the tensor claims 9 rows.
    auto ts = random_network(d, 23).tensors();
    ts[0].dims[0] = 9;
    ts[0].data.resize(ts[0].numel());
    EXPECT_THROW(network_weights(d, ts), shape_error);

    auto missing = random_network(d, 23).tensors();
    missing.pop_back();
    EXPECT_THROW(network_weights(d, missing), shape_error);

    auto neg = random_network(d, 23).tensors();
    for (auto &t : neg)
        if (t.name == "backbone.0.bn.var")
            t.data[0] = -1.0f;
    EXPECT_THROW(network_weights(d, neg), format_error);
}
