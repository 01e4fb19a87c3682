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
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "fft.hpp"

namespace airybt
{
    // Architecture of the multi-task beam training network: a three stage
    // Conv1D/BN/ReLU/MaxPool backbone, optional per-task attention streams,
    // and one fully connected head per task.
    struct network_descriptor
    {
        std::size_t input_length = 255;
        // 2 feeds (Re y, Im y); 1 feeds |y| only.
        std::size_t input_channels = 2;
        std::vector<std::size_t> backbone_channels{64, 128, 256};
        std::size_t kernel = 3;
        std::size_t pool = 2;
        bool attention = true;
        std::size_t attention_ratio = 4; // attention mid channels = out / ratio
        std::vector<std::size_t> class_counts{255, 10, 51};
        double bn_epsilon = 1e-5;

        std::size_t stages() const { return backbone_channels.size(); }
        std::size_t tasks() const { return class_counts.size(); }

        // Feature length after stage j (post pool).
        std::size_t stage_length(std::size_t j) const
        {
            std::size_t len = input_length;
            for (std::size_t s = 0; s <= j; ++s)
                len /= pool;
            return len;
        }
        std::size_t stage_input_channels(std::size_t j) const { return j == 0 ? input_channels : backbone_channels[j - 1]; }
        std::size_t attention_input_channels(std::size_t j) const
        {
            return j == 0 ? backbone_channels[0] : backbone_channels[j] + backbone_channels[j - 1];
        }
        std::size_t attention_mid_channels(std::size_t j) const { return std::max<std::size_t>(1, backbone_channels[j] / attention_ratio); }
        std::size_t head_features() const { return backbone_channels.back() * stage_length(stages() - 1); }

        void validate() const
        {
            if (input_length == 0 || (input_channels != 1 && input_channels != 2))
                throw shape_error("descriptor needs a positive input length and one or two input channels");
            if (backbone_channels.empty() || kernel % 2 == 0 || pool == 0 || attention_ratio == 0)
                throw shape_error("descriptor has an invalid backbone layout");
            if (stage_length(stages() - 1) == 0)
                throw shape_error("input too short for the pooling ladder");
            if (class_counts.empty() || std::find(class_counts.begin(), class_counts.end(), 0u) != class_counts.end())
                throw shape_error("class counts must be positive");
            if (!(bn_epsilon > 0.0))
                throw shape_error("batch-norm epsilon must be positive");
        }
    };

    inline nlohmann::json to_json(const network_descriptor &d)
    {
        return {{"format", "ampbt"},
                {"input_length", d.input_length},
                {"input_channels", d.input_channels},
                {"backbone_channels", d.backbone_channels},
                {"kernel", d.kernel},
                {"pool", d.pool},
                {"attention", d.attention},
                {"attention_ratio", d.attention_ratio},
                {"class_counts", d.class_counts},
                {"bn_epsilon", d.bn_epsilon}};
    }

    inline network_descriptor descriptor_from_json(const nlohmann::json &j)
    {
        try
        {
            network_descriptor d;
            if (j.value("format", std::string()) != "ampbt")
                throw shape_error("descriptor is not an ampbt network");
            d.input_length = j.at("input_length").get<std::size_t>();
            d.input_channels = j.at("input_channels").get<std::size_t>();
            d.backbone_channels = j.at("backbone_channels").get<std::vector<std::size_t>>();
            d.kernel = j.at("kernel").get<std::size_t>();
            d.pool = j.at("pool").get<std::size_t>();
            d.attention = j.at("attention").get<bool>();
            d.attention_ratio = j.at("attention_ratio").get<std::size_t>();
            d.class_counts = j.at("class_counts").get<std::vector<std::size_t>>();
            d.bn_epsilon = j.at("bn_epsilon").get<double>();
            d.validate();
            return d;
        }
        catch (const nlohmann::json::exception &e)
        {
            throw shape_error(std::string("malformed network descriptor: ") + e.what());
        }
    }

    // ---- parameter and cost accounting ---------------------------------------

    // Trainable parameters of the shared backbone: conv weights and biases plus
    // batch-norm scale and shift.
    inline std::size_t backbone_parameter_count(const network_descriptor &d)
    {
        std::size_t total = 0;
        for (std::size_t j = 0; j < d.stages(); ++j)
        {
            const auto cin = d.stage_input_channels(j), cout = d.backbone_channels[j];
            total += cin * cout * d.kernel + cout + 2 * cout;
        }
        return total;
    }

    // Trainable parameters of one task's attention stream.
    inline std::size_t attention_parameter_count(const network_descriptor &d)
    {
        std::size_t total = 0;
        for (std::size_t j = 0; j < d.stages(); ++j)
        {
            const auto in = d.attention_input_channels(j), mid = d.attention_mid_channels(j), out = d.backbone_channels[j];
            total += in * mid + mid + 2 * mid + mid * out + out + 2 * out;
        }
        return total;
    }

    inline std::size_t head_parameter_count(const network_descriptor &d, std::size_t task)
    {
        return d.class_counts.at(task) * d.head_features() + d.class_counts.at(task);
    }

    // Backbone multiply-accumulates, conv layers only, using the conv output
    // length (before pooling).
    inline std::size_t backbone_macs(const network_descriptor &d)
    {
        std::size_t total = 0, len = d.input_length;
        for (std::size_t j = 0; j < d.stages(); ++j)
        {
            total += d.stage_input_channels(j) * d.backbone_channels[j] * d.kernel * len;
            len /= d.pool;
        }
        return total;
    }

    inline std::size_t attention_macs(const network_descriptor &d)
    {
        std::size_t total = 0;
        for (std::size_t j = 0; j < d.stages(); ++j)
            total += (d.attention_input_channels(j) * d.attention_mid_channels(j) + d.attention_mid_channels(j) * d.backbone_channels[j]) *
                     d.stage_length(j);
        return total;
    }

    // ---- tensors -----------------------------------------------------------

    struct tensor
    {
        std::string name;
        std::vector<std::size_t> dims;
        std::vector<float> data;

        std::size_t numel() const
        {
            return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
        }
    };

    struct tensor_shape
    {
        std::string name;
        std::vector<std::size_t> dims;
    };

    // Canonical tensor list, in file order.
    inline std::vector<tensor_shape> expected_tensors(const network_descriptor &d)
    {
        std::vector<tensor_shape> out;
        auto bn = [&](const std::string &prefix, std::size_t c) {
            for (const char *p : {"gamma", "beta", "mean", "var"})
                out.push_back({prefix + "." + p, {c}});
        };
        for (std::size_t j = 0; j < d.stages(); ++j)
        {
            const std::string pre = "backbone." + std::to_string(j);
            out.push_back({pre + ".conv.weight", {d.backbone_channels[j], d.stage_input_channels(j), d.kernel}});
            out.push_back({pre + ".conv.bias", {d.backbone_channels[j]}});
            bn(pre + ".bn", d.backbone_channels[j]);
        }
        if (d.attention)
            for (std::size_t i = 0; i < d.tasks(); ++i)
                for (std::size_t j = 0; j < d.stages(); ++j)
                {
                    const std::string pre = "tasks." + std::to_string(i) + ".attn." + std::to_string(j);
                    const auto in = d.attention_input_channels(j), mid = d.attention_mid_channels(j), cout = d.backbone_channels[j];
                    out.push_back({pre + ".conv1.weight", {mid, in, 1}});
                    out.push_back({pre + ".conv1.bias", {mid}});
                    bn(pre + ".bn1", mid);
                    out.push_back({pre + ".conv2.weight", {cout, mid, 1}});
                    out.push_back({pre + ".conv2.bias", {cout}});
                    bn(pre + ".bn2", cout);
                }
        for (std::size_t i = 0; i < d.tasks(); ++i)
        {
            const std::string pre = "heads." + std::to_string(i) + ".fc";
            out.push_back({pre + ".weight", {d.class_counts[i], d.head_features()}});
            out.push_back({pre + ".bias", {d.class_counts[i]}});
        }
        return out;
    }

    class network_weights
    {
    public:
        network_weights() = default;

        // Validates shapes against the descriptor and finiteness of every value.
        network_weights(network_descriptor descriptor, std::vector<tensor> tensors) : descriptor_(std::move(descriptor))
        {
            descriptor_.validate();
            std::map<std::string, tensor> by_name;
            for (auto &t : tensors)
            {
                const auto name = t.name;
                if (!by_name.emplace(name, std::move(t)).second)
                    throw shape_error("duplicate tensor " + name);
            }
            for (const auto &shape : expected_tensors(descriptor_))
            {
                auto it = by_name.find(shape.name);
                if (it == by_name.end())
                    throw shape_error("missing tensor " + shape.name);
                auto &t = it->second;
                if (t.dims != shape.dims)
                    throw shape_error("tensor " + shape.name + " has the wrong shape");
                if (t.data.size() != t.numel())
                    throw shape_error("tensor " + shape.name + " data size does not match its shape");
                for (float v : t.data)
                    if (!std::isfinite(v))
                        throw non_finite_error("tensor " + shape.name + " holds a non-finite value");
                if (shape.name.ends_with(".var"))
                    for (float v : t.data)
                        if (v < 0.0f)
                            throw format_error("tensor " + shape.name + " holds a negative variance");
                index_.emplace(shape.name, tensors_.size());
                tensors_.push_back(std::move(t));
                by_name.erase(it);
            }
            if (!by_name.empty())
                throw shape_error("unexpected tensor " + by_name.begin()->first);
        }

        const network_descriptor &descriptor() const { return descriptor_; }
        const std::vector<tensor> &tensors() const { return tensors_; }
        const tensor &get(const std::string &name) const
        {
            auto it = index_.find(name);
            if (it == index_.end())
                throw shape_error("no tensor named " + name);
            return tensors_[it->second];
        }

    private:
        network_descriptor descriptor_;
        std::vector<tensor> tensors_;
        std::map<std::string, std::size_t> index_;
    };

    // Every conv and head weight zero, batch norm identity, and the given head
    // biases. The output is softmax(bias) for any input.
    inline network_weights constant_network(const network_descriptor &d, const std::vector<std::vector<float>> &head_biases)
    {
        std::vector<tensor> ts;
        for (const auto &shape : expected_tensors(d))
        {
            tensor t{shape.name, shape.dims, {}};
            t.data.assign(t.numel(), 0.0f);
            if (shape.name.ends_with(".gamma") || shape.name.ends_with(".var"))
                std::fill(t.data.begin(), t.data.end(), 1.0f);
            if (shape.name.starts_with("heads.") && shape.name.ends_with(".bias"))
            {
                const auto task = static_cast<std::size_t>(std::stoul(shape.name.substr(6)));
                if (task < head_biases.size())
                {
                    if (head_biases[task].size() != t.numel())
                        throw shape_error("head bias length does not match the class count");
                    t.data = head_biases[task];
                }
            }
            ts.push_back(std::move(t));
        }
        return network_weights(d, std::move(ts));
    }

    // Deterministic random weights, used for fixtures and tests.
    inline network_weights random_network(const network_descriptor &d, std::uint64_t seed, float scale = 0.1f)
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<float> normal(0.0f, 1.0f);
        std::uniform_real_distribution<float> positive(0.5f, 1.5f);
        std::vector<tensor> ts;
        for (const auto &shape : expected_tensors(d))
        {
            tensor t{shape.name, shape.dims, {}};
            t.data.resize(t.numel());
            const bool is_var = shape.name.ends_with(".var"), is_gamma = shape.name.ends_with(".gamma");
            for (auto &v : t.data)
                v = is_var || is_gamma ? positive(rng) : scale * normal(rng);
            ts.push_back(std::move(t));
        }
        return network_weights(d, std::move(ts));
    }

    // ---- weights file --------------------------------------------------------
    //
    // Little-endian container:
    //   "AMPW0001" | u32 version | u32 descriptor length | descriptor JSON |
    //   u32 tensor count | per tensor: u32 name length, name, u32 dtype (0 = f32),
    //   u32 rank, u32 dims[rank], u64 byte offset into the data section |
    //   raw f32 data.

    inline constexpr char weights_magic[8] = {'A', 'M', 'P', 'W', '0', '0', '0', '1'};
    inline constexpr std::uint32_t weights_version = 1;

    namespace detail
    {
        static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

        class byte_writer
        {
        public:
            void bytes(const void *p, std::size_t n)
            {
                const auto *c = static_cast<const char *>(p);
                buf_.insert(buf_.end(), c, c + n);
            }
            template <class T>
            void pod(T v)
            {
                bytes(&v, sizeof(T));
            }
            void str(const std::string &s)
            {
                pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
                bytes(s.data(), s.size());
            }
            const std::string &buffer() const { return buf_; }
            std::string &buffer() { return buf_; }

        private:
            std::string buf_;
        };

        class byte_reader
        {
        public:
            explicit byte_reader(std::span<const char> data) : data_(data) {}
            void bytes(void *p, std::size_t n)
            {
                if (n > data_.size() - pos_)
                    throw truncation_error("file ends prematurely");
                std::memcpy(p, data_.data() + pos_, n);
                pos_ += n;
            }
            template <class T>
            T pod()
            {
                T v;
                bytes(&v, sizeof(T));
                return v;
            }
            std::string str(std::size_t limit = 1u << 26)
            {
                const auto n = pod<std::uint32_t>();
                if (n > limit)
                    throw format_error("string length out of range");
                std::string s(n, '\0');
                bytes(s.data(), n);
                return s;
            }
            std::size_t position() const { return pos_; }
            std::size_t remaining() const { return data_.size() - pos_; }
            const char *here() const { return data_.data() + pos_; }

        private:
            std::span<const char> data_;
            std::size_t pos_ = 0;
        };

        inline std::string slurp(const std::string &path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw format_error("cannot open " + path);
            return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        }

        inline void spit(const std::string &path, const std::string &bytes)
        {
            std::ofstream out(path, std::ios::binary);
            if (!out)
                throw format_error("cannot open " + path + " for writing");
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (!out)
                throw format_error("write failed for " + path);
        }
    }

    inline std::string serialize_weights(const network_weights &w)
    {
        detail::byte_writer out;
        out.bytes(weights_magic, 8);
        out.pod(weights_version);
        out.str(to_json(w.descriptor()).dump());
        out.pod<std::uint32_t>(static_cast<std::uint32_t>(w.tensors().size()));
        std::uint64_t offset = 0;
        for (const auto &t : w.tensors())
        {
            out.str(t.name);
            out.pod<std::uint32_t>(0);
            out.pod<std::uint32_t>(static_cast<std::uint32_t>(t.dims.size()));
            for (auto d : t.dims)
                out.pod<std::uint32_t>(static_cast<std::uint32_t>(d));
            out.pod<std::uint64_t>(offset);
            offset += t.data.size() * sizeof(float);
        }
        for (const auto &t : w.tensors())
            out.bytes(t.data.data(), t.data.size() * sizeof(float));
        return std::move(out.buffer());
    }

    inline network_weights parse_weights(std::span<const char> bytes)
    {
        detail::byte_reader in(bytes);
        char magic[8];
        in.bytes(magic, 8);
        if (std::memcmp(magic, weights_magic, 8) != 0)
            throw magic_error("not an AMPW weights file");
        if (const auto v = in.pod<std::uint32_t>(); v != weights_version)
            throw version_error("unsupported weights version " + std::to_string(v));
        nlohmann::json dj;
        try
        {
            dj = nlohmann::json::parse(in.str());
        }
        catch (const nlohmann::json::exception &e)
        {
            throw format_error(std::string("weights descriptor is not JSON: ") + e.what());
        }
        auto descriptor = descriptor_from_json(dj);

        struct entry
        {
            std::string name;
            std::vector<std::size_t> dims;
            std::uint64_t offset;
        };
        const auto count = in.pod<std::uint32_t>();
        if (count > 100000)
            throw format_error("tensor count out of range");
        std::vector<entry> table;
        for (std::uint32_t t = 0; t < count; ++t)
        {
            entry e;
            e.name = in.str(4096);
            if (in.pod<std::uint32_t>() != 0)
                throw format_error("tensor " + e.name + " has an unsupported dtype");
            const auto rank = in.pod<std::uint32_t>();
            if (rank > 8)
                throw shape_error("tensor " + e.name + " has an unsupported rank");
            for (std::uint32_t r = 0; r < rank; ++r)
                e.dims.push_back(in.pod<std::uint32_t>());
            e.offset = in.pod<std::uint64_t>();
            table.push_back(std::move(e));
        }
        const char *data = in.here();
        const std::size_t data_size = in.remaining();
        std::vector<tensor> tensors;
        for (auto &e : table)
        {
            tensor t{e.name, e.dims, {}};
            const std::size_t nbytes = t.numel() * sizeof(float);
            if (e.offset > data_size || nbytes > data_size - e.offset)
                throw truncation_error("tensor " + e.name + " extends past the end of the file");
            t.data.resize(t.numel());
            std::memcpy(t.data.data(), data + e.offset, nbytes);
            tensors.push_back(std::move(t));
        }
        return network_weights(std::move(descriptor), std::move(tensors));
    }

    inline void save_weights(const std::string &path, const network_weights &w) { detail::spit(path, serialize_weights(w)); }

    inline network_weights load_weights(const std::string &path)
    {
        const auto bytes = detail::slurp(path);
        return parse_weights(std::span<const char>(bytes.data(), bytes.size()));
    }

    // ---- inference -----------------------------------------------------------

    // Per-task class probabilities (and the logits they came from).
    struct task_probabilities
    {
        std::vector<std::vector<double>> probs;
        std::vector<std::vector<double>> logits;
    };

    // Optional per-layer capture for checking the attention invariants.
    struct forward_trace
    {
        std::vector<std::vector<double>> shared;               // F^j, [channel*len]
        std::vector<std::vector<std::vector<double>>> masks;    // [task][stage]
        std::vector<std::vector<std::vector<double>>> attended; // [task][stage] F^j * M
    };

    namespace detail
    {
        // Feature map stored channel-major: v[c * len + t].
        struct feature_map
        {
            std::size_t channels = 0, length = 0;
            std::vector<double> v;
        };

        inline feature_map conv1d(const feature_map &in, const tensor &w, const tensor &b)
        {
            const std::size_t cout = w.dims[0], cin = w.dims[1], k = w.dims[2];
            const long pad = static_cast<long>(k / 2);
            feature_map out{cout, in.length, std::vector<double>(cout * in.length)};
            for (std::size_t o = 0; o < cout; ++o)
            {
                double *dst = out.v.data() + o * in.length;
                std::fill(dst, dst + in.length, static_cast<double>(b.data[o]));
                for (std::size_t i = 0; i < cin; ++i)
                {
                    const double *src = in.v.data() + i * in.length;
                    for (std::size_t kk = 0; kk < k; ++kk)
                    {
                        const double wv = w.data[(o * cin + i) * k + kk];
                        const long shift = static_cast<long>(kk) - pad;
                        const long t0 = std::max<long>(0, -shift);
                        const long t1 = std::min<long>(static_cast<long>(in.length), static_cast<long>(in.length) - shift);
                        for (long t = t0; t < t1; ++t)
                            dst[t] += wv * src[t + shift];
                    }
                }
            }
            return out;
        }

        inline void batch_norm(feature_map &f, const network_weights &w, const std::string &prefix, double eps)
        {
            const auto &g = w.get(prefix + ".gamma"), &b = w.get(prefix + ".beta"), &m = w.get(prefix + ".mean"), &v = w.get(prefix + ".var");
            for (std::size_t c = 0; c < f.channels; ++c)
            {
                const double scale = g.data[c] / std::sqrt(static_cast<double>(v.data[c]) + eps);
                const double shift = b.data[c] - m.data[c] * scale;
                for (std::size_t t = 0; t < f.length; ++t)
                    f.v[c * f.length + t] = f.v[c * f.length + t] * scale + shift;
            }
        }

        inline void relu(feature_map &f)
        {
            for (auto &x : f.v)
                x = std::max(0.0, x);
        }

        inline void sigmoid(feature_map &f)
        {
            for (auto &x : f.v)
                x = 1.0 / (1.0 + std::exp(-x));
        }

        inline feature_map max_pool(const feature_map &f, std::size_t k)
        {
            feature_map out{f.channels, f.length / k, {}};
            out.v.resize(out.channels * out.length);
            for (std::size_t c = 0; c < f.channels; ++c)
                for (std::size_t t = 0; t < out.length; ++t)
                {
                    double m = f.v[c * f.length + t * k];
                    for (std::size_t q = 1; q < k; ++q)
                        m = std::max(m, f.v[c * f.length + t * k + q]);
                    out.v[c * out.length + t] = m;
                }
            return out;
        }

        inline feature_map concat(const feature_map &a, const feature_map &b)
        {
            feature_map out{a.channels + b.channels, a.length, a.v};
            out.v.insert(out.v.end(), b.v.begin(), b.v.end());
            return out;
        }

        inline std::vector<double> softmax(const std::vector<double> &logits)
        {
            const double m = *std::max_element(logits.begin(), logits.end());
            std::vector<double> p(logits.size());
            double s = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i)
                s += p[i] = std::exp(logits[i] - m);
            for (auto &x : p)
                x /= s;
            return p;
        }
    }

    // Forward pass in evaluation mode (batch norm on running statistics).
    inline task_probabilities forward(std::span<const cplx> pattern, const network_weights &w, forward_trace *trace = nullptr)
    {
        using namespace detail;
        const auto &d = w.descriptor();
        if (pattern.size() != d.input_length)
            throw input_error("beam pattern length " + std::to_string(pattern.size()) + " does not match the network input length " +
                              std::to_string(d.input_length));
        feature_map f{d.input_channels, d.input_length, std::vector<double>(d.input_channels * d.input_length)};
        for (std::size_t t = 0; t < d.input_length; ++t)
        {
            if (d.input_channels == 1)
                f.v[t] = std::abs(pattern[t]);
            else
            {
                f.v[t] = pattern[t].real();
                f.v[d.input_length + t] = pattern[t].imag();
            }
        }

        std::vector<feature_map> shared;
        for (std::size_t j = 0; j < d.stages(); ++j)
        {
            const std::string pre = "backbone." + std::to_string(j);
            auto g = conv1d(f, w.get(pre + ".conv.weight"), w.get(pre + ".conv.bias"));
            batch_norm(g, w, pre + ".bn", d.bn_epsilon);
            relu(g);
            f = max_pool(g, d.pool);
            shared.push_back(f);
            if (trace)
                trace->shared.push_back(f.v);
        }

        task_probabilities out;
        if (trace)
        {
            trace->masks.assign(d.tasks(), {});
            trace->attended.assign(d.tasks(), {});
        }
        for (std::size_t i = 0; i < d.tasks(); ++i)
        {
            feature_map features = shared.back();
            if (d.attention)
            {
                feature_map prev;
                for (std::size_t j = 0; j < d.stages(); ++j)
                {
                    const std::string pre = "tasks." + std::to_string(i) + ".attn." + std::to_string(j);
                    const feature_map input = j == 0 ? shared[0] : concat(shared[j], max_pool(prev, d.pool));
                    auto m = conv1d(input, w.get(pre + ".conv1.weight"), w.get(pre + ".conv1.bias"));
                    batch_norm(m, w, pre + ".bn1", d.bn_epsilon);
                    relu(m);
                    m = conv1d(m, w.get(pre + ".conv2.weight"), w.get(pre + ".conv2.bias"));
                    batch_norm(m, w, pre + ".bn2", d.bn_epsilon);
                    sigmoid(m);
                    prev = shared[j];
                    for (std::size_t q = 0; q < prev.v.size(); ++q)
                        prev.v[q] *= m.v[q];
                    if (trace)
                    {
                        trace->masks[i].push_back(m.v);
                        trace->attended[i].push_back(prev.v);
                    }
                }
                features = prev;
            }
            const auto &fw = w.get("heads." + std::to_string(i) + ".fc.weight");
            const auto &fb = w.get("heads." + std::to_string(i) + ".fc.bias");
            const std::size_t classes = fw.dims[0], nf = fw.dims[1];
            std::vector<double> logits(classes);
            for (std::size_t c = 0; c < classes; ++c)
            {
                double acc = fb.data[c];
                const float *row = fw.data.data() + c * nf;
                for (std::size_t q = 0; q < nf; ++q)
                    acc += row[q] * features.v[q];
                logits[c] = acc;
            }
            out.probs.push_back(softmax(logits));
            out.logits.push_back(std::move(logits));
        }
        return out;
    }

    // Indices of the k largest entries in descending order; ties go to the
    // smaller index.
    inline std::vector<std::size_t> topk(std::span<const double> values, std::size_t k)
    {
        if (k > values.size())
            throw parameter_error("top-k larger than the vector");
        for (double v : values)
            if (!std::isfinite(v))
                throw input_error("non-finite probability");
        std::vector<std::size_t> idx(values.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
        idx.resize(k);
        return idx;
    }
}
