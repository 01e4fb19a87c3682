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

// airybt command line: field simulation, caustics, datasets, sweeps,
// inference and metric tables.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <airybt.hpp>

namespace
{
    using namespace airybt;

    struct common_flags
    {
        std::string config;
        std::string codebook;
        std::string weights;
        std::string out;
        std::uint64_t seed = 0;
        unsigned jobs = default_jobs();
    };

    void add_common(CLI::App *app, common_flags &f)
    {
        app->add_option("--config", f.config, "Scenario JSON");
        app->add_option("--codebook", f.codebook, "Codebook spec JSON");
        app->add_option("--weights", f.weights, "AMPW0001 weights file");
        app->add_option("--out", f.out, "Output path");
        app->add_option("--seed", f.seed, "Random seed");
        app->add_option("--jobs", f.jobs, "Worker threads (default ABL_JOBS)")->check(CLI::PositiveNumber);
    }

    void log_run(const std::string &hash, std::uint64_t seed, unsigned jobs)
    {
        std::cerr << "airybt: scenario " << hash << " seed " << seed << " jobs " << jobs << '\n';
    }

    scenario_config need_config(const common_flags &f)
    {
        if (f.config.empty())
            throw usage_error("--config is required");
        return load_scenario(f.config);
    }

    codebook_spec need_codebook(const common_flags &f)
    {
        if (f.codebook.empty())
            throw usage_error("--codebook is required");
        return load_codebook_spec(f.codebook);
    }

    // Writes to --out, or stdout when no path was given.
    template <class Fn>
    void emit(const std::string &path, Fn &&fn)
    {
        if (path.empty() || path == "-")
        {
            fn(std::cout);
            return;
        }
        std::ofstream out(path);
        if (!out)
            throw input_error("cannot open " + path + " for writing");
        fn(out);
    }

    std::vector<std::size_t> parse_k(const std::vector<std::size_t> &k)
    {
        if (k.empty())
            return {3, 3, 5};
        for (auto v : k)
            if (v == 0)
                throw usage_error("--k entries must be positive");
        return k;
    }

    // Records selected by an optional split file and subset name.
    std::vector<std::size_t> select_records(std::size_t n, const std::string &split_path, const std::string &subset)
    {
        std::vector<std::size_t> idx;
        if (split_path.empty())
        {
            if (!subset.empty() && subset != "all")
                throw usage_error("--subset needs --split");
            idx.resize(n);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            return idx;
        }
        std::ifstream in(split_path);
        if (!in)
            throw input_error("cannot open " + split_path);
        const auto j = nlohmann::json::parse(in);
        const std::string name = subset.empty() ? "test" : subset;
        if (name != "train" && name != "val" && name != "test")
            throw usage_error("--subset must be train, val or test");
        idx = j.at(name).get<std::vector<std::size_t>>();
        for (auto i : idx)
            if (i >= n)
                throw input_error("split refers to a record beyond the dataset");
        return idx;
    }

    // ---- field ------------------------------------------------------------------

    struct field_flags
    {
        double theta = 0.0, r = infinite_distance, c = 0.0;
        std::optional<double> slice_x;
        double padding = 2.0;
    };

    int run_field(const common_flags &f, const field_flags &ff)
    {
        const auto config = need_config(f);
        log_run(scenario_hash(config), f.seed, f.jobs);
        const auto grid = build_grid(config);
        propagation_options opt;
        opt.padding_factor = static_cast<std::size_t>(ff.padding);
        const propagator prop(config, grid, opt);
        const auto cw = make_codeword({ff.theta, ff.r, ff.c}, config.n_antennas, config.wavenumber(), config.spacing());
        if (f.out.empty())
            throw usage_error("field needs --out");
        if (ff.slice_x)
        {
            const auto col = grid.col_of(*ff.slice_x);
            if (!col)
                throw geometry_error("slice position outside the grid");
            const auto map = prop.slices(cw.field, {*col});
            emit(f.out, [&](std::ostream &out) {
                out << "y,re,im,gain\n";
                for (std::size_t r = 0; r < grid.rows(); ++r)
                {
                    const auto v = map.at(0, r);
                    out << format_double(grid.y(r)) << ',' << format_double(v.real()) << ',' << format_double(v.imag()) << ','
                        << format_double(beam_gain(v)) << '\n';
                }
            });
            return 0;
        }
        std::vector<std::size_t> cols(grid.cols());
        std::iota(cols.begin(), cols.end(), std::size_t{0});
        write_field_dump(f.out, prop.slices(cw.field, cols), grid);
        return 0;
    }

    // ---- caustic ----------------------------------------------------------------

    struct caustic_flags
    {
        double theta = 0.0, r = infinite_distance, c = 0.0;
        std::size_t samples = 2001;
    };

    int run_caustic(const common_flags &f, const caustic_flags &cf)
    {
        const auto config = need_config(f);
        log_run(scenario_hash(config), f.seed, f.jobs);
        const beam_params p{cf.theta, cf.r, cf.c};
        const auto pts = caustic_curve(p, config.wavenumber(), config.aperture() / 2.0, cf.samples);
        emit(f.out, [&](std::ostream &out) { write_caustic_csv(out, pts); });
        if (p.c != 0.0)
            std::cerr << "airybt: max range " << format_double(max_range(p, config.wavenumber(), config.aperture())) << " m\n";
        return 0;
    }

    // ---- dataset ------------------------------------------------------------------

    struct dataset_flags
    {
        std::string sampling;
        std::vector<double> area;
        std::size_t stride = 1;
        std::size_t count = 0;
        bool random = false;
        std::string in;
        double fraction = 0.01;
        double noise = 0.0;
    };

    int run_dataset_gen(const common_flags &f, const dataset_flags &df)
    {
        const auto config = need_config(f);
        const auto spec = need_codebook(f);
        log_run(scenario_hash(config), f.seed, f.jobs);
        if (f.out.empty())
            throw usage_error("dataset gen needs --out");
        receiver_sampling s;
        if (!df.sampling.empty())
        {
            std::ifstream in(df.sampling);
            if (!in)
                throw input_error("cannot open " + df.sampling);
            s = sampling_from_json(nlohmann::json::parse(in));
        }
        else
        {
            if (!df.area.empty())
                s.area = {df.area.at(0), df.area.at(1), df.area.at(2), df.area.at(3)};
            s.stride = df.stride;
            s.random = df.random;
            s.count = df.count;
            s.seed = f.seed;
        }
        generation_options opt;
        opt.jobs = f.jobs;
        opt.noise_sigma = df.noise;
        opt.noise_seed = f.seed;
        const auto ds = generate_dataset(config, spec, s, opt);
        write_records(f.out, ds);
        std::cerr << "airybt: wrote " << ds.records.size() << " records to " << f.out << '\n';
        return 0;
    }

    int run_dataset_split(const common_flags &f, const dataset_flags &df)
    {
        if (df.in.empty())
            throw usage_error("dataset split needs --in");
        const auto ds = read_records(df.in);
        log_run(ds.manifest.value("scenario_hash", std::string("?")), f.seed, f.jobs);
        const auto split = split_dataset(ds.records.size(), f.seed);
        emit(f.out, [&](std::ostream &out) { out << to_json(split, f.seed).dump() << '\n'; });
        std::cerr << "airybt: split " << split.train.size() << '/' << split.val.size() << '/' << split.test.size() << '\n';
        return 0;
    }

    int run_dataset_audit(const common_flags &f, const dataset_flags &df)
    {
        if (df.in.empty())
            throw usage_error("dataset audit needs --in");
        const auto ds = read_records(df.in);
        log_run(ds.manifest.value("scenario_hash", std::string("?")), f.seed, f.jobs);
        const auto rep = audit_dataset(ds, df.fraction, f.seed, f.jobs);
        std::cout << "checked " << rep.checked << " labels " << rep.label_mismatches << " gains " << rep.gain_mismatches << " patterns "
                  << rep.pattern_mismatches << (rep.ok() ? " ok" : " FAILED") << '\n';
        return rep.ok() ? 0 : 3;
    }

    // ---- sweep ----------------------------------------------------------------------

    struct sweep_flags
    {
        std::string method;
        std::vector<double> receiver;
        std::string dataset;
        std::string split;
        std::string subset;
        std::string trace;
        std::vector<std::size_t> k;
    };

    search_result run_method(const std::string &method, const codebook &cb, const gain_source &gains, const std::vector<cplx> *pattern,
                             const network_weights *w, const std::vector<std::size_t> &k)
    {
        if (method == "airy-bs")
            return exhaustive_sweep(cb, gains);
        if (method == "focus-bs")
            return focusing_sweep(cb, gains);
        if (method == "airy-hier")
            return hierarchical_search(cb, gains);
        if (method == "airy-dl")
            return dl_beam_training(*pattern, *w, cb, gains, k, method);
        // focus-dl: candidates restricted to the c = 0 slice.
        const auto focus = cb.focusing();
        const auto zero = *cb.zero_curvature_index();
        gain_source mapped = [&](const codebook &, std::span<const std::size_t> flat) {
            std::vector<std::size_t> full;
            for (auto f : flat)
            {
                const auto i = focus.unflat(f);
                full.push_back(cb.flat({i.l1, i.l2, zero}));
            }
            return gains(cb, full);
        };
        auto r = dl_beam_training(*pattern, *w, focus, mapped, {k.at(0), k.at(1)}, method);
        r.best.l3 = zero;
        r.params = cb.params(r.best);
        return r;
    }

    int run_sweep(const common_flags &f, const sweep_flags &sf)
    {
        const auto config = need_config(f);
        const auto spec = need_codebook(f);
        log_run(scenario_hash(config), f.seed, f.jobs);
        const auto cb = build_codebook(spec, config);
        const auto k = parse_k(sf.k);
        const bool dl = sf.method == "airy-dl" || sf.method == "focus-dl";
        std::optional<network_weights> w;
        if (dl)
        {
            if (f.weights.empty())
                throw usage_error(sf.method + " needs --weights");
            w = load_weights(f.weights);
        }
        if (sf.method != "airy-bs" && sf.method != "airy-dl" && !cb.zero_curvature_index())
            throw parameter_error("curvature set does not contain zero");

        const auto grid = build_grid(config);
        const propagator prop(config, grid);
        std::vector<search_result> results;
        if (!sf.receiver.empty())
        {
            if (!sf.dataset.empty())
                throw usage_error("use either --receiver or --dataset");
            const point rx{sf.receiver.at(0), sf.receiver.at(1)};
            const auto gains = simulated_gains(prop, rx, f.jobs);
            std::vector<cplx> pattern;
            if (dl)
                pattern = dft_sweep(prop, build_dft_codebook(config, spec.l1), rx, f.jobs);
            results.push_back(run_method(sf.method, cb, gains, &pattern, w ? &*w : nullptr, k));
        }
        else if (!sf.dataset.empty())
        {
            const auto ds = read_records(sf.dataset);
            check_manifest(ds.manifest, config, spec);
            const auto idx = select_records(ds.records.size(), sf.split, sf.subset);
            std::vector<cell> cells;
            for (auto i : idx)
                cells.push_back(receiver_cell(grid, {ds.records[i].x, ds.records[i].y}));
            // One propagation per codeword serves every receiver.
            std::vector<std::vector<double>> tables(cells.size(), std::vector<double>(cb.size()));
            const auto plan = prop.make_plan(cells);
            const auto all = all_indices(cb);
            for_each_field(prop, cb, all, plan, f.jobs, [&](std::size_t fi, std::span<const cplx> v) {
                for (std::size_t r = 0; r < cells.size(); ++r)
                    tables[r][fi] = beam_gain(v[r]);
            });
            for (std::size_t r = 0; r < cells.size(); ++r)
            {
                const auto gains = tabulated_gains(std::move(tables[r]));
                results.push_back(run_method(sf.method, cb, gains, &ds.records[idx[r]].pattern, w ? &*w : nullptr, k));
            }
        }
        else
            throw usage_error("sweep needs --receiver or --dataset");

        for (const auto &r : results)
        {
            const auto expect = expected_overhead(sf.method, spec.l1, spec.l2, spec.l3, k);
            if (r.overhead != expect)
                throw error("overhead accounting mismatch");
        }
        emit(f.out, [&](std::ostream &out) { write_results_csv(out, results); });
        if (!sf.trace.empty())
            emit(sf.trace, [&](std::ostream &out) { write_trace_csv(out, results); });
        std::cerr << "airybt: overhead " << results.front().overhead << '\n';
        return 0;
    }

    // ---- infer ------------------------------------------------------------------------

    struct infer_flags
    {
        std::string dataset;
        std::size_t record = 0;
        std::vector<double> receiver;
        std::vector<std::size_t> k;
    };

    int run_infer(const common_flags &f, const infer_flags &inf)
    {
        if (f.weights.empty())
            throw usage_error("infer needs --weights");
        const auto w = load_weights(f.weights);
        std::vector<cplx> pattern;
        if (!inf.dataset.empty())
        {
            const auto ds = read_records(inf.dataset);
            log_run(ds.manifest.value("scenario_hash", std::string("?")), f.seed, f.jobs);
            if (inf.record >= ds.records.size())
                throw usage_error("--record beyond the dataset");
            pattern = ds.records[inf.record].pattern;
        }
        else if (!inf.receiver.empty())
        {
            const auto config = need_config(f);
            log_run(scenario_hash(config), f.seed, f.jobs);
            const auto grid = build_grid(config);
            const propagator prop(config, grid);
            pattern = dft_sweep(prop, build_dft_codebook(config, w.descriptor().input_length), point{inf.receiver.at(0), inf.receiver.at(1)}, f.jobs);
        }
        else
            throw usage_error("infer needs --dataset or --receiver");
        const auto probs = forward(pattern, w).probs;
        auto k = parse_k(inf.k);
        k.resize(probs.size(), 1);
        emit(f.out, [&](std::ostream &out) {
            out << "task,rank,index,prob\n";
            for (std::size_t t = 0; t < probs.size(); ++t)
            {
                const auto top = topk(probs[t], std::min(k[t], probs[t].size()));
                for (std::size_t r = 0; r < top.size(); ++r)
                    out << t << ',' << r << ',' << top[r] << ',' << format_double(probs[t][top[r]]) << '\n';
            }
        });
        return 0;
    }

    // ---- eval -------------------------------------------------------------------------

    struct eval_flags
    {
        std::string metric;
        std::vector<std::string> datasets;
        std::vector<std::string> results;
        std::vector<std::string> traces;
        std::string split;
        std::string subset;
        double width = 0.05;
    };

    int run_eval(const common_flags &f, const eval_flags &ef)
    {
        if (ef.results.empty() && ef.traces.empty())
            throw usage_error("eval needs --results");
        if (ef.datasets.empty())
            throw usage_error("eval needs --dataset");
        const bool grouped = ef.metric == "height-sweep" || ef.metric == "position-heatmap";
        if (!grouped && ef.datasets.size() != 1)
            throw usage_error(ef.metric + " takes exactly one --dataset");

        if (grouped)
        {
            if (ef.results.size() != ef.datasets.size())
                throw usage_error("give one --results per --dataset");
            std::vector<group_gains> groups;
            for (std::size_t i = 0; i < ef.datasets.size(); ++i)
            {
                const auto ds = read_records(ef.datasets[i]);
                const auto cfg = ds.scenario();
                log_run(scenario_hash(cfg), f.seed, f.jobs);
                group_gains g;
                if (ef.metric == "height-sweep")
                    g.label = {cfg.obstacles.empty() ? 0.0 : cfg.obstacles[0].dy};
                else
                {
                    if (cfg.obstacles.empty())
                        throw config_error("position heatmap needs an obstacle in every scenario");
                    g.label = {cfg.obstacles[0].center.x, cfg.obstacles[0].center.y};
                }
                g.methods = read_results_csv(ef.results[i]);
                groups.push_back(std::move(g));
            }
            emit(f.out, [&](std::ostream &out) {
                write_group_csv(out, ef.metric == "height-sweep" ? std::vector<std::string>{"height"} : std::vector<std::string>{"cx", "cy"}, groups);
            });
            return 0;
        }

        const auto ds = read_records(ef.datasets.front());
        const auto cfg = ds.scenario();
        log_run(scenario_hash(cfg), f.seed, f.jobs);
        const auto idx = select_records(ds.records.size(), ef.split, ef.subset);

        if (ef.metric == "overhead-curve")
        {
            if (ef.traces.empty())
                throw usage_error("overhead-curve needs --trace");
            std::vector<method_trace> traces;
            std::size_t n_max = 0;
            for (const auto &p : ef.traces)
                for (auto &t : read_trace_csv(p, idx.size()))
                {
                    for (const auto &rec : t.records)
                        if (!rec.empty())
                            n_max = std::max(n_max, rec.back().first);
                    traces.push_back(std::move(t));
                }
            emit(f.out, [&](std::ostream &out) { write_overhead_csv(out, traces, n_max); });
            return 0;
        }

        std::vector<method_gains> methods;
        for (const auto &p : ef.results)
            for (auto &m : read_results_csv(p))
            {
                if (m.gains.size() != idx.size())
                    throw config_error("results for " + m.method + " do not match the selected records");
                methods.push_back(std::move(m));
            }

        if (ef.metric == "cdf")
        {
            emit(f.out, [&](std::ostream &out) { write_cdf_csv(out, methods); });
            return 0;
        }
        if (ef.metric == "blockage-bins")
        {
            std::vector<double> ratios;
            for (auto i : idx)
                ratios.push_back(ds.records[i].blockage);
            emit(f.out, [&](std::ostream &out) { write_bins_csv(out, blockage_bins(ratios, methods, ef.width)); });
            return 0;
        }
        // Horizontal and vertical distances to the obstacle, occluded receivers only.
        if (cfg.obstacles.empty())
            throw config_error(ef.metric + " needs an obstacle in the scenario");
        const auto &ob = cfg.obstacles.front();
        std::vector<double> coords;
        std::vector<method_gains> kept(methods.size());
        for (std::size_t m = 0; m < methods.size(); ++m)
            kept[m].method = methods[m].method;
        for (std::size_t q = 0; q < idx.size(); ++q)
        {
            const auto &rec = ds.records[idx[q]];
            if (!(rec.blockage > 0.0))
                continue;
            coords.push_back(ef.metric == "horizontal-bins" ? rec.x - ob.x_hi() : std::abs(rec.y - ob.center.y));
            for (std::size_t m = 0; m < methods.size(); ++m)
                kept[m].gains.push_back(methods[m].gains[q]);
        }
        emit(f.out, [&](std::ostream &out) { write_bins_csv(out, coordinate_bins(coords, kept, ef.width)); });
        return 0;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"airybt: near-field Airy beam training laboratory"};
    app.require_subcommand(1);
    common_flags common;

    auto *field = app.add_subcommand("field", "Propagate one codeword and dump the field");
    add_common(field, common);
    field_flags ff;
    field->add_option("--theta", ff.theta, "Steering angle (rad)");
    field->add_option("--r", ff.r, "Focal distance (m)");
    field->add_option("--c", ff.c, "Airy curvature");
    field->add_option("--slice-x", ff.slice_x, "Dump only the column at this x as CSV");
    field->add_option("--padding", ff.padding, "Zero padding factor")->check(CLI::Range(1.0, 64.0));

    auto *caustic = app.add_subcommand("caustic", "Caustic curve of an Airy codeword as CSV");
    add_common(caustic, common);
    caustic_flags cf;
    caustic->add_option("--theta", cf.theta, "Steering angle (rad)");
    caustic->add_option("--r", cf.r, "Focal distance (m)");
    caustic->add_option("--c", cf.c, "Airy curvature");
    caustic->add_option("--samples", cf.samples, "Aperture samples")->check(CLI::PositiveNumber);

    auto *dataset_cmd = app.add_subcommand("dataset", "Generate, split or audit datasets");
    dataset_cmd->require_subcommand(1);
    dataset_flags df;
    auto *gen = dataset_cmd->add_subcommand("gen", "Generate a labelled dataset");
    add_common(gen, common);
    gen->add_option("--sampling", df.sampling, "Receiver sampling JSON");
    gen->add_option("--area", df.area, "x_min,x_max,y_min,y_max")->delimiter(',')->expected(4);
    gen->add_option("--stride", df.stride, "Lattice stride in grid cells")->check(CLI::PositiveNumber);
    gen->add_flag("--random", df.random, "Draw --count random receivers");
    gen->add_option("--count", df.count, "Random receiver count");
    gen->add_option("--noise", df.noise, "Pattern noise standard deviation");
    auto *split = dataset_cmd->add_subcommand("split", "Deterministic 80/10/10 split");
    add_common(split, common);
    split->add_option("--in", df.in, "Dataset file")->required();
    auto *audit = dataset_cmd->add_subcommand("audit", "Re-verify a sample of records");
    add_common(audit, common);
    audit->add_option("--in", df.in, "Dataset file")->required();
    audit->add_option("--fraction", df.fraction, "Fraction of records to re-sweep")->check(CLI::Range(0.0, 1.0));

    auto *sweep = app.add_subcommand("sweep", "Beam training at one receiver or over a dataset");
    add_common(sweep, common);
    sweep_flags sf;
    sweep->add_option("--method", sf.method, "Search strategy")
        ->required()
        ->check(CLI::IsMember({"airy-bs", "focus-bs", "airy-hier", "airy-dl", "focus-dl"}));
    sweep->add_option("--receiver", sf.receiver, "x,y")->delimiter(',')->expected(2);
    sweep->add_option("--dataset", sf.dataset, "Dataset file");
    sweep->add_option("--split", sf.split, "Split JSON");
    sweep->add_option("--subset", sf.subset, "train, val or test");
    sweep->add_option("--trace", sf.trace, "Improvement trace CSV");
    sweep->add_option("--k", sf.k, "Candidates per task")->delimiter(',');

    auto *infer = app.add_subcommand("infer", "Network probabilities for one beam pattern");
    add_common(infer, common);
    infer_flags inf;
    infer->add_option("--dataset", inf.dataset, "Dataset file");
    infer->add_option("--record", inf.record, "Record index");
    infer->add_option("--receiver", inf.receiver, "x,y")->delimiter(',')->expected(2);
    infer->add_option("--k", inf.k, "Top-k per task")->delimiter(',');

    auto *eval = app.add_subcommand("eval", "Metric tables from sweep results");
    add_common(eval, common);
    eval_flags ef;
    eval->add_option("--metric", ef.metric, "Metric")
        ->required()
        ->check(CLI::IsMember({"blockage-bins", "horizontal-bins", "vertical-bins", "cdf", "height-sweep", "overhead-curve", "position-heatmap"}));
    eval->add_option("--dataset", ef.datasets, "Dataset file(s)");
    eval->add_option("--results", ef.results, "Results CSV(s)");
    eval->add_option("--trace", ef.traces, "Trace CSV(s)");
    eval->add_option("--split", ef.split, "Split JSON");
    eval->add_option("--subset", ef.subset, "train, val or test");
    eval->add_option("--width", ef.width, "Bin width")->check(CLI::PositiveNumber);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        return app.exit(e);
    }

    try
    {
        if (field->parsed())
            return run_field(common, ff);
        if (caustic->parsed())
            return run_caustic(common, cf);
        if (gen->parsed())
            return run_dataset_gen(common, df);
        if (split->parsed())
            return run_dataset_split(common, df);
        if (audit->parsed())
            return run_dataset_audit(common, df);
        if (sweep->parsed())
            return run_sweep(common, sf);
        if (infer->parsed())
            return run_infer(common, inf);
        if (eval->parsed())
            return run_eval(common, ef);
    }
    catch (const usage_error &e)
    {
        std::cerr << "airybt: usage: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "airybt: error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
