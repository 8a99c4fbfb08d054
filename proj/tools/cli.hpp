// Copyright 2026-present the spix authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spix/spix.hpp"

namespace spix::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

namespace detail {

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    return out;
}

inline bool is_index_path(const std::string& path) {
    return std::filesystem::path(path).extension() == ".spix";
}

inline std::string slurp(const std::string& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ForwardIndex read_vectors(const std::string& path, const std::string& expansion, bool verbose) {
    if (is_index_path(path)) {
        throw DataError(path + " is a binary index; pruning works on raw weights, pass the vectors JSONL");
    }
    auto in = open_in(path);
    auto parsed = parse_vectors(in);
    if (verbose) {
        std::cerr << "read " << parsed.report.records << " documents, " << parsed.forward.vocab.size()
                  << " terms, dropped " << parsed.report.dropped_nonpositive << " non-positive weights\n";
    }
    if (!expansion.empty()) {
        auto side = open_in(expansion);
        parse_expansion(side, parsed.forward);
    }
    return std::move(parsed.forward);
}

inline std::vector<RawQuery> read_queries(const std::string& path, const VocabMap& vocab, bool verbose) {
    auto in = open_in(path);
    auto parsed = parse_queries(in, vocab);
    if (verbose) {
        std::cerr << "read " << parsed.queries.size() << " queries, " << parsed.report.unknown_terms
                  << " unknown terms dropped\n";
    }
    return std::move(parsed.queries);
}

inline void print_stats(std::ostream& out, const IndexStats& s) {
    out << "docs=" << s.num_docs << " terms=" << s.num_terms << " postings=" << s.num_postings
        << " max_list_len=" << s.max_list_len << " bytes=" << s.serialized_bytes << " empty_lists=" << s.empty_lists
        << " empty_docs=" << s.empty_docs << '\n';
}

}  // namespace detail

/// Parses argv, runs one subcommand and returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"spix: static pruning toolkit for sparse impact indexes"};
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    unsigned threads = 1;
    bool verbose = false;
    app.add_option("--threads", threads, "Maximum worker threads")->check(CLI::PositiveNumber);
    app.add_flag("-v,--verbose", verbose, "Report progress on stderr");

    std::uint32_t quant_bits = 8;
    std::uint32_t query_scale = 100;
    auto add_quant = [&](CLI::App* sub) {
        sub->add_option("--quant-bits", quant_bits, "Impact quantization bits")->check(CLI::Range(1, 32));
        sub->add_option("--query-scale", query_scale, "Integer scale applied to query weights")
            ->check(CLI::PositiveNumber);
    };

    // build
    std::string build_in, build_out;
    auto* build = app.add_subcommand("build", "Invert a vector collection into a quantized SPIX index");
    build->add_option("--input", build_in, "Vectors JSONL")->required();
    build->add_option("--output", build_out, "Index file to write")->required();
    add_quant(build);

    // prune
    std::string prune_in, prune_out, prune_method, prune_expansion;
    std::vector<double> prune_params;
    bool prune_shift = false;
    auto* prune = app.add_subcommand("prune", "Apply one static pruning strategy");
    prune->add_option("--input", prune_in, "Vectors JSONL (raw weights)")->required();
    prune->add_option("--method", prune_method,
                      "term-quantile | doc-topk | global-threshold | term-maxlen | dual-threshold | length-scaled")
        ->required();
    prune->add_option("--param", prune_params,
                      "Method parameter(s): q | k | t | L | t_orig,t_exp | q_base,pivot")
        ->delimiter(',');
    prune->add_flag("--shift", prune_shift, "global-threshold: subtract the threshold from surviving weights");
    prune->add_option("--expansion", prune_expansion, "Expansion sidecar JSONL (dual-threshold)");
    prune->add_option("--output", prune_out, "Output: *.spix writes a quantized index, anything else vectors JSONL")
        ->required();
    add_quant(prune);

    // search
    std::string search_index, search_queries, search_out, search_tag = "spix", search_algo = "maxscore";
    std::size_t search_k = 1000;
    auto* search_cmd = app.add_subcommand("search", "Top-k retrieval for a query file");
    search_cmd->add_option("--index", search_index, "SPIX index")->required();
    search_cmd->add_option("--queries", search_queries, "Queries JSONL")->required();
    search_cmd->add_option("--k", search_k, "Results per query")->check(CLI::PositiveNumber);
    search_cmd->add_option("--algorithm", search_algo, "maxscore | daat")
        ->check(CLI::IsMember({"maxscore", "daat"}));
    search_cmd->add_option("--output", search_out, "TREC run file to write")->required();
    search_cmd->add_option("--tag", search_tag, "Run tag");

    // evaluate
    std::string eval_run, eval_qrels, eval_metrics = "mrr@10,recall@1000,ndcg@10", eval_compare, eval_out,
                                      eval_gain = "linear";
    double eval_alpha = 0.05;
    std::size_t eval_corrections = 0;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Effectiveness metrics and paired t-tests");
    evaluate_cmd->add_option("--run", eval_run, "TREC run file")->required();
    evaluate_cmd->add_option("--qrels", eval_qrels, "TREC qrels file")->required();
    evaluate_cmd->add_option("--metrics", eval_metrics, "Comma-separated metric@cutoff list");
    evaluate_cmd->add_option("--gain", eval_gain, "nDCG gain: linear | exp")->check(CLI::IsMember({"linear", "exp"}));
    evaluate_cmd->add_option("--compare", eval_compare, "Baseline run for paired t-tests");
    evaluate_cmd->add_option("--alpha", eval_alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
    evaluate_cmd->add_option("--corrections", eval_corrections,
                             "Bonferroni correction count (default: number of metrics)");
    evaluate_cmd->add_option("--out", eval_out, "CSV output (default stdout)");

    // bench
    std::string bench_index, bench_queries, bench_algo = "maxscore", bench_out;
    std::size_t bench_k = 1000, bench_warmup = 1, bench_repeats = 3;
    auto* bench = app.add_subcommand("bench", "Mean query latency");
    bench->add_option("--index", bench_index, "SPIX index")->required();
    bench->add_option("--queries", bench_queries, "Queries JSONL")->required();
    bench->add_option("--k", bench_k, "Results per query")->check(CLI::PositiveNumber);
    bench->add_option("--algorithm", bench_algo, "maxscore | daat")->check(CLI::IsMember({"maxscore", "daat"}));
    bench->add_option("--warmup", bench_warmup, "Untimed runs per query");
    bench->add_option("--repeats", bench_repeats, "Timed runs per query")->check(CLI::PositiveNumber);
    bench->add_option("--out", bench_out, "CSV output (default stdout)");

    // sweep
    std::string sweep_in, sweep_configs, sweep_queries, sweep_qrels, sweep_out, sweep_algo = "maxscore",
                                                                            sweep_expansion;
    std::size_t sweep_k = 1000, sweep_warmup = 1, sweep_repeats = 3;
    auto* sweep_cmd = app.add_subcommand("sweep", "Speedup vs relative effectiveness table");
    sweep_cmd->add_option("--input", sweep_in, "Vectors JSONL")->required();
    sweep_cmd->add_option("--configs", sweep_configs, "JSON list of {method, param, shift}")->required();
    sweep_cmd->add_option("--queries", sweep_queries, "Queries JSONL")->required();
    sweep_cmd->add_option("--qrels", sweep_qrels, "TREC qrels")->required();
    sweep_cmd->add_option("--out", sweep_out, "CSV table to write")->required();
    sweep_cmd->add_option("--k", sweep_k, "Results per query (also the recall cutoff)")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--algorithm", sweep_algo, "maxscore | daat")->check(CLI::IsMember({"maxscore", "daat"}));
    sweep_cmd->add_option("--warmup", sweep_warmup, "Untimed runs per query");
    sweep_cmd->add_option("--repeats", sweep_repeats, "Timed runs per query")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--expansion", sweep_expansion, "Expansion sidecar JSONL (dual-threshold)");
    add_quant(sweep_cmd);

    // stats
    std::string stats_in, stats_out;
    SparsityConfig scfg;
    auto* stats = app.add_subcommand("stats", "Sparsity-regularizer diagnostics of a vector batch");
    stats->add_option("--input", stats_in, "Vectors JSONL (rows = documents)")->required();
    stats->add_option("--tau", scfg.tau, "Saturation constant")->check(CLI::PositiveNumber);
    stats->add_option("--k-target", scfg.k_target, "Desired document size")->check(CLI::PositiveNumber);
    stats->add_option("--p-target", scfg.p_target, "Target activation probability in (0, 1)");
    stats->add_option("--out", stats_out, "CSV output (default stdout)");

    // gen
    CorpusSpec spec;
    std::string gen_dir;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus, queries and qrels");
    gen->add_option("--docs", spec.num_docs, "Number of documents");
    gen->add_option("--vocab", spec.vocab_size, "Vocabulary size")->check(CLI::PositiveNumber);
    gen->add_option("--doc-len", spec.mean_doc_len, "Mean postings per document")->check(CLI::PositiveNumber);
    gen->add_option("--queries", spec.num_queries, "Number of queries");
    gen->add_option("--query-len", spec.mean_query_len, "Mean terms per query")->check(CLI::PositiveNumber);
    gen->add_option("--zipf", spec.zipf_exponent, "Zipf exponent of term popularity");
    gen->add_option("--seed", spec.seed, "Random seed");
    gen->add_option("--out-dir", gen_dir, "Directory for vectors.jsonl, queries.jsonl, qrels.txt")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        QuantConfig quant;
        quant.bits = quant_bits;
        quant.query_scale = query_scale;

        if (*build) {
            auto fwd = detail::read_vectors(build_in, "", verbose);
            const auto index = quantize_index(build_index(fwd, quant));
            auto o = detail::open_out(build_out);
            save_index(index, o);
            if (verbose) detail::print_stats(err, index_stats(index));
        } else if (*prune) {
            const auto cfg = make_prune_config(prune_method, prune_params, prune_shift);
            auto fwd = detail::read_vectors(prune_in, prune_expansion, verbose);
            const auto raw = build_pruned(fwd, cfg, quant);
            auto o = detail::open_out(prune_out);
            if (detail::is_index_path(prune_out)) {
                const auto index = quantize_index(raw);
                save_index(index, o);
                if (verbose) detail::print_stats(err, index_stats(index));
            } else {
                write_vectors(o, forward_of(raw));
            }
        } else if (*search_cmd) {
            auto in = detail::open_in(search_index);
            const auto index = load_index(in);
            const auto raw = detail::read_queries(search_queries, index.vocab, verbose);
            const auto run = batch_search(index, scale_queries(raw, index.quant), search_k,
                                          parse_algorithm(search_algo), threads);
            auto o = detail::open_out(search_out);
            write_run(o, run, search_tag);
        } else if (*evaluate_cmd) {
            std::vector<MetricSpec> specs;
            std::stringstream ss(eval_metrics);
            for (std::string m; std::getline(ss, m, ',');) {
                if (!m.empty()) specs.push_back(parse_metric(m));
            }
            if (specs.empty()) {
                throw UsageError("no metrics requested");
            }
            const Gain gain = eval_gain == "exp" ? Gain::Exponential : Gain::Linear;
            auto qin = detail::open_in(eval_qrels);
            const auto qrels = parse_qrels(qin);
            auto rin = detail::open_in(eval_run);
            const auto run = parse_run(rin);
            std::vector<MetricReport> reports;
            for (const auto& s : specs) reports.push_back(evaluate(run, qrels, s, gain));

            std::ofstream file;
            std::ostream* dst = &out;
            if (!eval_out.empty()) {
                file = detail::open_out(eval_out);
                dst = &file;
            }
            if (eval_compare.empty()) {
                write_eval_csv(*dst, reports);
            } else {
                auto bin = detail::open_in(eval_compare);
                const auto base_run = parse_run(bin);
                const std::size_t corrections = eval_corrections == 0 ? specs.size() : eval_corrections;
                std::vector<MetricReport> base;
                std::vector<SignificanceResult> sig;
                for (std::size_t i = 0; i < specs.size(); ++i) {
                    base.push_back(evaluate(base_run, qrels, specs[i], gain));
                    sig.push_back(compare_reports(reports[i], base[i], eval_alpha, corrections));
                }
                write_eval_csv(*dst, reports, &base, &sig);
            }
        } else if (*bench) {
            auto in = detail::open_in(bench_index);
            const auto index = load_index(in);
            const auto raw = detail::read_queries(bench_queries, index.vocab, verbose);
            const auto report = measure_latency(index, scale_queries(raw, index.quant), bench_k,
                                                parse_algorithm(bench_algo), bench_warmup, bench_repeats);
            std::ofstream file;
            std::ostream* dst = &out;
            if (!bench_out.empty()) {
                file = detail::open_out(bench_out);
                dst = &file;
            }
            *dst << "queries,samples,warmup,repeats,mean_ms\n"
                 << report.num_queries << ',' << report.samples_ms.size() << ',' << report.warmup << ','
                 << report.repeats << ',' << fmt_double(report.mean_ms, 4) << '\n';
        } else if (*sweep_cmd) {
            const auto configs = parse_sweep_configs(detail::slurp(sweep_configs));
            auto fwd = detail::read_vectors(sweep_in, sweep_expansion, verbose);
            const auto queries = detail::read_queries(sweep_queries, fwd.vocab, verbose);
            auto qin = detail::open_in(sweep_qrels);
            const auto qrels = parse_qrels(qin);
            SweepOptions opt;
            opt.k = sweep_k;
            opt.algorithm = parse_algorithm(sweep_algo);
            opt.warmup = sweep_warmup;
            opt.repeats = sweep_repeats;
            opt.quant = quant;
            const auto result = sweep(fwd, configs, queries, qrels, opt);
            auto o = detail::open_out(sweep_out);
            write_tradeoff_csv(o, result);
            for (const auto& row : result.rows) {
                if (!row.ok()) err << "config " << row.label << " failed: " << row.error << '\n';
            }
        } else if (*stats) {
            scfg.validate();
            const auto fwd = detail::read_vectors(stats_in, "", verbose);
            const auto m = to_batch_matrix(fwd);
            std::ofstream file;
            std::ostream* dst = &out;
            if (!stats_out.empty()) {
                file = detail::open_out(stats_out);
                dst = &file;
            }
            write_sparsity_csv(*dst, fwd.vocab, m, scfg);
        } else if (*gen) {
            write_corpus(gen_corpus(spec), gen_dir);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    } catch (const InvariantError& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternal;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kOk;
}

}  // namespace spix::cli
