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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "spix/eval.hpp"
#include "spix/index.hpp"
#include "spix/index_io.hpp"
#include "spix/ingest.hpp"
#include "spix/prune.hpp"
#include "spix/search.hpp"

namespace spix {

/// Parameters of a synthetic sparse collection. Term popularity is Zipfian
/// over the vocabulary and weights are log-normal.
struct CorpusSpec {
    std::size_t num_docs = 1000;
    std::size_t vocab_size = 500;
    std::size_t mean_doc_len = 50;
    double zipf_exponent = 1.1;
    double weight_mu = 0.0;
    double weight_sigma = 0.6;
    std::size_t num_queries = 50;
    std::size_t mean_query_len = 6;
    std::uint64_t seed = 42;

    void validate() const {
        if (vocab_size == 0 || mean_doc_len == 0 || mean_query_len == 0) {
            throw UsageError("vocabulary size and mean lengths must be positive");
        }
        if (mean_doc_len > vocab_size || mean_query_len > vocab_size) {
            throw UsageError("mean document/query length exceeds the vocabulary size");
        }
        if (!(zipf_exponent > 0.0) || !(weight_sigma > 0.0) || !std::isfinite(weight_mu)) {
            throw UsageError("zipf exponent and weight sigma must be positive");
        }
    }
};

struct Corpus {
    /// Vocabulary ids equal Zipf popularity ranks (term "t<rank>").
    ForwardIndex docs;
    std::vector<RawQuery> queries;
    Qrels qrels;
};

namespace detail {

inline std::string padded(char prefix, std::size_t i, std::size_t count) {
    const std::size_t width = std::to_string(std::max<std::size_t>(count, 1) - 1).size();
    std::string n = std::to_string(i);
    return prefix + std::string(width > n.size() ? width - n.size() : 0, '0') + n;
}

/// Draws `len` distinct ranks with Zipfian probabilities. Rejection first;
/// once that stalls the remaining slots are filled by weighted sampling
/// without replacement (exponential keys) over the unseen terms.
template <class Rng>
std::vector<TermId> sample_terms(const std::vector<double>& cdf, const std::vector<double>& pmf, std::size_t len,
                                 Rng& rng) {
    const std::size_t vocab = cdf.size();
    std::vector<char> taken(vocab, 0);
    std::vector<TermId> out;
    out.reserve(len);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t max_attempts = 64 * len + 64;
    for (std::size_t attempt = 0; out.size() < len && attempt < max_attempts; ++attempt) {
        const double u = unit(rng) * cdf.back();
        auto t = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        t = std::min(t, vocab - 1);
        if (!taken[t]) {
            taken[t] = 1;
            out.push_back(static_cast<TermId>(t));
        }
    }
    if (out.size() < len) {
        std::vector<std::pair<double, TermId>> keys;
        for (std::size_t t = 0; t < vocab; ++t) {
            if (!taken[t]) {
                keys.emplace_back(std::log(std::max(unit(rng), 1e-300)) / pmf[t], static_cast<TermId>(t));
            }
        }
        const std::size_t need = len - out.size();
        std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(need), keys.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t i = 0; i < need; ++i) {
            out.push_back(keys[i].second);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

template <class Rng>
std::size_t sample_length(std::size_t mean, std::size_t cap, Rng& rng) {
    std::poisson_distribution<std::size_t> dist(static_cast<double>(mean));
    return std::clamp<std::size_t>(dist(rng), 1, cap);
}

}  // namespace detail

/// Documents and queries without judgments. Each document and query draws
/// from its own seeded stream, so output does not depend on generation order.
inline Corpus gen_collection(const CorpusSpec& spec) {
    spec.validate();
    Corpus c;
    for (std::size_t t = 0; t < spec.vocab_size; ++t) {
        c.docs.vocab.insert("t" + std::to_string(t));
    }
    std::vector<double> pmf(spec.vocab_size), cdf(spec.vocab_size);
    double acc = 0.0;
    for (std::size_t r = 0; r < spec.vocab_size; ++r) {
        pmf[r] = 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf_exponent);
        acc += pmf[r];
        cdf[r] = acc;
    }

    c.docs.docs.resize(spec.num_docs);
    for (std::size_t d = 0; d < spec.num_docs; ++d) {
        std::seed_seq seq{spec.seed, std::uint64_t{0}, static_cast<std::uint64_t>(d)};
        std::mt19937_64 rng(seq);
        std::lognormal_distribution<double> weight(spec.weight_mu, spec.weight_sigma);
        const auto len = detail::sample_length(spec.mean_doc_len, spec.vocab_size, rng);
        auto& doc = c.docs.docs[d];
        doc.doc_id = detail::padded('D', d, spec.num_docs);
        for (TermId t : detail::sample_terms(cdf, pmf, len, rng)) {
            doc.entries.push_back({t, weight(rng)});
        }
    }
    c.queries.resize(spec.num_queries);
    for (std::size_t q = 0; q < spec.num_queries; ++q) {
        std::seed_seq seq{spec.seed, std::uint64_t{1}, static_cast<std::uint64_t>(q)};
        std::mt19937_64 rng(seq);
        std::lognormal_distribution<double> weight(spec.weight_mu, spec.weight_sigma);
        const auto len = detail::sample_length(spec.mean_query_len, spec.vocab_size, rng);
        auto& query = c.queries[q];
        query.query_id = detail::padded('Q', q, spec.num_queries);
        for (TermId t : detail::sample_terms(cdf, pmf, len, rng)) {
            query.terms.emplace_back(t, weight(rng));
        }
    }
    return c;
}

/// Unquantized float dot products of `q` against every document, accumulated
/// term by term in ascending term order.
inline std::vector<double> float_scores(const RawIndex& index, const RawQuery& q) {
    std::vector<double> acc(index.num_docs(), 0.0);
    auto terms = q.terms;
    std::sort(terms.begin(), terms.end());
    for (const auto& [t, w] : terms) {
        if (const auto* l = index.list(t)) {
            for (std::size_t i = 0; i < l->size(); ++i) {
                acc[l->docs[i]] += w * l->values[i];
            }
        }
    }
    return acc;
}

/// Judgments from the exact float scorer: per query the ten best documents
/// get grade 1 and the best one grade 2.
inline Qrels gen_qrels(const ForwardIndex& docs, const std::vector<RawQuery>& queries, std::size_t depth = 10) {
    if (docs.docs.empty()) {
        throw DataError("cannot generate qrels for an empty collection");
    }
    const auto index = build_index(docs);
    Qrels qrels;
    for (const auto& q : queries) {
        const auto scores = float_scores(index, q);
        std::vector<DocNum> order;
        for (DocNum d = 0; d < scores.size(); ++d) {
            if (scores[d] > 0.0) {
                order.push_back(d);
            }
        }
        const auto keep = std::min(depth, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                          [&](DocNum a, DocNum b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });
        for (std::size_t r = 0; r < keep; ++r) {
            qrels.judgments[q.query_id][index.doc_ids[order[r]]] = r == 0 ? 2 : 1;
        }
    }
    return qrels;
}

inline Corpus gen_corpus(const CorpusSpec& spec) {
    Corpus c = gen_collection(spec);
    c.qrels = gen_qrels(c.docs, c.queries);
    return c;
}

inline void write_queries(std::ostream& out, const VocabMap& vocab, const std::vector<RawQuery>& queries) {
    for (const auto& q : queries) {
        nlohmann::ordered_json vec = nlohmann::ordered_json::object();
        for (const auto& [t, w] : q.terms) {
            vec[vocab.term(t)] = w;
        }
        nlohmann::ordered_json rec;
        rec["id"] = q.query_id;
        rec["vector"] = std::move(vec);
        out << rec.dump() << '\n';
    }
}

/// Writes vectors.jsonl, queries.jsonl and qrels.txt into `dir`.
inline void write_corpus(const Corpus& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream vectors(dir / "vectors.jsonl", std::ios::binary);
    write_vectors(vectors, c.docs);
    std::ofstream queries(dir / "queries.jsonl", std::ios::binary);
    write_queries(queries, c.docs.vocab, c.queries);
    std::ofstream qrels(dir / "qrels.txt", std::ios::binary);
    write_qrels(qrels, c.qrels);
    if (!vectors || !queries || !qrels) {
        throw DataError("failed writing corpus to " + dir.string());
    }
}

struct LatencyReport {
    /// One entry per timed execution, query-major.
    std::vector<double> samples_ms;
    double mean_ms = 0.0;
    std::size_t warmup = 0;
    std::size_t repeats = 0;
    std::size_t num_queries = 0;
};

/// Runs each query `warmup` times untimed, then `repeats` times timed, on
/// the calling thread.
inline LatencyReport measure_latency(const ImpactIndex& index, const std::vector<WeightedQuery>& queries,
                                     std::size_t k, Algorithm algo, std::size_t warmup = 1, std::size_t repeats = 3) {
    if (queries.empty()) {
        throw DataError("no queries: mean latency is undefined");
    }
    if (repeats == 0) {
        throw UsageError("repeats must be >= 1");
    }
    LatencyReport report{{}, 0.0, warmup, repeats, queries.size()};
    report.samples_ms.reserve(queries.size() * repeats);
    std::size_t sink = 0;
    for (const auto& q : queries) {
        for (std::size_t i = 0; i < warmup; ++i) {
            sink += search(index, q, k, algo).entries.size();
        }
        for (std::size_t i = 0; i < repeats; ++i) {
            const auto start = std::chrono::steady_clock::now();
            sink += search(index, q, k, algo).entries.size();
            const auto stop = std::chrono::steady_clock::now();
            report.samples_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
        }
    }
    report.mean_ms = pairwise_sum(report.samples_ms) / static_cast<double>(report.samples_ms.size());
    [[maybe_unused]] volatile std::size_t observed = sink;
    return report;
}

struct SweepOptions {
    std::size_t k = 1000;
    Algorithm algorithm = Algorithm::MaxScore;
    std::size_t warmup = 1;
    std::size_t repeats = 3;
    QuantConfig quant;
};

struct TradeoffRow {
    static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

    std::string label;
    double latency_ms = kNaN;
    double speedup = kNaN;
    double mrr10 = kNaN;
    double rel_mrr10 = kNaN;
    double recall = kNaN;
    double rel_recall = kNaN;
    double ndcg10 = kNaN;
    double rel_ndcg10 = kNaN;
    std::size_t postings = 0;
    std::size_t bytes = 0;
    /// Empty on success, otherwise the reason the row was aborted.
    std::string error;

    [[nodiscard]] bool ok() const { return error.empty(); }
};

struct SweepResult {
    std::vector<TradeoffRow> rows;
    std::size_t recall_cutoff = 0;
};

namespace detail {

inline double relative_or_nan(double value, double base) {
    return relative_effectiveness(value, base).value_or(std::numeric_limits<double>::quiet_NaN());
}

inline TradeoffRow measure_config(const ForwardIndex& fwd, const PruneConfig& cfg,
                                  const std::vector<WeightedQuery>& queries, const Qrels& qrels,
                                  const SweepOptions& opt) {
    TradeoffRow row;
    row.label = label(cfg);
    const auto index = quantize_index(build_pruned(fwd, cfg, opt.quant));
    const auto stats = index_stats(index);
    row.postings = stats.num_postings;
    row.bytes = stats.serialized_bytes;
    const Run run = batch_search(index, queries, opt.k, opt.algorithm);
    row.mrr10 = mrr_at(run, qrels, 10).mean;
    row.recall = recall_at(run, qrels, opt.k).mean;
    row.ndcg10 = ndcg_at(run, qrels, 10).mean;
    row.latency_ms = measure_latency(index, queries, opt.k, opt.algorithm, opt.warmup, opt.repeats).mean_ms;
    return row;
}

}  // namespace detail

/// Builds, prunes, quantizes, searches, evaluates and times each config.
/// Relative columns are against the (first) Unpruned config, which must be
/// present. A failing config yields a row carrying its error; the rest proceed.
inline SweepResult sweep(const ForwardIndex& fwd, const std::vector<PruneConfig>& configs,
                         const std::vector<RawQuery>& raw_queries, const Qrels& qrels, const SweepOptions& opt) {
    const auto base_it = std::find_if(configs.begin(), configs.end(),
                                      [](const PruneConfig& c) { return std::holds_alternative<Unpruned>(c); });
    if (base_it == configs.end()) {
        throw UsageError("sweep configs must include the baseline (no pruning)");
    }
    const auto queries = scale_queries(raw_queries, opt.quant);
    if (queries.empty()) {
        throw DataError("sweep needs at least one query");
    }

    SweepResult result;
    result.recall_cutoff = opt.k;
    const auto base_pos = static_cast<std::size_t>(base_it - configs.begin());
    auto baseline = detail::measure_config(fwd, *base_it, queries, qrels, opt);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        TradeoffRow row;
        if (i == base_pos) {
            row = baseline;
        } else {
            try {
                row = detail::measure_config(fwd, configs[i], queries, qrels, opt);
            } catch (const std::exception& e) {
                row = TradeoffRow{};
                row.label = label(configs[i]);
                row.error = e.what();
                result.rows.push_back(std::move(row));
                continue;
            }
        }
        row.speedup = speedup(baseline.latency_ms, row.latency_ms);
        row.rel_mrr10 = detail::relative_or_nan(row.mrr10, baseline.mrr10);
        row.rel_recall = detail::relative_or_nan(row.recall, baseline.recall);
        row.rel_ndcg10 = detail::relative_or_nan(row.ndcg10, baseline.ndcg10);
        result.rows.push_back(std::move(row));
    }
    return result;
}

/// Reads a JSON list of {"method": ..., "param": <number | [numbers]>,
/// "shift": <bool>} objects.
inline std::vector<PruneConfig> parse_sweep_configs(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed sweep config: ") + e.what());
    }
    if (!j.is_array()) {
        throw DataError("sweep config must be a JSON array");
    }
    std::vector<PruneConfig> out;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("method") || !item["method"].is_string()) {
            throw DataError("each sweep entry needs a string \"method\"");
        }
        std::vector<double> params;
        if (auto p = item.find("param"); p != item.end()) {
            if (p->is_number()) {
                params.push_back(p->get<double>());
            } else if (p->is_array()) {
                for (const auto& v : *p) {
                    if (!v.is_number()) throw DataError("sweep parameters must be numbers");
                    params.push_back(v.get<double>());
                }
            } else {
                throw DataError("\"param\" must be a number or an array of numbers");
            }
        }
        const bool shift = item.value("shift", false);
        try {
            out.push_back(make_prune_config(item["method"].get<std::string>(), params, shift));
        } catch (const UsageError& e) {
            throw DataError(std::string("sweep config: ") + e.what());
        }
    }
    return out;
}

inline void write_tradeoff_csv(std::ostream& out, const SweepResult& result) {
    out << "label,latency_ms,speedup,mrr10,rel_mrr10,recall_at_k,rel_recall,ndcg10,rel_ndcg10,postings,bytes,error\n";
    for (const auto& r : result.rows) {
        out << r.label << ',' << fmt_double(r.latency_ms, 4) << ',' << fmt_double(r.speedup, 4) << ','
            << fmt_double(r.mrr10) << ',' << fmt_double(r.rel_mrr10) << ',' << fmt_double(r.recall) << ','
            << fmt_double(r.rel_recall) << ',' << fmt_double(r.ndcg10) << ',' << fmt_double(r.rel_ndcg10) << ','
            << r.postings << ',' << r.bytes << ',';
        if (!r.error.empty()) {
            std::string e = r.error;
            std::replace(e.begin(), e.end(), '"', '\'');
            out << '"' << e << '"';
        }
        out << '\n';
    }
}

}  // namespace spix
