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
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spix/core.hpp"
#include "spix/ingest.hpp"
#include "spix/student_t.hpp"

// Effectiveness metrics follow the trec_eval conventions: a query is
// evaluated iff the qrels hold at least one relevant document for it; such a
// query missing from the run scores 0, and run queries without relevant
// judgments are excluded and counted.

namespace spix {

enum class MetricKind { Mrr, Recall, Ndcg };
enum class Gain { Linear, Exponential };

struct MetricSpec {
    MetricKind kind;
    std::size_t cutoff;

    [[nodiscard]] std::string name() const {
        switch (kind) {
            case MetricKind::Mrr: return "mrr";
            case MetricKind::Recall: return "recall";
            case MetricKind::Ndcg: return "ndcg";
        }
        return "?";
    }
};

/// Parses "mrr@10", "recall@1000", "ndcg@10".
inline MetricSpec parse_metric(std::string_view s) {
    const auto at = s.find('@');
    if (at == std::string_view::npos) {
        throw UsageError("metric \"" + std::string(s) + "\" lacks a cutoff (e.g. mrr@10)");
    }
    const auto name = s.substr(0, at);
    const auto cut = s.substr(at + 1);
    std::size_t cutoff = 0;
    auto [p, ec] = std::from_chars(cut.data(), cut.data() + cut.size(), cutoff);
    if (ec != std::errc{} || p != cut.data() + cut.size() || cutoff == 0) {
        throw UsageError("bad cutoff in metric \"" + std::string(s) + "\"");
    }
    if (name == "mrr") return {MetricKind::Mrr, cutoff};
    if (name == "recall") return {MetricKind::Recall, cutoff};
    if (name == "ndcg") return {MetricKind::Ndcg, cutoff};
    throw UsageError("unknown metric \"" + std::string(name) + "\"");
}

struct MetricReport {
    std::string name;
    std::size_t cutoff = 0;
    std::map<std::string, double> per_query;
    double mean = std::numeric_limits<double>::quiet_NaN();
    /// Run queries left out because the qrels hold nothing relevant for them.
    std::size_t excluded = 0;

    [[nodiscard]] std::size_t num_queries() const { return per_query.size(); }
};

namespace detail {

template <class PerQuery>
MetricReport evaluate_each(std::string name, std::size_t cutoff, const Run& run, const Qrels& qrels,
                           int min_grade, PerQuery&& per_query) {
    MetricReport report{std::move(name), cutoff, {}, std::numeric_limits<double>::quiet_NaN(), 0};
    const QueryRun empty;
    std::map<std::string_view, const QueryRun*> by_id;
    for (const auto& q : run.queries) {
        by_id.emplace(q.query_id, &q);
    }
    for (const auto& [qid, docs] : qrels.judgments) {
        std::size_t relevant = 0;
        for (const auto& [doc, grade] : docs) {
            relevant += grade >= min_grade ? 1 : 0;
        }
        if (relevant == 0) {
            continue;
        }
        auto it = by_id.find(qid);
        const QueryRun& qr = it == by_id.end() ? empty : *it->second;
        report.per_query.emplace(qid, per_query(qr, docs, relevant));
    }
    for (const auto& q : run.queries) {
        if (!report.per_query.contains(q.query_id)) {
            ++report.excluded;
        }
    }
    if (!report.per_query.empty()) {
        std::vector<double> values;
        values.reserve(report.per_query.size());
        for (const auto& [_, v] : report.per_query) {
            values.push_back(v);
        }
        report.mean = pairwise_sum(values) / static_cast<double>(values.size());
    }
    return report;
}

inline int lookup(const std::map<std::string, int>& docs, const std::string& doc) {
    auto it = docs.find(doc);
    return it == docs.end() ? 0 : it->second;
}

}  // namespace detail

/// Reciprocal rank of the first document with grade >= min_grade within the cutoff.
inline MetricReport mrr_at(const Run& run, const Qrels& qrels, std::size_t cutoff = 10, int min_grade = 1) {
    return detail::evaluate_each(
        "mrr", cutoff, run, qrels, min_grade, [&](const QueryRun& qr, const auto& docs, std::size_t) {
            for (const auto& e : qr.entries) {
                if (e.rank <= cutoff && detail::lookup(docs, e.doc_id) >= min_grade) {
                    return 1.0 / e.rank;
                }
            }
            return 0.0;
        });
}

inline MetricReport recall_at(const Run& run, const Qrels& qrels, std::size_t cutoff = 1000, int min_grade = 1) {
    return detail::evaluate_each(
        "recall", cutoff, run, qrels, min_grade, [&](const QueryRun& qr, const auto& docs, std::size_t relevant) {
            std::size_t found = 0;
            for (const auto& e : qr.entries) {
                if (e.rank <= cutoff && detail::lookup(docs, e.doc_id) >= min_grade) {
                    ++found;
                }
            }
            return static_cast<double>(found) / static_cast<double>(relevant);
        });
}

inline double gain_of(int grade, Gain gain) {
    return gain == Gain::Linear ? static_cast<double>(grade) : std::exp2(grade) - 1.0;
}

/// nDCG with log2(rank + 1) discount; the ideal ordering comes from the qrels.
inline MetricReport ndcg_at(const Run& run, const Qrels& qrels, std::size_t cutoff = 10, Gain gain = Gain::Linear) {
    return detail::evaluate_each(
        "ndcg", cutoff, run, qrels, 1, [&](const QueryRun& qr, const auto& docs, std::size_t) {
            double dcg = 0.0;
            for (const auto& e : qr.entries) {
                if (e.rank <= cutoff) {
                    dcg += gain_of(detail::lookup(docs, e.doc_id), gain) / std::log2(e.rank + 1.0);
                }
            }
            std::vector<int> grades;
            for (const auto& [_, g] : docs) {
                grades.push_back(g);
            }
            std::sort(grades.begin(), grades.end(), std::greater<>());
            double idcg = 0.0;
            for (std::size_t r = 0; r < std::min(cutoff, grades.size()); ++r) {
                idcg += gain_of(grades[r], gain) / std::log2(r + 2.0);
            }
            return dcg / idcg;
        });
}

inline MetricReport evaluate(const Run& run, const Qrels& qrels, const MetricSpec& spec, Gain gain = Gain::Linear) {
    switch (spec.kind) {
        case MetricKind::Mrr: return mrr_at(run, qrels, spec.cutoff);
        case MetricKind::Recall: return recall_at(run, qrels, spec.cutoff);
        case MetricKind::Ndcg: return ndcg_at(run, qrels, spec.cutoff, gain);
    }
    throw InvariantError("unhandled metric kind");
}

/// pruned / baseline; empty when the baseline is not positive.
inline std::optional<double> relative_effectiveness(double pruned_mean, double baseline_mean) {
    if (!(baseline_mean > 0.0)) {
        return std::nullopt;
    }
    return pruned_mean / baseline_mean;
}

inline double speedup(double baseline_ms, double pruned_ms) {
    if (!(baseline_ms > 0.0) || !(pruned_ms > 0.0)) {
        throw DomainError("speedup needs positive latencies");
    }
    return baseline_ms / pruned_ms;
}

/// "2.1×"
inline std::string format_speedup(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f×", ratio);
    return buf;
}

struct SignificanceResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
    std::size_t dof = 0;
    bool significant = false;
    double alpha = 0.05;
    std::size_t corrections = 1;
};

/// Bonferroni gate: p <= alpha / corrections.
inline bool bonferroni_significant(double p, double alpha, std::size_t corrections) {
    return p <= alpha / static_cast<double>(std::max<std::size_t>(1, corrections));
}

/// Two-sided paired t-test on a - b.
inline SignificanceResult paired_ttest(std::span<const double> a, std::span<const double> b, double alpha = 0.05,
                                       std::size_t corrections = 1) {
    if (a.size() != b.size()) {
        throw DataError("paired t-test needs equally sized samples");
    }
    const std::size_t n = a.size();
    if (n < 2) {
        throw DataError("paired t-test needs at least 2 pairs");
    }
    if (corrections < 1) {
        throw UsageError("corrections must be >= 1");
    }
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = a[i] - b[i];
    }
    const double mean = pairwise_sum(d) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        sq[i] = (d[i] - mean) * (d[i] - mean);
    }
    const double sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1));

    SignificanceResult r;
    r.dof = n - 1;
    r.alpha = alpha;
    r.corrections = corrections;
    if (sd == 0.0) {
        if (mean == 0.0) {
            r.t_statistic = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), mean);
            r.p_value = 0.0;
        }
    } else {
        r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
        r.p_value = student_t_two_sided_p(r.t_statistic, static_cast<double>(r.dof));
    }
    r.significant = bonferroni_significant(r.p_value, alpha, corrections);
    return r;
}

/// Paired t-test over the per-query values of two reports on the same query set.
inline SignificanceResult compare_reports(const MetricReport& a, const MetricReport& b, double alpha = 0.05,
                                          std::size_t corrections = 1) {
    if (a.per_query.size() != b.per_query.size()) {
        throw DataError("reports cover different query sets");
    }
    std::vector<double> xs, ys;
    for (const auto& [qid, v] : a.per_query) {
        auto it = b.per_query.find(qid);
        if (it == b.per_query.end()) {
            throw DataError("query " + qid + " missing from the compared report");
        }
        xs.push_back(v);
        ys.push_back(it->second);
    }
    return paired_ttest(xs, ys, alpha, corrections);
}

inline std::string fmt_double(double v, int precision = 6) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

/// CSV evaluation report. Significance columns appear when `baseline` is given.
inline void write_eval_csv(std::ostream& out, const std::vector<MetricReport>& reports,
                           const std::vector<MetricReport>* baseline = nullptr,
                           const std::vector<SignificanceResult>* sig = nullptr) {
    out << "metric,cutoff,mean,n_queries";
    if (baseline != nullptr) {
        out << ",baseline_mean,t,p_value,dof,alpha,corrections,significant";
    }
    out << '\n';
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        out << r.name << ',' << r.cutoff << ',' << fmt_double(r.mean) << ',' << r.num_queries();
        if (baseline != nullptr && sig != nullptr) {
            const auto& s = (*sig)[i];
            out << ',' << fmt_double((*baseline)[i].mean) << ',' << fmt_double(s.t_statistic) << ','
                << fmt_double(s.p_value, 8) << ',' << s.dof << ',' << fmt_double(s.alpha, 4) << ',' << s.corrections
                << ',' << (s.significant ? "true" : "false");
        }
        out << '\n';
    }
}

}  // namespace spix
