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
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "spix/core.hpp"

namespace spix {

/// Bijection between term strings and dense TermIds, ids assigned in
/// insertion order.
class VocabMap {
public:
    TermId insert(std::string_view term) {
        auto [it, inserted] = ids_.try_emplace(std::string(term), static_cast<TermId>(terms_.size()));
        if (inserted) {
            terms_.push_back(it->first);
        }
        return it->second;
    }

    [[nodiscard]] std::optional<TermId> find(std::string_view term) const {
        auto it = ids_.find(std::string(term));
        if (it == ids_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    [[nodiscard]] const std::string& term(TermId id) const { return terms_.at(id); }
    [[nodiscard]] std::size_t size() const { return terms_.size(); }
    [[nodiscard]] bool empty() const { return terms_.empty(); }
    [[nodiscard]] const std::vector<std::string>& terms() const { return terms_; }

    friend bool operator==(const VocabMap& a, const VocabMap& b) { return a.terms_ == b.terms_; }

private:
    std::vector<std::string> terms_;
    std::unordered_map<std::string, TermId> ids_;
};

/// Per-document sparse vectors plus the vocabulary they index into.
struct ForwardIndex {
    VocabMap vocab;
    std::vector<ImpactVector> docs;
    /// Optional per-document sorted list of expansion terms, aligned with docs.
    std::optional<std::vector<std::vector<TermId>>> expanded;

    [[nodiscard]] std::size_t num_postings() const {
        std::size_t n = 0;
        for (const auto& d : docs) {
            n += d.entries.size();
        }
        return n;
    }

    [[nodiscard]] bool is_expanded(std::size_t doc, TermId term) const {
        if (!expanded) {
            return false;
        }
        const auto& terms = (*expanded)[doc];
        return std::binary_search(terms.begin(), terms.end(), term);
    }
};

struct IngestReport {
    std::size_t lines = 0;
    std::size_t records = 0;
    std::size_t dropped_nonpositive = 0;
    std::size_t unknown_terms = 0;
};

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline bool blank(std::string_view s) {
    return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

/// Parses one {"id": ..., "<field>": ...} JSONL record, reporting errors with
/// the line number.
inline ordered_json parse_record(const std::string& line, std::size_t lineno, const char* field) {
    // The parser keeps the last of repeated keys; reject them instead.
    std::vector<std::unordered_set<std::string>> keys;
    auto no_duplicate_keys = [&](int, ordered_json::parse_event_t event, ordered_json& parsed) {
        using E = ordered_json::parse_event_t;
        if (event == E::object_start) {
            keys.emplace_back();
        } else if (event == E::object_end) {
            keys.pop_back();
        } else if (event == E::key && !keys.back().insert(parsed.get<std::string>()).second) {
            throw DataError(at_line(lineno, "duplicate key \"" + parsed.get<std::string>() + "\""));
        }
        return true;
    };
    ordered_json j;
    try {
        j = ordered_json::parse(line, no_duplicate_keys);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(at_line(lineno, std::string("malformed JSON: ") + e.what()));
    }
    if (!j.is_object()) {
        throw DataError(at_line(lineno, "expected a JSON object"));
    }
    auto id = j.find("id");
    if (id == j.end() || !id->is_string()) {
        throw DataError(at_line(lineno, "missing string field \"id\""));
    }
    auto body = j.find(field);
    if (body == j.end()) {
        throw DataError(at_line(lineno, std::string("missing field \"") + field + "\""));
    }
    return j;
}

/// Reads the "vector" object of a record as (term, weight) pairs in document order.
template <class Resolve>
std::vector<std::pair<TermId, double>> read_weights(const ordered_json& vec, std::size_t lineno,
                                                    IngestReport& report, Resolve&& resolve) {
    if (!vec.is_object()) {
        throw DataError(at_line(lineno, "\"vector\" must be an object"));
    }
    std::vector<std::pair<TermId, double>> out;
    out.reserve(vec.size());
    for (const auto& [term, value] : vec.items()) {
        if (!value.is_number()) {
            throw DataError(at_line(lineno, "weight of term \"" + term + "\" is not a number"));
        }
        const double w = value.template get<double>();
        if (!std::isfinite(w)) {
            throw DataError(at_line(lineno, "weight of term \"" + term + "\" is not finite"));
        }
        if (!(w > 0.0)) {
            ++report.dropped_nonpositive;
            continue;
        }
        if (auto id = resolve(term)) {
            out.emplace_back(*id, w);
        } else {
            ++report.unknown_terms;
        }
    }
    return out;
}

template <class F>
void for_each_line(std::istream& in, F&& f) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!blank(line)) {
            f(line, lineno);
        }
    }
}

template <class T>
T parse_number(std::string_view tok, std::size_t lineno, const char* what) {
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw DataError(at_line(lineno, std::string("cannot parse ") + what + " \"" + std::string(tok) + "\""));
    }
    return value;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) {
            ++j;
        }
        if (j > i) {
            toks.push_back(line.substr(i, j - i));
        }
        i = j;
    }
    return toks;
}

}  // namespace detail

struct ParsedVectors {
    ForwardIndex forward;
    IngestReport report;
};

/// Reads a JSONL collection of {"id": <string>, "vector": {<term>: <weight>}}
/// records into `vocab`. Non-positive weights are dropped and counted.
inline ParsedVectors parse_vectors(std::istream& in, VocabMap vocab = {}) {
    ParsedVectors out;
    out.forward.vocab = std::move(vocab);
    auto& fwd = out.forward;
    std::unordered_map<std::string, std::size_t> seen;
    detail::for_each_line(in, [&](const std::string& line, std::size_t lineno) {
        ++out.report.lines;
        const auto j = detail::parse_record(line, lineno, "vector");
        auto id = j["id"].get<std::string>();
        if (!seen.emplace(id, fwd.docs.size()).second) {
            throw DataError(at_line(lineno, "duplicate document id \"" + id + "\""));
        }
        auto weights = detail::read_weights(j["vector"], lineno, out.report,
                                            [&](const std::string& t) -> std::optional<TermId> {
                                                return fwd.vocab.insert(t);
                                            });
        std::sort(weights.begin(), weights.end());
        ImpactVector doc{std::move(id), {}};
        doc.entries.reserve(weights.size());
        for (const auto& [t, w] : weights) {
            if (!doc.entries.empty() && doc.entries.back().term == t) {
                throw DataError(at_line(lineno, "duplicate term \"" + fwd.vocab.term(t) + "\""));
            }
            doc.entries.push_back({t, w});
        }
        fwd.docs.push_back(std::move(doc));
        ++out.report.records;
    });
    return out;
}

/// Merges forward indexes parsed independently; ids are reassigned by
/// walking the inputs in order, so the result equals a sequential parse of
/// the concatenated files.
inline ForwardIndex merge_forward(std::vector<ForwardIndex> parts) {
    ForwardIndex out;
    std::unordered_map<std::string, bool> seen;
    for (auto& part : parts) {
        for (auto& doc : part.docs) {
            if (!seen.emplace(doc.doc_id, true).second) {
                throw DataError("duplicate document id \"" + doc.doc_id + "\" across inputs");
            }
            // Part ids are first-seen ordered, so visiting entries by part id
            // reproduces the sequential registration order.
            for (auto& e : doc.entries) {
                e.term = out.vocab.insert(part.vocab.term(e.term));
            }
            std::sort(doc.entries.begin(), doc.entries.end(),
                      [](const TermWeight& a, const TermWeight& b) { return a.term < b.term; });
            out.docs.push_back(std::move(doc));
        }
    }
    return out;
}

/// Reads an expansion sidecar ({"id": <doc>, "expanded": [<term>, ...]})
/// and attaches it to `fwd`. Documents not listed have no expansion terms.
inline void parse_expansion(std::istream& in, ForwardIndex& fwd) {
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < fwd.docs.size(); ++i) {
        by_id.emplace(fwd.docs[i].doc_id, i);
    }
    std::vector<std::vector<TermId>> expanded(fwd.docs.size());
    detail::for_each_line(in, [&](const std::string& line, std::size_t lineno) {
        const auto j = detail::parse_record(line, lineno, "expanded");
        const auto id = j["id"].get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw DataError(at_line(lineno, "unknown document id \"" + id + "\""));
        }
        const auto& list = j["expanded"];
        if (!list.is_array()) {
            throw DataError(at_line(lineno, "\"expanded\" must be an array of terms"));
        }
        auto& terms = expanded[it->second];
        for (const auto& t : list) {
            if (!t.is_string()) {
                throw DataError(at_line(lineno, "expansion terms must be strings"));
            }
            if (auto tid = fwd.vocab.find(t.get<std::string>())) {
                terms.push_back(*tid);
            }
        }
        std::sort(terms.begin(), terms.end());
        terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    });
    fwd.expanded = std::move(expanded);
}

/// Writes the forward index back as JSONL, entries in TermId order.
inline void write_vectors(std::ostream& out, const ForwardIndex& fwd) {
    for (const auto& doc : fwd.docs) {
        detail::ordered_json vec = detail::ordered_json::object();
        for (const auto& e : doc.entries) {
            vec[fwd.vocab.term(e.term)] = e.weight;
        }
        detail::ordered_json rec;
        rec["id"] = doc.doc_id;
        rec["vector"] = std::move(vec);
        out << rec.dump() << '\n';
    }
}

struct RawQuery {
    std::string query_id;
    std::vector<std::pair<TermId, double>> terms;
};

struct ParsedQueries {
    std::vector<RawQuery> queries;
    IngestReport report;
};

/// Reads queries in the vector JSONL schema, resolving terms against an
/// existing vocabulary. Unknown terms are dropped and counted.
inline ParsedQueries parse_queries(std::istream& in, const VocabMap& vocab) {
    ParsedQueries out;
    detail::for_each_line(in, [&](const std::string& line, std::size_t lineno) {
        ++out.report.lines;
        const auto j = detail::parse_record(line, lineno, "vector");
        RawQuery q{j["id"].get<std::string>(), {}};
        q.terms = detail::read_weights(j["vector"], lineno, out.report,
                                       [&](const std::string& t) { return vocab.find(t); });
        out.queries.push_back(std::move(q));
        ++out.report.records;
    });
    return out;
}

inline std::vector<WeightedQuery> scale_queries(const std::vector<RawQuery>& raw, const QuantConfig& cfg) {
    std::vector<WeightedQuery> out;
    out.reserve(raw.size());
    for (const auto& q : raw) {
        out.push_back(scale_query(q.query_id, q.terms, cfg));
    }
    return out;
}

/// Graded relevance judgments, keyed query -> doc -> grade.
struct Qrels {
    std::map<std::string, std::map<std::string, int>> judgments;
    std::size_t overridden = 0;

    [[nodiscard]] int grade(const std::string& query, const std::string& doc) const {
        auto q = judgments.find(query);
        if (q == judgments.end()) {
            return 0;
        }
        auto d = q->second.find(doc);
        return d == q->second.end() ? 0 : d->second;
    }

    [[nodiscard]] const std::map<std::string, int>* find(const std::string& query) const {
        auto q = judgments.find(query);
        return q == judgments.end() ? nullptr : &q->second;
    }

    [[nodiscard]] bool empty() const { return judgments.empty(); }
};

/// Parses "qid 0 docid grade" lines. A repeated (qid, docid) pair overrides
/// the earlier grade and is counted in `overridden`.
inline Qrels parse_qrels(std::istream& in) {
    Qrels qrels;
    detail::for_each_line(in, [&](const std::string& line, std::size_t lineno) {
        const auto toks = detail::split_ws(line);
        if (toks.size() != 4) {
            throw DataError(at_line(lineno, "expected 4 fields \"qid 0 docid grade\""));
        }
        const int grade = detail::parse_number<int>(toks[3], lineno, "grade");
        if (grade < 0) {
            throw DataError(at_line(lineno, "negative grade"));
        }
        auto [it, inserted] = qrels.judgments[std::string(toks[0])].insert_or_assign(std::string(toks[2]), grade);
        if (!inserted) {
            ++qrels.overridden;
        }
    });
    return qrels;
}

inline void write_qrels(std::ostream& out, const Qrels& qrels) {
    for (const auto& [q, docs] : qrels.judgments) {
        for (const auto& [d, g] : docs) {
            out << q << " 0 " << d << ' ' << g << '\n';
        }
    }
}

struct RunEntry {
    std::string doc_id;
    double score;
    std::uint32_t rank;

    friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

struct QueryRun {
    std::string query_id;
    std::vector<RunEntry> entries;
};

/// Ranked results for a sequence of queries, in query input order.
struct Run {
    std::vector<QueryRun> queries;

    [[nodiscard]] const QueryRun* find(std::string_view query_id) const {
        for (const auto& q : queries) {
            if (q.query_id == query_id) {
                return &q;
            }
        }
        return nullptr;
    }
};

/// Sorts by (score desc, doc_id asc) and rewrites ranks from 1.
inline void normalize(QueryRun& q) {
    std::sort(q.entries.begin(), q.entries.end(), [](const RunEntry& a, const RunEntry& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.doc_id < b.doc_id;
    });
    for (std::size_t i = 0; i < q.entries.size(); ++i) {
        q.entries[i].rank = static_cast<std::uint32_t>(i + 1);
    }
}

/// Parses "qid Q0 docid rank score tag" lines; every query is normalized.
inline Run parse_run(std::istream& in) {
    Run run;
    std::unordered_map<std::string, std::size_t> index;
    detail::for_each_line(in, [&](const std::string& line, std::size_t lineno) {
        const auto toks = detail::split_ws(line);
        if (toks.size() != 6) {
            throw DataError(at_line(lineno, "expected 6 fields \"qid Q0 docid rank score tag\""));
        }
        const auto rank = detail::parse_number<std::uint32_t>(toks[3], lineno, "rank");
        const auto score = detail::parse_number<double>(toks[4], lineno, "score");
        std::string qid(toks[0]);
        auto [it, inserted] = index.try_emplace(qid, run.queries.size());
        if (inserted) {
            run.queries.push_back({qid, {}});
        }
        run.queries[it->second].entries.push_back({std::string(toks[2]), score, rank});
    });
    for (auto& q : run.queries) {
        normalize(q);
    }
    return run;
}

/// Writes a run in TREC format with scores at 6 decimal places. Queries with
/// no entries are omitted.
inline void write_run(std::ostream& out, const Run& run, std::string_view tag) {
    char buf[64];
    for (const auto& q : run.queries) {
        for (const auto& e : q.entries) {
            std::snprintf(buf, sizeof buf, "%.6f", e.score);
            out << q.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << buf << ' ' << tag << '\n';
        }
    }
}

}  // namespace spix
