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
#include <atomic>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "spix/index.hpp"
#include "spix/ingest.hpp"

namespace spix {

struct ScoredDoc {
    DocNum doc;
    Score score;

    friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// The total order every result list follows: score descending, then doc
/// number ascending.
[[nodiscard]] inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    return a.score != b.score ? a.score > b.score : a.doc < b.doc;
}

struct Ranking {
    std::string query_id;
    std::vector<ScoredDoc> entries;
};

enum class Algorithm { Daat, MaxScore };

inline Algorithm parse_algorithm(std::string_view name) {
    if (name == "daat") return Algorithm::Daat;
    if (name == "maxscore") return Algorithm::MaxScore;
    throw UsageError("unknown algorithm \"" + std::string(name) + "\" (expected daat or maxscore)");
}

/// Bounded collection of the k best documents under ranks_before.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

    /// True if `candidate` would be kept.
    [[nodiscard]] bool would_enter(const ScoredDoc& candidate) const {
        return heap_.size() < k_ || ranks_before(candidate, heap_.front());
    }

    /// True if a document numbered after everything seen so far could enter
    /// with score `bound`. Such a document loses every score tie, so this is
    /// a strict comparison against the current k-th score.
    [[nodiscard]] bool later_doc_could_enter(Score bound) const {
        return heap_.size() < k_ || bound > heap_.front().score;
    }

    bool insert(const ScoredDoc& candidate) {
        if (!would_enter(candidate)) {
            return false;
        }
        if (heap_.size() == k_) {
            std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
            heap_.pop_back();
        }
        heap_.push_back(candidate);
        std::push_heap(heap_.begin(), heap_.end(), ranks_before);
        return true;
    }

    [[nodiscard]] std::vector<ScoredDoc> sorted() && {
        std::sort_heap(heap_.begin(), heap_.end(), ranks_before);
        return std::move(heap_);
    }

private:
    std::size_t k_;
    std::vector<ScoredDoc> heap_;  // worst-ranked element at the front
};

namespace detail {

struct TermCursor {
    const ImpactPostingList* list;
    std::uint32_t weight;
    Score max_score;
    DocNum end;
    std::size_t pos = 0;

    [[nodiscard]] DocNum doc() const { return pos < list->size() ? list->docs[pos] : end; }
    [[nodiscard]] Score score() const { return static_cast<Score>(weight) * list->values[pos]; }
    void next() { ++pos; }

    void next_geq(DocNum target) {
        if (doc() >= target) {
            return;
        }
        auto it = std::lower_bound(list->docs.begin() + static_cast<std::ptrdiff_t>(pos), list->docs.end(), target);
        pos = static_cast<std::size_t>(it - list->docs.begin());
    }
};

inline std::vector<TermCursor> open_cursors(const ImpactIndex& index, const WeightedQuery& q) {
    std::vector<TermCursor> cursors;
    const auto end = static_cast<DocNum>(index.num_docs());
    for (const auto& qt : q.entries) {
        const auto* list = index.list(qt.term);
        if (list == nullptr || list->empty() || qt.weight == 0) {
            continue;
        }
        cursors.push_back({list, qt.weight, static_cast<Score>(qt.weight) * list->max_value, end});
    }
    return cursors;
}

inline void check_k(std::size_t k) {
    if (k < 1) {
        throw UsageError("k must be >= 1");
    }
}

}  // namespace detail

/// Exhaustive document-at-a-time evaluation: every document on any query
/// list is fully scored, then the k best are selected.
inline Ranking search_daat(const ImpactIndex& index, const WeightedQuery& q, std::size_t k) {
    detail::check_k(k);
    auto cursors = detail::open_cursors(index, q);
    const auto end = static_cast<DocNum>(index.num_docs());
    std::vector<ScoredDoc> all;
    while (true) {
        DocNum cur = end;
        for (const auto& c : cursors) {
            cur = std::min(cur, c.doc());
        }
        if (cur == end) {
            break;
        }
        Score s = 0;
        for (auto& c : cursors) {
            if (c.doc() == cur) {
                s += c.score();
                c.next();
            }
        }
        all.push_back({cur, s});
    }
    const auto keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), ranks_before);
    all.resize(keep);
    return {q.query_id, std::move(all)};
}

/// MaxScore dynamic pruning. Lists are ordered by their score upper bound;
/// a prefix whose summed bounds cannot beat the current k-th result becomes
/// non-essential and is only probed for candidates found on essential lists.
/// Returns exactly what search_daat returns.
inline Ranking search_maxscore(const ImpactIndex& index, const WeightedQuery& q, std::size_t k) {
    detail::check_k(k);
    auto cursors = detail::open_cursors(index, q);
    std::stable_sort(cursors.begin(), cursors.end(),
                     [](const auto& a, const auto& b) { return a.max_score < b.max_score; });
    const std::size_t n = cursors.size();
    std::vector<Score> upper(n);
    Score acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += cursors[i].max_score;
        upper[i] = acc;
    }

    TopK topk(k);
    const auto end = static_cast<DocNum>(index.num_docs());
    std::size_t first_essential = 0;
    DocNum cur = end;
    for (const auto& c : cursors) {
        cur = std::min(cur, c.doc());
    }
    while (first_essential < n && cur < end) {
        Score score = 0;
        DocNum next = end;
        for (std::size_t i = first_essential; i < n; ++i) {
            auto& c = cursors[i];
            if (c.doc() == cur) {
                score += c.score();
                c.next();
            }
            next = std::min(next, c.doc());
        }
        for (std::size_t i = first_essential; i-- > 0;) {
            if (!topk.would_enter({cur, score + upper[i]})) {
                break;
            }
            auto& c = cursors[i];
            c.next_geq(cur);
            if (c.doc() == cur) {
                score += c.score();
            }
        }
        if (topk.insert({cur, score})) {
            while (first_essential < n && !topk.later_doc_could_enter(upper[first_essential])) {
                ++first_essential;
            }
        }
        cur = next;
    }
    return {q.query_id, std::move(topk).sorted()};
}

inline Ranking search(const ImpactIndex& index, const WeightedQuery& q, std::size_t k, Algorithm algo) {
    return algo == Algorithm::Daat ? search_daat(index, q, k) : search_maxscore(index, q, k);
}

inline QueryRun to_query_run(const ImpactIndex& index, const Ranking& r) {
    QueryRun out{r.query_id, {}};
    out.entries.reserve(r.entries.size());
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        out.entries.push_back({index.doc_ids[r.entries[i].doc], static_cast<double>(r.entries[i].score),
                               static_cast<std::uint32_t>(i + 1)});
    }
    return out;
}

/// Runs every query and returns results in query input order. Workers share
/// the index read-only and write disjoint result slots.
inline Run batch_search(const ImpactIndex& index, const std::vector<WeightedQuery>& queries, std::size_t k,
                        Algorithm algo, unsigned threads = 1) {
    detail::check_k(k);
    Run run;
    run.queries.resize(queries.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < queries.size(); i = next++) {
            run.queries[i] = to_query_run(index, search(index, queries[i], k, algo));
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, queries.size()))));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }
    return run;
}

}  // namespace spix
