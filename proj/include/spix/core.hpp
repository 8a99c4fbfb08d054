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
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spix/error.hpp"

namespace spix {

/// Dense 0-based index into a vocabulary table.
using TermId = std::uint32_t;
/// Internal document number, assigned in input order.
using DocNum = std::uint32_t;
/// Raw (pre-quantization) impact as produced by a sparse encoder.
using Weight = double;
/// Quantized impact. Never zero for a stored posting.
using Impact = std::uint32_t;
/// Integer retrieval score: sum of query-weight x impact products.
using Score = std::uint64_t;

struct TermWeight {
    TermId term;
    Weight weight;

    friend bool operator==(const TermWeight&, const TermWeight&) = default;
};

struct TermImpact {
    TermId term;
    Impact impact;

    friend bool operator==(const TermImpact&, const TermImpact&) = default;
};

struct QueryTerm {
    TermId term;
    std::uint32_t weight;

    friend bool operator==(const QueryTerm&, const QueryTerm&) = default;
};

/// Sparse document representation. Entries are sorted by strictly ascending
/// term and every weight is positive.
struct ImpactVector {
    std::string doc_id;
    std::vector<TermWeight> entries;

    friend bool operator==(const ImpactVector&, const ImpactVector&) = default;
};

/// Quantized counterpart of ImpactVector, the form score_doc consumes.
struct QuantizedVector {
    std::string doc_id;
    std::vector<TermImpact> entries;
};

struct WeightedQuery {
    std::string query_id;
    std::vector<QueryTerm> entries;
};

struct QuantConfig {
    std::uint32_t bits = 8;
    Weight global_max = 1.0;
    std::uint32_t query_scale = 100;

    [[nodiscard]] std::uint64_t max_level() const {
        return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
    }

    void validate() const {
        if (bits < 1 || bits > 32) {
            throw DomainError("quantization bits must be in [1, 32], got " + std::to_string(bits));
        }
        if (!(global_max > 0.0) || !std::isfinite(global_max)) {
            throw DomainError("quantization global_max must be positive and finite");
        }
        if (query_scale == 0) {
            throw DomainError("query_scale must be positive");
        }
    }

    friend bool operator==(const QuantConfig&, const QuantConfig&) = default;
};

/// Number of bytes used to store one impact at the given bit width.
[[nodiscard]] inline std::size_t impact_width(std::uint32_t bits) {
    return bits <= 8 ? 1 : bits <= 16 ? 2 : 4;
}

/// Round half away from zero, the rounding mode used everywhere.
[[nodiscard]] inline double round_half_away(double x) { return std::round(x); }

/// Linear impact quantization to [1, 2^bits - 1].
[[nodiscard]] inline Impact quantize_impact(Weight w, const QuantConfig& cfg) {
    if (!(w > 0.0) || w > cfg.global_max) {
        throw DomainError("impact weight " + std::to_string(w) + " outside (0, " +
                          std::to_string(cfg.global_max) + "]");
    }
    const double level = round_half_away(w / cfg.global_max * static_cast<double>(cfg.max_level()));
    return static_cast<Impact>(std::max(1.0, level));
}

/// Integer-scales raw query weights. Entries rounding to zero are dropped;
/// duplicate terms are merged by summing their raw weights first.
[[nodiscard]] inline WeightedQuery scale_query(std::string query_id,
                                               std::span<const std::pair<TermId, double>> raw,
                                               const QuantConfig& cfg) {
    std::vector<std::pair<TermId, double>> sorted(raw.begin(), raw.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    WeightedQuery q{std::move(query_id), {}};
    for (std::size_t i = 0; i < sorted.size();) {
        double w = 0.0;
        const TermId t = sorted[i].first;
        for (; i < sorted.size() && sorted[i].first == t; ++i) {
            w += sorted[i].second;
        }
        if (w < 0.0) {
            continue;
        }
        const double scaled = round_half_away(w * cfg.query_scale);
        if (scaled >= 1.0) {
            q.entries.push_back({t, static_cast<std::uint32_t>(scaled)});
        }
    }
    return q;
}

/// Dot product of two term-sorted sparse vectors, by linear merge.
[[nodiscard]] inline Score score_doc(std::span<const QueryTerm> q, std::span<const TermImpact> d) {
    Score s = 0;
    auto qi = q.begin();
    auto di = d.begin();
    while (qi != q.end() && di != d.end()) {
        if (qi->term < di->term) {
            ++qi;
        } else if (di->term < qi->term) {
            ++di;
        } else {
            s += static_cast<Score>(qi->weight) * di->impact;
            ++qi;
            ++di;
        }
    }
    return s;
}

[[nodiscard]] inline Score score_doc(const WeightedQuery& q, const QuantizedVector& d) {
    return score_doc(std::span<const QueryTerm>(q.entries), std::span<const TermImpact>(d.entries));
}

[[nodiscard]] inline QuantizedVector quantize_vector(const ImpactVector& v, const QuantConfig& cfg) {
    QuantizedVector out{v.doc_id, {}};
    out.entries.reserve(v.entries.size());
    for (const auto& e : v.entries) {
        out.entries.push_back({e.term, quantize_impact(e.weight, cfg)});
    }
    return out;
}

/// Checks the ImpactVector invariants (strictly ascending terms, positive weights).
inline void check_vector(const ImpactVector& v) {
    for (std::size_t i = 0; i < v.entries.size(); ++i) {
        if (!(v.entries[i].weight > 0.0)) {
            throw InvariantError("document " + v.doc_id + " has a non-positive weight");
        }
        if (i > 0 && v.entries[i - 1].term >= v.entries[i].term) {
            throw InvariantError("document " + v.doc_id + " entries not strictly ascending");
        }
    }
}

/// Pairwise (cascade) summation with a fixed split, so reductions are
/// reproducible regardless of how the caller parallelizes the producers.
[[nodiscard]] inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) {
            s += x;
        }
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace spix
