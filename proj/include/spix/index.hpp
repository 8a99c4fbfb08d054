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
#include <string>
#include <type_traits>
#include <unordered_set>
#include <vector>

#include "spix/core.hpp"
#include "spix/ingest.hpp"

namespace spix {

/// Postings of one term: strictly ascending doc numbers with parallel values.
/// Value is Weight before quantization and Impact after.
template <class Value>
struct PostingList {
    std::vector<DocNum> docs;
    std::vector<Value> values;
    /// Maximum of `values`; zero for an empty list.
    Value max_value{};

    [[nodiscard]] std::size_t size() const { return docs.size(); }
    [[nodiscard]] bool empty() const { return docs.empty(); }

    void push_back(DocNum doc, Value v) {
        docs.push_back(doc);
        values.push_back(v);
        max_value = std::max(max_value, v);
    }

    void recompute_max() {
        max_value = values.empty() ? Value{} : *std::max_element(values.begin(), values.end());
    }

    friend bool operator==(const PostingList&, const PostingList&) = default;
};

/// Term-partitioned index with one posting list per vocabulary entry.
template <class Value>
struct InvertedIndex {
    static constexpr bool quantized = std::is_integral_v<Value>;

    VocabMap vocab;
    std::vector<std::string> doc_ids;
    std::vector<PostingList<Value>> lists;
    QuantConfig quant;

    [[nodiscard]] std::size_t num_docs() const { return doc_ids.size(); }
    [[nodiscard]] std::size_t num_terms() const { return lists.size(); }

    [[nodiscard]] std::size_t num_postings() const {
        std::size_t n = 0;
        for (const auto& l : lists) {
            n += l.size();
        }
        return n;
    }

    [[nodiscard]] const PostingList<Value>* list(TermId t) const {
        return t < lists.size() ? &lists[t] : nullptr;
    }

    /// Copy of everything except the postings, with empty lists.
    [[nodiscard]] InvertedIndex empty_like() const {
        InvertedIndex out;
        out.vocab = vocab;
        out.doc_ids = doc_ids;
        out.quant = quant;
        out.lists.resize(lists.size());
        return out;
    }

    friend bool operator==(const InvertedIndex&, const InvertedIndex&) = default;
};

using RawPostingList = PostingList<Weight>;
using ImpactPostingList = PostingList<Impact>;
using RawIndex = InvertedIndex<Weight>;
using ImpactIndex = InvertedIndex<Impact>;

/// Inverts a forward index. Doc numbers follow input order.
inline RawIndex build_index(const ForwardIndex& fwd, const QuantConfig& cfg = {}) {
    RawIndex index;
    index.vocab = fwd.vocab;
    index.quant = cfg;
    index.lists.resize(fwd.vocab.size());
    index.doc_ids.reserve(fwd.docs.size());
    std::unordered_set<std::string> seen;
    seen.reserve(fwd.docs.size());
    for (std::size_t d = 0; d < fwd.docs.size(); ++d) {
        const auto& doc = fwd.docs[d];
        if (!seen.insert(doc.doc_id).second) {
            throw DataError("duplicate document id \"" + doc.doc_id + "\"");
        }
        check_vector(doc);
        index.doc_ids.push_back(doc.doc_id);
        for (const auto& e : doc.entries) {
            if (e.term >= index.lists.size()) {
                throw DataError("document " + doc.doc_id + " references a term outside the vocabulary");
            }
            index.lists[e.term].push_back(static_cast<DocNum>(d), e.weight);
        }
    }
    return index;
}

/// Reconstructs per-document vectors from the posting lists.
template <class Value>
ForwardIndex forward_of(const InvertedIndex<Value>& index) {
    ForwardIndex fwd;
    fwd.vocab = index.vocab;
    fwd.docs.resize(index.num_docs());
    for (std::size_t d = 0; d < index.num_docs(); ++d) {
        fwd.docs[d].doc_id = index.doc_ids[d];
    }
    for (TermId t = 0; t < index.lists.size(); ++t) {
        const auto& l = index.lists[t];
        for (std::size_t i = 0; i < l.size(); ++i) {
            fwd.docs[l.docs[i]].entries.push_back({t, static_cast<Weight>(l.values[i])});
        }
    }
    return fwd;
}

/// Maps every raw weight through quantize_impact. global_max is taken from
/// the collection; an empty index keeps the configured value.
inline ImpactIndex quantize_index(const RawIndex& raw) {
    ImpactIndex out;
    out.vocab = raw.vocab;
    out.doc_ids = raw.doc_ids;
    out.quant = raw.quant;
    Weight gmax = 0.0;
    for (const auto& l : raw.lists) {
        gmax = std::max(gmax, l.max_value);
    }
    if (gmax > 0.0) {
        out.quant.global_max = gmax;
    }
    out.quant.validate();
    out.lists.resize(raw.lists.size());
    for (std::size_t t = 0; t < raw.lists.size(); ++t) {
        const auto& src = raw.lists[t];
        auto& dst = out.lists[t];
        dst.docs = src.docs;
        dst.values.reserve(src.size());
        for (Weight w : src.values) {
            dst.values.push_back(quantize_impact(w, out.quant));
        }
        dst.recompute_max();
    }
    return out;
}

/// Throws InvariantError if any structural invariant of the index is broken.
template <class Value>
void check_invariants(const InvertedIndex<Value>& index) {
    if (index.lists.size() != index.vocab.size()) {
        throw InvariantError("posting list count differs from vocabulary size");
    }
    for (std::size_t t = 0; t < index.lists.size(); ++t) {
        const auto& l = index.lists[t];
        const std::string where = "list of term \"" + index.vocab.term(static_cast<TermId>(t)) + "\": ";
        if (l.docs.size() != l.values.size()) {
            throw InvariantError(where + "parallel arrays differ in length");
        }
        Value mx{};
        for (std::size_t i = 0; i < l.size(); ++i) {
            if (l.docs[i] >= index.num_docs()) {
                throw InvariantError(where + "doc number out of range");
            }
            if (i > 0 && l.docs[i - 1] >= l.docs[i]) {
                throw InvariantError(where + "doc numbers not strictly ascending");
            }
            if (!(l.values[i] > Value{})) {
                throw InvariantError(where + "non-positive stored value");
            }
            mx = std::max(mx, l.values[i]);
        }
        if (mx != l.max_value) {
            throw InvariantError(where + "stale max_value");
        }
    }
}

}  // namespace spix
