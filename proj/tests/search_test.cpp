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


#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "spix/search.hpp"
#include "spix/prune.hpp"
#include "test_support.hpp"

namespace spix {
namespace {

ImpactIndex tiny_index() {
    // Five documents over terms a, b.
    ForwardIndex fwd;
    const auto a = fwd.vocab.insert("a"), b = fwd.vocab.insert("b");
    fwd.docs.push_back({"d0", {{a, 0.2}, {b, 1.0}}});
    fwd.docs.push_back({"d1", {{a, 0.9}}});
    fwd.docs.push_back({"d2", {{b, 0.4}}});
    fwd.docs.push_back({"d3", {{a, 0.5}, {b, 0.5}}});
    fwd.docs.push_back({"d4", {}});
    return quantize_index(build_index(fwd));
}

TEST(SearchDaat, SingleTermIsListByImpact) {
    const auto index = tiny_index();
    const auto r = search_daat(index, {"q", {{0, 1}}}, 10);
    ASSERT_EQ(r.entries.size(), 3u);
    EXPECT_EQ(r.entries[0].doc, 1u);
    EXPECT_EQ(r.entries[1].doc, 3u);
    EXPECT_EQ(r.entries[2].doc, 0u);
    EXPECT_EQ(r.query_id, "q");
}

TEST(SearchDaat, EmptyAndUnknownQueries) {
    const auto index = tiny_index();
    EXPECT_TRUE(search_daat(index, {"q", {}}, 10).entries.empty());
    EXPECT_TRUE(search_daat(index, {"q", {{7, 3}, {99, 1}}}, 10).entries.empty());
    EXPECT_TRUE(search_maxscore(index, {"q", {{7, 3}}}, 10).entries.empty());
    EXPECT_THROW(search_daat(index, {"q", {{0, 1}}}, 0), UsageError);
    EXPECT_THROW(search_maxscore(index, {"q", {{0, 1}}}, 0), UsageError);
}

TEST(SearchDaat, TwoTermsMatchScoreDocOracle) {
    const auto index = tiny_index();
    const WeightedQuery q{"q", {{0, 3}, {1, 2}}};
    const auto r = search_daat(index, q, 10);
    const auto fwd = forward_of(index);
    std::vector<ScoredDoc> expect;
    for (DocNum d = 0; d < fwd.docs.size(); ++d) {
        QuantizedVector qv{fwd.docs[d].doc_id, {}};
        for (const auto& e : fwd.docs[d].entries) qv.entries.push_back({e.term, static_cast<Impact>(e.weight)});
        if (const Score s = score_doc(q, qv); s > 0) expect.push_back({d, s});
    }
    std::sort(expect.begin(), expect.end(), ranks_before);
    EXPECT_EQ(r.entries, expect);
}

TEST(TopK, StrictBoundForLaterDocs) {
    TopK top(2);
    EXPECT_TRUE(top.later_doc_could_enter(0));
    top.insert({5, 10});
    top.insert({7, 10});
    EXPECT_FALSE(top.later_doc_could_enter(10));
    EXPECT_TRUE(top.later_doc_could_enter(11));
    EXPECT_TRUE(top.would_enter({3, 10}));   // earlier doc wins the tie
    EXPECT_FALSE(top.would_enter({9, 10}));
    EXPECT_TRUE(top.insert({3, 10}));
    EXPECT_EQ(std::move(top).sorted(), (std::vector<ScoredDoc>{{3, 10}, {5, 10}}));
}

TEST(Search, ParseAlgorithm) {
    EXPECT_EQ(parse_algorithm("daat"), Algorithm::Daat);
    EXPECT_EQ(parse_algorithm("maxscore"), Algorithm::MaxScore);
    EXPECT_THROW(parse_algorithm("wand"), UsageError);
}

TEST(Search, MatchesBruteForce) {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 5; ++i) {
        const auto index =
            quantize_index(build_index(testing::random_forward({400, 60, 20, i % 2 ? 0u : 5u}, rng)));
        for (int j = 0; j < 200; ++j) {
            const auto q = testing::random_query(60, 8, rng);
            for (std::size_t k : {1u, 5u, 50u, 1000u}) {
                const auto expect = testing::brute_topk(index, q, k);
                ASSERT_EQ(search_daat(index, q, k).entries, expect);
                ASSERT_EQ(search_maxscore(index, q, k).entries, expect);
            }
        }
    }
}

TEST(Search, MaxScoreEqualsDaatOnAdversarialTies) {
    // Every list has the same maximum impact and most scores tie.
    std::mt19937_64 rng(5);
    for (int i = 0; i < 10; ++i) {
        auto index = quantize_index(build_index(testing::random_forward({300, 15, 10, 2}, rng)));
        for (int j = 0; j < 1000; ++j) {
            auto q = testing::random_query(15, 6, rng, 2);
            for (std::size_t k : {1u, 3u, 10u}) {
                ASSERT_EQ(search_maxscore(index, q, k).entries, search_daat(index, q, k).entries);
            }
        }
    }
}

TEST(Search, MaxScoreEqualsDaatAfterPruning) {
    std::mt19937_64 rng(19);
    testing::RandomCollection rc{500, 80, 25, 0, 0.3};
    const auto fwd = testing::random_forward(rc, rng);
    const auto full = quantize_index(build_index(fwd));
    const std::vector<PruneConfig> configs{TermQuantile{0.5},           DocTopK{8},     GlobalThreshold{1.0, true},
                                           TermMaxLen{30},              DualThreshold{0.5, 1.5},
                                           LengthScaledQuantile{0.3, 20}};
    for (const auto& cfg : configs) {
        const auto index = quantize_index(build_pruned(fwd, cfg));
        for (int j = 0; j < 300; ++j) {
            const auto q = testing::random_query(80, 10, rng);
            const auto daat = search_daat(index, q, 20);
            ASSERT_EQ(search_maxscore(index, q, 20).entries, daat.entries) << label(cfg);
        }
    }
    (void)full;
}

TEST(Search, PrunedScoresNeverExceedUnprunedScores) {
    // Same quantization scale on both sides so impacts are comparable.
    std::mt19937_64 rng(23);
    const auto fwd = testing::random_forward({400, 60, 20}, rng);
    const auto full_raw = build_index(fwd);
    const auto full = quantize_index(full_raw);
    for (const PruneConfig& cfg : std::vector<PruneConfig>{DocTopK{5}, TermQuantile{0.6}, GlobalThreshold{1.5}}) {
        auto raw = build_pruned(fwd, cfg);
        // Pin the scale by keeping global_max from the unpruned collection.
        ImpactIndex pruned = full.empty_like();
        for (TermId t = 0; t < raw.lists.size(); ++t) {
            for (std::size_t i = 0; i < raw.lists[t].size(); ++i) {
                pruned.lists[t].push_back(raw.lists[t].docs[i], quantize_impact(raw.lists[t].values[i], full.quant));
            }
        }
        for (int j = 0; j < 200; ++j) {
            const auto q = testing::random_query(60, 8, rng);
            const auto all = search_daat(full, q, full.num_docs());
            std::map<DocNum, Score> base;
            for (const auto& e : all.entries) base[e.doc] = e.score;
            for (const auto& e : search_maxscore(pruned, q, 50).entries) {
                ASSERT_LE(e.score, base.at(e.doc)) << label(cfg);
            }
        }
    }
}

TEST(BatchSearch, EmptyAndSingleQuery) {
    const auto index = tiny_index();
    EXPECT_TRUE(batch_search(index, {}, 10, Algorithm::MaxScore).queries.empty());
    const std::vector<WeightedQuery> one{{"q1", {{0, 2}, {1, 1}}}};
    const auto a = batch_search(index, one, 10, Algorithm::Daat);
    const auto b = batch_search(index, one, 10, Algorithm::MaxScore);
    std::ostringstream sa, sb;
    write_run(sa, a, "t");
    write_run(sb, b, "t");
    EXPECT_EQ(sa.str(), sb.str());
    // d1: 2*230, d3: 2*128+128, d0: 2*51+255, d2: 102
    ASSERT_EQ(a.queries[0].entries.size(), 4u);
    EXPECT_EQ(a.queries[0].entries[0].doc_id, "d1");
    EXPECT_EQ(a.queries[0].entries[0].score, 460.0);
    EXPECT_EQ(a.queries[0].entries[1].doc_id, "d3");
    EXPECT_EQ(a.queries[0].entries[2].doc_id, "d0");
    EXPECT_EQ(a.queries[0].entries[0].rank, 1u);
}

TEST(BatchSearch, SmallerKIsPrefix) {
    std::mt19937_64 rng(41);
    const auto index = quantize_index(build_index(testing::random_forward({2000, 100, 30}, rng)));
    std::vector<WeightedQuery> qs;
    for (int i = 0; i < 30; ++i) {
        auto q = testing::random_query(100, 8, rng);
        q.query_id = "q" + std::to_string(i);
        qs.push_back(q);
    }
    const auto small = batch_search(index, qs, 10, Algorithm::MaxScore);
    const auto large = batch_search(index, qs, 1000, Algorithm::MaxScore);
    for (std::size_t i = 0; i < qs.size(); ++i) {
        const auto& s = small.queries[i].entries;
        const auto& l = large.queries[i].entries;
        ASSERT_LE(s.size(), 10u);
        ASSERT_TRUE(std::equal(s.begin(), s.end(), l.begin()));
    }
}

TEST(BatchSearch, ThreadCountDoesNotChangeOutput) {
    std::mt19937_64 rng(43);
    const auto index = quantize_index(build_index(testing::random_forward({1000, 80, 25}, rng)));
    std::vector<WeightedQuery> qs;
    for (int i = 0; i < 64; ++i) {
        auto q = testing::random_query(80, 8, rng);
        q.query_id = "q" + std::to_string(i);
        qs.push_back(q);
    }
    std::ostringstream one;
    write_run(one, batch_search(index, qs, 100, Algorithm::MaxScore, 1), "t");
    for (unsigned threads : {2u, 4u, 8u}) {
        std::ostringstream many;
        write_run(many, batch_search(index, qs, 100, Algorithm::MaxScore, threads), "t");
        EXPECT_EQ(many.str(), one.str()) << threads;
    }
}

}  // namespace
}  // namespace spix
