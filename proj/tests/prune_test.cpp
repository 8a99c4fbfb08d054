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


#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "spix/index_io.hpp"
#include "spix/prune.hpp"
#include "test_support.hpp"

namespace spix {
namespace {

using testing::PostingSet;
using testing::posting_set;
using testing::oracle_doc_topk;
using testing::oracle_dual;
using testing::oracle_global;
using testing::oracle_maxlen;
using testing::oracle_quantile;

RawIndex single_list(const std::vector<double>& weights) {
    ForwardIndex fwd;
    const TermId t = fwd.vocab.insert("t");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        fwd.docs.push_back({"d" + std::to_string(i), {{t, weights[i]}}});
    }
    return build_index(fwd);
}

std::vector<double> values_of(const RawIndex& index, TermId t = 0) { return index.lists[t].values; }

TEST(TermQuantile, MedianOfEight) {
    const auto out = prune_term_quantile(single_list({3, 8, 1, 6, 2, 7, 4, 5}), 0.5);
    auto v = values_of(out);
    std::sort(v.begin(), v.end());
    EXPECT_EQ(v, (std::vector<double>{5, 6, 7, 8}));
    check_invariants(out);
}

TEST(TermQuantile, ZeroIsIdentity) {
    const auto in = single_list({3, 8, 1, 6});
    EXPECT_EQ(prune_term_quantile(in, 0.0), in);
}

TEST(TermQuantile, AllEqualEmptiesList) {
    EXPECT_TRUE(prune_term_quantile(single_list({2, 2, 2, 2}), 0.5).lists[0].empty());
}

TEST(TermQuantile, RejectsBadFraction) {
    const auto in = single_list({1});
    EXPECT_THROW(prune_term_quantile(in, 1.0), UsageError);
    EXPECT_THROW(prune_term_quantile(in, -0.1), UsageError);
    EXPECT_THROW(prune_term_quantile(in, std::nan("")), UsageError);
}

TEST(NearestRank, ExactProductsDoNotRoundUp) {
    EXPECT_EQ(nearest_rank(0.5, 8), 4u);
    EXPECT_EQ(nearest_rank(0.1, 30), 3u);  // 0.1 * 30 = 3.0000000000000004
    EXPECT_EQ(nearest_rank(0.7, 10), 7u);
    EXPECT_EQ(nearest_rank(0.5, 7), 4u);
    EXPECT_EQ(nearest_rank(0.0, 7), 0u);
    EXPECT_EQ(nearest_rank(0.01, 1), 1u);
    for (std::size_t n = 1; n <= 200; ++n) {
        for (std::size_t num = 0; num < 100; ++num) {
            ASSERT_EQ(nearest_rank(static_cast<double>(num) / 100.0, n), testing::rank_of(num, 100, n))
                << num << "/100 n=" << n;
        }
    }
}

TEST(TermQuantile, DistinctImpactsLeaveExactCount) {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<std::size_t> len(1, 120);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = len(rng);
        std::vector<double> w(n);
        std::iota(w.begin(), w.end(), 1.0);
        std::shuffle(w.begin(), w.end(), rng);
        for (std::size_t num : {5u, 10u, 25u, 33u, 50u, 75u, 80u, 85u, 99u}) {
            const auto out = prune_term_quantile(single_list(w), static_cast<double>(num) / 100.0);
            ASSERT_EQ(out.lists[0].size(), n - testing::rank_of(num, 100, n)) << "n=" << n << " q=" << num;
        }
    }
}

TEST(DocTopK, KeepsHighest) {
    ForwardIndex fwd;
    const auto a = fwd.vocab.insert("a"), b = fwd.vocab.insert("b"), c = fwd.vocab.insert("c");
    fwd.docs.push_back({"d", {{a, 3}, {b, 1}, {c, 2}}});
    const auto out = prune_doc_topk(fwd, 2);
    EXPECT_EQ(out.docs[0].entries, (std::vector<TermWeight>{{a, 3}, {c, 2}}));
    EXPECT_EQ(prune_doc_topk(fwd, 3).docs[0], fwd.docs[0]);
    EXPECT_EQ(prune_doc_topk(fwd, 10).docs[0], fwd.docs[0]);
}

TEST(DocTopK, TiesKeepLowestTermIds) {
    ForwardIndex fwd;
    const auto a = fwd.vocab.insert("a"), b = fwd.vocab.insert("b"), c = fwd.vocab.insert("c");
    fwd.docs.push_back({"d", {{a, 2}, {b, 2}, {c, 2}}});
    EXPECT_EQ(prune_doc_topk(fwd, 2).docs[0].entries, (std::vector<TermWeight>{{a, 2}, {b, 2}}));
    EXPECT_THROW(prune_doc_topk(fwd, 0), UsageError);
}

TEST(GlobalThreshold, StrictFilterAndShift) {
    const auto in = single_list({0.5, 0.7});
    EXPECT_EQ(values_of(prune_global_threshold(in, 0.6, false)), (std::vector<double>{0.7}));
    const auto shifted = values_of(prune_global_threshold(in, 0.6, true));
    ASSERT_EQ(shifted.size(), 1u);
    EXPECT_NEAR(shifted[0], 0.1, 1e-12);
    EXPECT_EQ(prune_global_threshold(in, 0.0, false), in);
    // Equal to t survives the strict filter; with shift it becomes 0 and is removed.
    EXPECT_EQ(values_of(prune_global_threshold(in, 0.5, false)).size(), 2u);
    EXPECT_EQ(values_of(prune_global_threshold(in, 0.5, true)).size(), 1u);
    EXPECT_THROW(prune_global_threshold(in, -1.0, false), UsageError);
}

TEST(TermMaxLen, KeepsHighestWithDocTieBreak) {
    const auto out = prune_term_maxlen(single_list({0.3, 0.9, 0.1, 0.8, 0.2}), 2);
    EXPECT_EQ(out.lists[0].docs, (std::vector<DocNum>{1, 3}));
    const auto in = single_list({1, 1, 1, 1});
    EXPECT_EQ(prune_term_maxlen(in, 1).lists[0].docs, (std::vector<DocNum>{0}));
    EXPECT_EQ(prune_term_maxlen(in, 4), in);
    EXPECT_EQ(prune_term_maxlen(in, 9), in);
}

ForwardIndex mixed_doc() {
    ForwardIndex fwd;
    const auto a = fwd.vocab.insert("a"), b = fwd.vocab.insert("b"), c = fwd.vocab.insert("c"),
               d = fwd.vocab.insert("d");
    fwd.docs.push_back({"x", {{a, 0.1}, {b, 0.3}, {c, 0.5}, {d, 0.9}}});
    fwd.expanded = std::vector<std::vector<TermId>>{{c, d}};
    return fwd;
}

TEST(DualThreshold, PerFlagFiltering) {
    const auto out = prune_dual_threshold(mixed_doc(), 0.2, 0.6);
    EXPECT_EQ(out.docs[0].entries, (std::vector<TermWeight>{{1, 0.3}, {3, 0.9}}));
}

TEST(DualThreshold, LimitingCases) {
    const auto fwd = mixed_doc();
    const auto orig_only = prune_dual_threshold(fwd, 0.0, std::numeric_limits<double>::infinity());
    EXPECT_EQ(orig_only.docs[0].entries, (std::vector<TermWeight>{{0, 0.1}, {1, 0.3}}));
    for (double t : {0.0, 0.3, 0.55, 2.0}) {
        EXPECT_EQ(posting_set(build_index(prune_dual_threshold(fwd, t, t))),
                  posting_set(prune_global_threshold(build_index(fwd), t, false)));
    }
}

TEST(DualThreshold, RequiresSidecar) {
    auto fwd = mixed_doc();
    fwd.expanded.reset();
    try {
        (void)prune_dual_threshold(fwd, 0.1, 0.2);
        FAIL();
    } catch (const UsageError& e) {
        EXPECT_NE(std::string(e.what()).find("expansion sidecar"), std::string::npos);
    }
}

TEST(LengthScaled, ShortListsUntouchedAndScaledQuantile) {
    const auto short_list = single_list({1, 2, 3, 4});
    EXPECT_EQ(prune_length_scaled_quantile(short_list, 0.4, 4), short_list);
    EXPECT_EQ(prune_length_scaled_quantile(short_list, 0.0, 1), short_list);

    std::vector<double> w(20);
    std::iota(w.begin(), w.end(), 1.0);
    const auto list = single_list(w);
    EXPECT_EQ(prune_length_scaled_quantile(list, 0.4, 10), prune_term_quantile(list, 0.8));
    EXPECT_EQ(prune_length_scaled_quantile(list, 0.4, 10).lists[0].size(), 4u);
    EXPECT_THROW(prune_length_scaled_quantile(list, 0.4, 0), UsageError);
}

TEST(PruneConfig, LabelsAndFactory) {
    EXPECT_EQ(label(make_prune_config("baseline", {})), "baseline");
    EXPECT_EQ(label(make_prune_config("term-quantile", {0.5})), "T-0.50");
    EXPECT_EQ(label(make_prune_config("doc-topk", {64})), "D-64");
    EXPECT_EQ(label(make_prune_config("global-threshold", {0.6})), "A<0.60");
    EXPECT_EQ(label(make_prune_config("global-threshold", {0.6}, true)), "A<0.60-shift");
    EXPECT_EQ(label(make_prune_config("term-maxlen", {100})), "L-100");
    EXPECT_EQ(label(make_prune_config("dual-threshold", {0.2, 0.6})), "dual-0.20/0.60");
    EXPECT_EQ(label(make_prune_config("length-scaled", {0.4, 50})), "TS-0.40/50");
    EXPECT_THROW(make_prune_config("doc-topk", {}), UsageError);
    EXPECT_THROW(make_prune_config("doc-topk", {2.5}), UsageError);
    EXPECT_THROW(make_prune_config("doc-topk", {0}), UsageError);
    EXPECT_THROW(make_prune_config("term-quantile", {1.5}), UsageError);
    EXPECT_THROW(make_prune_config("doc-topk", {4}, true), UsageError);
    EXPECT_THROW(make_prune_config("magic", {1}), UsageError);
    EXPECT_TRUE(acts_on_forward(DocTopK{3}));
    EXPECT_FALSE(acts_on_forward(TermQuantile{0.5}));
}

class PruneProperties : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PruneProperties, BruteForceFiltersAndContainment) {
    std::mt19937_64 rng(1000 + GetParam());
    testing::RandomCollection rc{1000, 150, 30, GetParam() % 2 == 0 ? 12u : 0u, 0.3};
    const auto fwd = testing::random_forward(rc, rng);
    const auto raw = build_index(fwd);
    const auto all = posting_set(raw);

    auto check = [&](const PruneConfig& cfg, const PostingSet& expect) {
        const auto pruned = build_pruned(fwd, cfg);
        check_invariants(pruned);
        const auto got = posting_set(pruned);
        ASSERT_EQ(got, expect) << label(cfg);
        const bool shifted = std::holds_alternative<GlobalThreshold>(cfg) && std::get<GlobalThreshold>(cfg).shift;
        for (const auto& [key, w] : got) {
            auto it = all.find(key);
            ASSERT_NE(it, all.end()) << label(cfg);
            if (!shifted) {
                ASSERT_EQ(w, it->second) << label(cfg);
            }
        }
        ASSERT_LE(index_stats(pruned).serialized_bytes, index_stats(raw).serialized_bytes);
    };

    for (double q : {0.0, 0.1, 0.25, 0.5, 0.75, 0.8, 0.85, 0.95}) check(TermQuantile{q}, oracle_quantile(all, q));
    for (std::size_t k : {1u, 4u, 8u, 16u, 32u, 64u}) {
        check(DocTopK{k}, oracle_doc_topk(all, k));
        const auto fk = prune_doc_topk(fwd, k);
        for (const auto& d : fk.docs) ASSERT_LE(d.entries.size(), k);
    }
    for (double t : {0.0, 0.5, 0.75, 1.0, 1.25, 2.0}) {
        check(GlobalThreshold{t, false}, oracle_global(all, t, false));
        check(GlobalThreshold{t, true}, oracle_global(all, t, true));
    }
    for (std::size_t len : {1u, 5u, 20u, 50u, 1000u}) {
        check(TermMaxLen{len}, oracle_maxlen(all, len));
        for (const auto& l : build_pruned(fwd, TermMaxLen{len}).lists) ASSERT_LE(l.size(), len);
    }
    for (auto [a, b] : {std::pair{0.2, 0.6}, std::pair{0.0, 10.0}, std::pair{1.0, 0.5}}) {
        check(DualThreshold{a, b}, oracle_dual(fwd, a, b));
    }
    for (auto [qb, pivot] : {std::pair{0.2, 10u}, std::pair{0.4, 30u}, std::pair{0.0, 5u}}) {
        check(LengthScaledQuantile{qb, pivot}, oracle_quantile(all, 0.0, pivot, qb));
    }
    check(Unpruned{}, all);
}

TEST_P(PruneProperties, DocTopKCommutesWithInversion) {
    std::mt19937_64 rng(2000 + GetParam());
    const auto fwd = testing::random_forward({1000, 150, 30, GetParam() % 2 == 0 ? 8u : 0u}, rng);
    for (std::size_t k : {2u, 7u, 20u}) {
        // Select per document on the inverted lists instead of the vectors.
        const auto index = build_index(fwd);
        std::vector<std::vector<std::pair<double, TermId>>> per_doc(index.num_docs());
        for (TermId t = 0; t < index.lists.size(); ++t) {
            for (std::size_t i = 0; i < index.lists[t].size(); ++i) {
                per_doc[index.lists[t].docs[i]].push_back({-index.lists[t].values[i], t});
            }
        }
        PostingSet expect;
        for (DocNum d = 0; d < per_doc.size(); ++d) {
            auto& v = per_doc[d];
            std::sort(v.begin(), v.end());
            for (std::size_t i = 0; i < std::min(k, v.size()); ++i) expect[{v[i].second, d}] = -v[i].first;
        }
        EXPECT_EQ(posting_set(build_index(prune_doc_topk(fwd, k))), expect);
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, PruneProperties, ::testing::Range<std::size_t>(0, 4));

}  // namespace
}  // namespace spix
