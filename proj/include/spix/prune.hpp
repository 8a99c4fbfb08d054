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
#include <cstdio>
#include <numeric>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spix/index.hpp"

// Static pruning. Forward-index strategies (doc top-k, dual threshold) run
// before inversion; list strategies run on the raw inverted index. Every
// strategy only removes postings, except GlobalThreshold with shift, which
// also lowers the surviving weights.

namespace spix {

struct Unpruned {};
/// Per list, drop postings at or below the nearest-rank q-quantile.
struct TermQuantile {
    double q;
};
/// Per document, keep the k highest-weight terms.
struct DocTopK {
    std::size_t k;
};
/// Drop every posting with weight below t; optionally subtract t from survivors.
struct GlobalThreshold {
    double t;
    bool shift = false;
};
/// Per list, keep the max_len highest-weight postings.
struct TermMaxLen {
    std::size_t max_len;
};
/// Keep an entry iff its weight reaches the threshold of its kind
/// (original or expansion term).
struct DualThreshold {
    double t_orig;
    double t_exp;
};
/// TermQuantile whose quantile grows with list length beyond `pivot`.
struct LengthScaledQuantile {
    double q_base;
    std::size_t pivot;
};

using PruneConfig =
    std::variant<Unpruned, TermQuantile, DocTopK, GlobalThreshold, TermMaxLen, DualThreshold, LengthScaledQuantile>;

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline std::string fmt_param(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline void check_fraction(double q, const char* name) {
    if (!(q >= 0.0 && q < 1.0)) {
        throw UsageError(std::string(name) + " must be in [0, 1), got " + std::to_string(q));
    }
}

}  // namespace detail

inline void validate(const PruneConfig& cfg) {
    std::visit(detail::overloaded{
                   [](const Unpruned&) {},
                   [](const TermQuantile& c) { detail::check_fraction(c.q, "quantile"); },
                   [](const DocTopK& c) {
                       if (c.k < 1) throw UsageError("doc top-k requires k >= 1");
                   },
                   [](const GlobalThreshold& c) {
                       if (!(c.t >= 0.0) || !std::isfinite(c.t)) throw UsageError("threshold must be finite and >= 0");
                   },
                   [](const TermMaxLen& c) {
                       if (c.max_len < 1) throw UsageError("maximum list length must be >= 1");
                   },
                   [](const DualThreshold& c) {
                       if (std::isnan(c.t_orig) || std::isnan(c.t_exp)) throw UsageError("thresholds must not be NaN");
                   },
                   [](const LengthScaledQuantile& c) {
                       detail::check_fraction(c.q_base, "base quantile");
                       if (c.pivot < 1) throw UsageError("pivot must be >= 1");
                   },
               },
               cfg);
}

/// Short human-readable name used in sweep tables.
inline std::string label(const PruneConfig& cfg) {
    return std::visit(
        detail::overloaded{
            [](const Unpruned&) -> std::string { return "baseline"; },
            [](const TermQuantile& c) { return "T-" + detail::fmt_param(c.q); },
            [](const DocTopK& c) { return "D-" + std::to_string(c.k); },
            [](const GlobalThreshold& c) {
                return "A<" + detail::fmt_param(c.t) + (c.shift ? "-shift" : "");
            },
            [](const TermMaxLen& c) { return "L-" + std::to_string(c.max_len); },
            [](const DualThreshold& c) {
                return "dual-" + detail::fmt_param(c.t_orig) + "/" + detail::fmt_param(c.t_exp);
            },
            [](const LengthScaledQuantile& c) {
                return "TS-" + detail::fmt_param(c.q_base) + "/" + std::to_string(c.pivot);
            },
        },
        cfg);
}

/// Builds a config from a method name and its numeric parameters:
/// term-quantile q | doc-topk k | global-threshold t | term-maxlen L |
/// dual-threshold t_orig t_exp | length-scaled q_base pivot | baseline.
inline PruneConfig make_prune_config(std::string_view method, const std::vector<double>& params, bool shift = false) {
    auto need = [&](std::size_t n) {
        if (params.size() != n) {
            throw UsageError("method " + std::string(method) + " takes " + std::to_string(n) + " parameter(s), got " +
                             std::to_string(params.size()));
        }
    };
    auto count = [&](double v) -> std::size_t {
        if (!(v >= 1.0) || v != std::floor(v) || v > 1e12) {
            throw UsageError("method " + std::string(method) + " needs a positive integer parameter");
        }
        return static_cast<std::size_t>(v);
    };
    if (shift && method != "global-threshold") {
        throw UsageError("--shift only applies to global-threshold");
    }
    PruneConfig cfg;
    if (method == "baseline" || method == "none") {
        need(0);
        cfg = Unpruned{};
    } else if (method == "term-quantile") {
        need(1);
        cfg = TermQuantile{params[0]};
    } else if (method == "doc-topk") {
        need(1);
        cfg = DocTopK{count(params[0])};
    } else if (method == "global-threshold") {
        need(1);
        cfg = GlobalThreshold{params[0], shift};
    } else if (method == "term-maxlen") {
        need(1);
        cfg = TermMaxLen{count(params[0])};
    } else if (method == "dual-threshold") {
        need(2);
        cfg = DualThreshold{params[0], params[1]};
    } else if (method == "length-scaled") {
        need(2);
        cfg = LengthScaledQuantile{params[0], count(params[1])};
    } else {
        throw UsageError("unknown pruning method \"" + std::string(method) + "\"");
    }
    validate(cfg);
    return cfg;
}

[[nodiscard]] inline bool acts_on_forward(const PruneConfig& cfg) {
    return std::holds_alternative<DocTopK>(cfg) || std::holds_alternative<DualThreshold>(cfg);
}

/// 1-based nearest rank ceil(q * n). Products within a relative 1e-9 above an
/// integer are treated as that integer, so q = 0.1, n = 30 gives 3.
[[nodiscard]] inline std::size_t nearest_rank(double q, std::size_t n) {
    const double x = q * static_cast<double>(n);
    double r = std::ceil(x);
    if (r - x > 1.0 - 1e-9 * std::max(1.0, x)) {
        r -= 1.0;
    }
    return static_cast<std::size_t>(std::max(0.0, r));
}

namespace detail {

inline void quantile_prune_list(RawPostingList& list, double q) {
    const std::size_t rank = nearest_rank(q, list.size());
    if (rank == 0 || list.empty()) {
        return;
    }
    std::vector<Weight> sorted = list.values;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
    const Weight threshold = sorted[rank - 1];
    RawPostingList kept;
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (list.values[i] > threshold) {
            kept.push_back(list.docs[i], list.values[i]);
        }
    }
    list = std::move(kept);
}

}  // namespace detail

inline RawIndex prune_term_quantile(const RawIndex& index, double q) {
    validate(TermQuantile{q});
    RawIndex out = index;
    for (auto& l : out.lists) {
        detail::quantile_prune_list(l, q);
    }
    return out;
}

inline RawIndex prune_length_scaled_quantile(const RawIndex& index, double q_base, std::size_t pivot) {
    validate(LengthScaledQuantile{q_base, pivot});
    RawIndex out = index;
    for (auto& l : out.lists) {
        if (l.size() > pivot) {
            const double q = std::min(0.99, q_base * static_cast<double>(l.size()) / static_cast<double>(pivot));
            detail::quantile_prune_list(l, q);
        }
    }
    return out;
}

inline RawIndex prune_global_threshold(const RawIndex& index, double t, bool shift) {
    validate(GlobalThreshold{t, shift});
    RawIndex out = index.empty_like();
    for (std::size_t term = 0; term < index.lists.size(); ++term) {
        const auto& src = index.lists[term];
        auto& dst = out.lists[term];
        for (std::size_t i = 0; i < src.size(); ++i) {
            const Weight w = src.values[i];
            if (w < t) {
                continue;
            }
            const Weight kept = shift ? w - t : w;
            if (kept > 0.0) {
                dst.push_back(src.docs[i], kept);
            }
        }
    }
    return out;
}

inline RawIndex prune_term_maxlen(const RawIndex& index, std::size_t max_len) {
    validate(TermMaxLen{max_len});
    RawIndex out = index;
    for (auto& l : out.lists) {
        if (l.size() <= max_len) {
            continue;
        }
        std::vector<std::size_t> order(l.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(max_len), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (l.values[a] != l.values[b]) {
                                  return l.values[a] > l.values[b];
                              }
                              return l.docs[a] < l.docs[b];
                          });
        order.resize(max_len);
        std::sort(order.begin(), order.end());
        RawPostingList kept;
        for (std::size_t i : order) {
            kept.push_back(l.docs[i], l.values[i]);
        }
        l = std::move(kept);
    }
    return out;
}

inline ForwardIndex prune_doc_topk(const ForwardIndex& fwd, std::size_t k) {
    validate(DocTopK{k});
    ForwardIndex out = fwd;
    for (auto& doc : out.docs) {
        if (doc.entries.size() <= k) {
            continue;
        }
        auto& e = doc.entries;
        std::partial_sort(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(k), e.end(),
                          [](const TermWeight& a, const TermWeight& b) {
                              if (a.weight != b.weight) {
                                  return a.weight > b.weight;
                              }
                              return a.term < b.term;
                          });
        e.resize(k);
        std::sort(e.begin(), e.end(), [](const TermWeight& a, const TermWeight& b) { return a.term < b.term; });
    }
    return out;
}

inline ForwardIndex prune_dual_threshold(const ForwardIndex& fwd, double t_orig, double t_exp) {
    validate(DualThreshold{t_orig, t_exp});
    if (!fwd.expanded) {
        throw UsageError("dual-threshold pruning needs expansion flags; supply the expansion sidecar "
                         "({\"id\": ..., \"expanded\": [...]} per document)");
    }
    ForwardIndex out = fwd;
    for (std::size_t d = 0; d < out.docs.size(); ++d) {
        auto& e = out.docs[d].entries;
        std::erase_if(e, [&](const TermWeight& tw) {
            const double t = fwd.is_expanded(d, tw.term) ? t_exp : t_orig;
            return !(tw.weight >= t);
        });
    }
    return out;
}

/// Builds the raw index for `cfg`: forward strategies prune then invert,
/// list strategies invert then prune.
inline RawIndex build_pruned(const ForwardIndex& fwd, const PruneConfig& cfg, const QuantConfig& quant = {}) {
    validate(cfg);
    return std::visit(
        detail::overloaded{
            [&](const Unpruned&) { return build_index(fwd, quant); },
            [&](const DocTopK& c) { return build_index(prune_doc_topk(fwd, c.k), quant); },
            [&](const DualThreshold& c) { return build_index(prune_dual_threshold(fwd, c.t_orig, c.t_exp), quant); },
            [&](const TermQuantile& c) { return prune_term_quantile(build_index(fwd, quant), c.q); },
            [&](const GlobalThreshold& c) { return prune_global_threshold(build_index(fwd, quant), c.t, c.shift); },
            [&](const TermMaxLen& c) { return prune_term_maxlen(build_index(fwd, quant), c.max_len); },
            [&](const LengthScaledQuantile& c) {
                return prune_length_scaled_quantile(build_index(fwd, quant), c.q_base, c.pivot);
            },
        },
        cfg);
}

}  // namespace spix
