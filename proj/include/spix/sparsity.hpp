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
#include <concepts>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "spix/core.hpp"
#include "spix/ingest.hpp"

// Sparsity-regularizer diagnostics over a batch of document score vectors.
// Rows are documents (batch size B), columns vocabulary entries (V).
// Logarithms are natural; probabilities are clamped to [1e-12, 1 - 1e-12]
// before any log is taken.

namespace spix {

inline constexpr double kProbEpsilon = 1e-12;

/// Dense B x V non-negative matrix, row-major.
class BatchMatrix {
public:
    BatchMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {
        if (rows == 0 || cols == 0) {
            throw DataError("batch matrix needs at least one row and one column");
        }
    }

    BatchMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (rows == 0 || cols == 0) {
            throw DataError("batch matrix needs at least one row and one column");
        }
        if (values_.size() != rows * cols) {
            throw DataError("batch matrix data has the wrong size");
        }
        for (double v : values_) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw DataError("batch matrix entries must be finite and non-negative");
            }
        }
    }

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }
    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    void set(std::size_t r, std::size_t c, double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw DataError("batch matrix entries must be finite and non-negative");
        }
        values_[r * cols_ + c] = v;
    }

    /// Column c as a contiguous copy.
    [[nodiscard]] std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            out[r] = (*this)(r, c);
        }
        return out;
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> values_;
};

/// Column-compressed batch holding only the non-zero entries. Every
/// diagnostic below is a sum of terms that vanish at x = 0, so it yields the
/// same values as the dense form without materializing B x V cells.
class SparseBatchMatrix {
public:
    SparseBatchMatrix(std::size_t rows, std::size_t cols) : rows_(rows), columns_(cols) {
        if (rows == 0 || cols == 0) {
            throw DataError("batch matrix needs at least one row and one column");
        }
    }

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return columns_.size(); }

    /// Appends a non-zero entry; callers add each (row, col) at most once.
    void add(std::size_t col, double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw DataError("batch matrix entries must be finite and non-negative");
        }
        if (v > 0.0) {
            columns_.at(col).push_back(v);
        }
    }

    /// Non-zero entries of column c in row order.
    [[nodiscard]] const std::vector<double>& column(std::size_t c) const { return columns_[c]; }

private:
    std::size_t rows_;
    std::vector<std::vector<double>> columns_;
};

/// Rows = documents in file order, columns = vocabulary ids.
inline SparseBatchMatrix to_batch_matrix(const ForwardIndex& fwd) {
    SparseBatchMatrix m(fwd.docs.size(), fwd.vocab.size());
    for (const auto& doc : fwd.docs) {
        for (const auto& e : doc.entries) {
            m.add(e.term, e.weight);
        }
    }
    return m;
}

/// Anything exposing rows(), cols() and column(c) as a range of doubles whose
/// omitted entries are zero.
template <class M>
concept Batch = requires(const M& m, std::size_t c) {
    { m.rows() } -> std::convertible_to<std::size_t>;
    { m.cols() } -> std::convertible_to<std::size_t>;
    { m.column(c) };
};

struct SparsityConfig {
    double tau = 1.0;
    std::size_t k_target = 64;
    double p_target = 0.01;

    void validate() const {
        if (!(tau > 0.0)) throw UsageError("tau must be positive");
        if (k_target < 1) throw UsageError("k_target must be positive");
        if (!(p_target > 0.0 && p_target < 1.0)) throw UsageError("p_target must be in (0, 1)");
    }
};

/// Per-column activation estimate.
enum class ProfileForm {
    /// sum_i (x_ij / B)^2
    SumOfSquares,
    /// (sum_i x_ij / B)^2, the usual FLOPS regularizer term
    SquareOfMean,
};

struct ActivationProfile {
    std::vector<double> p;
    /// Sum of p over all columns.
    double flops_estimate = 0.0;
};

template <Batch M>
ActivationProfile activation_profile(const M& m, ProfileForm form = ProfileForm::SumOfSquares) {
    const double b = static_cast<double>(m.rows());
    ActivationProfile out;
    out.p.resize(m.cols());
    std::vector<double> terms;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        terms.clear();
        for (double v : m.column(j)) {
            const double x = v / b;
            terms.push_back(form == ProfileForm::SumOfSquares ? x * x : x);
        }
        const double s = pairwise_sum(terms);
        out.p[j] = form == ProfileForm::SumOfSquares ? s : s * s;
    }
    out.flops_estimate = pairwise_sum(out.p);
    return out;
}

enum class MseForm {
    /// sum_j |p_hat^2 - p_j| / V
    Literal,
    /// sum_j (p_hat - p_j)^2 / V
    Squared,
};

/// Target-probability loss from an activation profile, p_hat = k_target / V.
inline double target_mse_from_profile(std::span<const double> p, std::size_t k_target,
                                      MseForm form = MseForm::Literal) {
    if (p.empty()) {
        throw DataError("empty activation profile");
    }
    const double v = static_cast<double>(p.size());
    const double p_hat = static_cast<double>(k_target) / v;
    std::vector<double> err(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        err[j] = form == MseForm::Literal ? std::fabs(p_hat * p_hat - p[j]) : (p_hat - p[j]) * (p_hat - p[j]);
    }
    return pairwise_sum(err) / v;
}

template <Batch M>
double target_mse_loss(const M& m, const SparsityConfig& cfg, MseForm form = MseForm::Literal,
                              ProfileForm profile = ProfileForm::SumOfSquares) {
    cfg.validate();
    return target_mse_from_profile(activation_profile(m, profile).p, cfg.k_target, form);
}

/// Binary cross-entropy -p log q - (1 - p) log(1 - q), q clamped.
inline double activation_cross_entropy(double p, double q) {
    q = std::clamp(q, kProbEpsilon, 1.0 - kProbEpsilon);
    return -p * std::log(q) - (1.0 - p) * std::log1p(-q);
}

/// Entropy of a Bernoulli(p), the minimum of activation_cross_entropy over q.
inline double binary_entropy(double p) { return activation_cross_entropy(p, p); }

struct KlLoss {
    /// Saturated activation estimate q_i = sum_d x / (B (x + tau)).
    std::vector<double> q;
    std::vector<double> loss;
    double mean = 0.0;
};

template <Batch M>
KlLoss kl_activation_loss(const M& m, const SparsityConfig& cfg) {
    cfg.validate();
    const double b = static_cast<double>(m.rows());
    KlLoss out;
    out.q.resize(m.cols());
    out.loss.resize(m.cols());
    std::vector<double> terms;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        terms.clear();
        for (double x : m.column(j)) {
            terms.push_back(x / (b * (x + cfg.tau)));
        }
        out.q[j] = pairwise_sum(terms);
        out.loss[j] = activation_cross_entropy(cfg.p_target, out.q[j]);
    }
    out.mean = pairwise_sum(out.loss) / static_cast<double>(m.cols());
    return out;
}

/// C_i = sum_d x / (tau + x), optionally divided by B. Each addend is below
/// 1, so C_i < B.
template <Batch M>
std::vector<double> saturated_flops(const M& m, const SparsityConfig& cfg, bool normalized = false) {
    cfg.validate();
    std::vector<double> c(m.cols());
    std::vector<double> terms;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        terms.clear();
        for (double x : m.column(j)) {
            terms.push_back(x / (cfg.tau + x));
        }
        c[j] = pairwise_sum(terms);
        if (normalized) {
            c[j] /= static_cast<double>(m.rows());
        }
    }
    return c;
}

/// -(C_i / B) ln(p_target) from precomputed C.
inline std::vector<double> dfr_from_flops(std::span<const double> c, std::size_t batch, double p_target) {
    std::vector<double> out(c.size());
    const double lp = std::log(p_target);
    for (std::size_t j = 0; j < c.size(); ++j) {
        out[j] = -(c[j] / static_cast<double>(batch)) * lp;
    }
    return out;
}

template <Batch M>
std::vector<double> dfr_measure(const M& m, const SparsityConfig& cfg) {
    return dfr_from_flops(saturated_flops(m, cfg), m.rows(), cfg.p_target);
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string q = "\"";
    for (char ch : s) {
        q += ch;
        if (ch == '"') q += '"';
    }
    return q + '"';
}

/// Per-term diagnostics CSV. The two batch scalars lead as '#' comment lines.
template <Batch M>
void write_sparsity_csv(std::ostream& out, const VocabMap& vocab, const M& m, const SparsityConfig& cfg) {
    cfg.validate();
    const auto profile = activation_profile(m);
    const auto kl = kl_activation_loss(m, cfg);
    const auto c = saturated_flops(m, cfg);
    const auto dfr = dfr_from_flops(c, m.rows(), cfg.p_target);
    const double mse = target_mse_from_profile(profile.p, cfg.k_target);
    char buf[256];
    std::snprintf(buf, sizeof buf, "# flops_estimate,%.12g\n# target_mse,%.12g\n# kl_mean,%.12g\n",
                  profile.flops_estimate, mse, kl.mean);
    out << buf << "term,p_j,C_i,kl,dfr\n";
    for (std::size_t j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof buf, ",%.12g,%.12g,%.12g,%.12g\n", profile.p[j], c[j], kl.loss[j], dfr[j]);
        out << csv_field(vocab.term(static_cast<TermId>(j))) << buf;
    }
}

}  // namespace spix
