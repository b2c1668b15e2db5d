#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phenoseq/episode.hpp"
#include "phenoseq/error.hpp"

namespace phenoseq {

// Model scores and binary truth for a set of episodes, one row per episode
// and one column per label.
struct ScoreMatrix {
    Eigen::MatrixXd scores;  // N x L, in [0, 1]
    Eigen::MatrixXd truth;   // N x L, entries 0 or 1

    int episodes() const { return static_cast<int>(scores.rows()); }
    int labels() const { return static_cast<int>(scores.cols()); }
};

struct PerLabelMetrics {
    std::string label;
    std::optional<double> auc;  // empty when the label has no positive or no negative
    double f1 = 0.0;
    int support = 0;  // positive count
};

struct MetricsReport {
    std::optional<double> micro_auc;
    std::optional<double> macro_auc;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double precision_at_10 = 0.0;
    double max_p_at_10 = 0.0;  // dataset-dependent ceiling
    bool micro_f1_degenerate = false;
    int macro_auc_excluded = 0;  // labels without both classes in the truth
    std::vector<PerLabelMetrics> per_label;
};

// Rank-based AUC with mid-rank tie handling: the probability that a random
// positive outscores a random negative, ties counting half. Empty when the
// truth has only one class.
inline std::optional<double> auc(const std::vector<double>& scores,
                                 const std::vector<std::uint8_t>& truth) {
    if (scores.size() != truth.size()) throw DataError("auc: score/truth length mismatch");
    const std::size_t n = scores.size();
    std::size_t pos = 0;
    for (auto t : truth) pos += (t != 0);
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of positives' mid-ranks; each tie group shares the average rank.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) {
            if (truth[order[k]] != 0) rank_sum_pos += mid_rank;
        }
        i = j;
    }
    const double p = static_cast<double>(pos);
    const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(neg));
}

// AUC over all episode-label cells pooled together.
inline std::optional<double> micro_auc(const ScoreMatrix& m) {
    std::vector<double> s;
    std::vector<std::uint8_t> t;
    s.reserve(static_cast<std::size_t>(m.episodes()) * static_cast<std::size_t>(m.labels()));
    t.reserve(s.capacity());
    for (int i = 0; i < m.episodes(); ++i) {
        for (int j = 0; j < m.labels(); ++j) {
            s.push_back(m.scores(i, j));
            t.push_back(m.truth(i, j) != 0.0 ? 1 : 0);
        }
    }
    return auc(s, t);
}

namespace detail {

inline std::optional<double> label_auc(const ScoreMatrix& m, int j) {
    std::vector<double> s(static_cast<std::size_t>(m.episodes()));
    std::vector<std::uint8_t> t(static_cast<std::size_t>(m.episodes()));
    for (int i = 0; i < m.episodes(); ++i) {
        s[static_cast<std::size_t>(i)] = m.scores(i, j);
        t[static_cast<std::size_t>(i)] = m.truth(i, j) != 0.0 ? 1 : 0;
    }
    return auc(s, t);
}

}  // namespace detail

// Unweighted mean of per-label AUC over the labels where AUC is defined.
// excluded, when given, receives the count of skipped labels.
inline std::optional<double> macro_auc(const ScoreMatrix& m, int* excluded = nullptr) {
    double sum = 0.0;
    int defined = 0;
    int skipped = 0;
    for (int j = 0; j < m.labels(); ++j) {
        if (auto a = detail::label_auc(m, j)) {
            sum += *a;
            ++defined;
        } else {
            ++skipped;
        }
    }
    if (excluded) *excluded = skipped;
    if (defined == 0) return std::nullopt;
    return sum / static_cast<double>(defined);
}

struct F1Result {
    double value = 0.0;
    bool degenerate = false;  // no positive truth and no positive prediction anywhere
};

// Pooled-counts F1 at a fixed threshold (prediction = score >= threshold).
inline F1Result f1_micro(const ScoreMatrix& m, double threshold = 0.5) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < m.episodes(); ++i) {
        for (int j = 0; j < m.labels(); ++j) {
            const bool pred = m.scores(i, j) >= threshold;
            const bool truth = m.truth(i, j) != 0.0;
            tp += (pred && truth);
            fp += (pred && !truth);
            fn += (!pred && truth);
        }
    }
    if (tp + fp + fn == 0) return {0.0, true};
    return {2.0 * static_cast<double>(tp) /
                static_cast<double>(2 * tp + fp + fn),
            false};
}

// Unweighted mean of per-label F1. A label with no positive truth and no
// positive prediction is skipped; a label with counts but zero precision and
// recall scores 0.
inline double f1_macro(const ScoreMatrix& m, double threshold = 0.5) {
    double sum = 0.0;
    int counted = 0;
    for (int j = 0; j < m.labels(); ++j) {
        std::int64_t tp = 0, fp = 0, fn = 0;
        for (int i = 0; i < m.episodes(); ++i) {
            const bool pred = m.scores(i, j) >= threshold;
            const bool truth = m.truth(i, j) != 0.0;
            tp += (pred && truth);
            fp += (pred && !truth);
            fn += (!pred && truth);
        }
        if (tp + fp + fn == 0) continue;
        sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        ++counted;
    }
    return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

// Mean over episodes of the fraction of true labels among the k
// highest-scoring ones. Score ties break toward the lower label index.
inline double precision_at_k(const ScoreMatrix& m, int k = 10) {
    if (m.labels() < k) {
        throw DataError("precision_at_k: need at least " + std::to_string(k) + " labels, got " +
                        std::to_string(m.labels()));
    }
    if (m.episodes() == 0) return 0.0;
    double total = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(m.labels()));
    for (int i = 0; i < m.episodes(); ++i) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (m.scores(i, a) != m.scores(i, b)) return m.scores(i, a) > m.scores(i, b);
            return a < b;
        });
        int hits = 0;
        for (int r = 0; r < k; ++r) hits += (m.truth(i, idx[static_cast<std::size_t>(r)]) != 0.0);
        total += static_cast<double>(hits) / static_cast<double>(k);
    }
    return total / static_cast<double>(m.episodes());
}

// Best possible precision-at-k on this truth: mean(min(labels per episode, k)) / k.
inline double precision_at_k_ceiling(const ScoreMatrix& m, int k = 10) {
    if (m.episodes() == 0) return 0.0;
    double total = 0.0;
    for (int i = 0; i < m.episodes(); ++i) {
        int positives = 0;
        for (int j = 0; j < m.labels(); ++j) positives += (m.truth(i, j) != 0.0);
        total += static_cast<double>(std::min(positives, k)) / static_cast<double>(k);
    }
    return total / static_cast<double>(m.episodes());
}

inline MetricsReport build_report(const ScoreMatrix& m, const LabelVocabulary& vocab,
                                  double threshold = 0.5, int k = 10) {
    if (vocab.size() != m.labels()) throw DataError("build_report: vocabulary/label count mismatch");
    MetricsReport r;
    r.micro_auc = micro_auc(m);
    r.macro_auc = macro_auc(m, &r.macro_auc_excluded);
    const F1Result micro = f1_micro(m, threshold);
    r.micro_f1 = micro.value;
    r.micro_f1_degenerate = micro.degenerate;
    r.macro_f1 = f1_macro(m, threshold);
    r.precision_at_10 = precision_at_k(m, k);
    r.max_p_at_10 = precision_at_k_ceiling(m, k);
    for (int j = 0; j < m.labels(); ++j) {
        PerLabelMetrics pl;
        pl.label = vocab.names()[static_cast<std::size_t>(j)];
        pl.auc = detail::label_auc(m, j);
        std::int64_t tp = 0, fp = 0, fn = 0;
        int support = 0;
        for (int i = 0; i < m.episodes(); ++i) {
            const bool pred = m.scores(i, j) >= threshold;
            const bool truth = m.truth(i, j) != 0.0;
            tp += (pred && truth);
            fp += (pred && !truth);
            fn += (!pred && truth);
            support += truth;
        }
        pl.f1 = (tp + fp + fn == 0)
                    ? 0.0
                    : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        pl.support = support;
        r.per_label.push_back(std::move(pl));
    }
    return r;
}

// --- report rendering ---

namespace detail {

inline std::string fmt_metric(const std::optional<double>& v) {
    if (!v) return "n/a";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << *v;
    return os.str();
}

}  // namespace detail

// Aligned plain-text table, one row per model:
// Model | Micro AUC | Macro AUC | Micro F1 | Macro F1 | Precision at 10
inline std::string render_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    const std::vector<std::string> header = {"Model",    "Micro AUC", "Macro AUC",
                                             "Micro F1", "Macro F1",  "Precision at 10"};
    std::vector<std::vector<std::string>> cells;
    cells.push_back(header);
    for (const auto& [name, r] : rows) {
        cells.push_back({name, detail::fmt_metric(r.micro_auc), detail::fmt_metric(r.macro_auc),
                         detail::fmt_metric(r.micro_f1), detail::fmt_metric(r.macro_f1),
                         detail::fmt_metric(r.precision_at_10)});
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream os;
    for (std::size_t rix = 0; rix < cells.size(); ++rix) {
        const auto& row = cells[rix];
        for (std::size_t c = 0; c < row.size(); ++c) {
            os << std::left << std::setw(static_cast<int>(width[c])) << row[c];
            if (c + 1 < row.size()) os << "  ";
        }
        os << '\n';
        if (rix == 0) {
            for (std::size_t c = 0; c < width.size(); ++c) {
                os << std::string(width[c], '-');
                if (c + 1 < width.size()) os << "  ";
            }
            os << '\n';
        }
    }
    return os.str();
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json per_label = nlohmann::json::array();
    for (const auto& pl : r.per_label) {
        nlohmann::json jl = {{"label", pl.label}, {"f1", pl.f1}, {"support", pl.support}};
        jl["auc"] = pl.auc ? nlohmann::json(*pl.auc) : nlohmann::json(nullptr);
        per_label.push_back(std::move(jl));
    }
    nlohmann::json j = {{"micro_f1", r.micro_f1},
                        {"macro_f1", r.macro_f1},
                        {"precision_at_10", r.precision_at_10},
                        {"max_p_at_10", r.max_p_at_10},
                        {"micro_f1_degenerate", r.micro_f1_degenerate},
                        {"macro_auc_excluded", r.macro_auc_excluded},
                        {"per_label", std::move(per_label)}};
    j["micro_auc"] = r.micro_auc ? nlohmann::json(*r.micro_auc) : nlohmann::json(nullptr);
    j["macro_auc"] = r.macro_auc ? nlohmann::json(*r.macro_auc) : nlohmann::json(nullptr);
    return j;
}

}  // namespace phenoseq
