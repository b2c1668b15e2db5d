#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "phenoseq/episode.hpp"
#include "phenoseq/error.hpp"

namespace phenoseq {

// Hourly grid after the full pipeline: every entry finite, in [0, 1], one
// column per variable in spec order, plus the episode's binary label vector.
struct GridEpisode {
    std::string episode_id;
    Eigen::MatrixXd values;               // T x V
    std::vector<std::uint8_t> label_vec;  // |vocab|

    int steps() const { return static_cast<int>(values.rows()); }
    int width() const { return static_cast<int>(values.cols()); }
};

// Intermediate grid between pipeline stages. Missing cells are NaN.
struct PartialGrid {
    std::string episode_id;
    Eigen::MatrixXd values;  // T x V, NaN marks a missing cell

    static bool missing(double x) { return std::isnan(x); }
};

// Rows in the hourly grid: smallest T whose half-open bins [60t, 60(t+1))
// cover every observation, capped at 720 (30 days).
inline int grid_rows(std::int64_t duration_minutes) {
    const std::int64_t rows = duration_minutes / 60 + 1;
    return static_cast<int>(std::min<std::int64_t>(rows, 720));
}

// Mean of the observations of each variable within each one-hour window.
// Cells with no observation stay missing. Observations past the 30-day cap
// are dropped.
inline PartialGrid resample_hourly(const Episode& e, const VariableSpecSet& specs) {
    const int rows = grid_rows(e.duration_minutes());
    const int cols = specs.size();
    PartialGrid g;
    g.episode_id = e.episode_id;
    g.values = Eigen::MatrixXd::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& o : e.observations) {
        const auto col = specs.column_of(o.variable);
        if (!col) {
            throw DataError("episode '" + e.episode_id + "': no variable spec for '" +
                            o.variable + "'");
        }
        const std::int64_t bin = o.t_minutes / 60;
        if (bin >= rows) continue;  // beyond the 30-day cap
        sums(bin, *col) += o.value;
        counts(bin, *col) += 1.0;
    }
    for (int t = 0; t < rows; ++t) {
        for (int v = 0; v < cols; ++v) {
            if (counts(t, v) > 0.0) g.values(t, v) = sums(t, v) / counts(t, v);
        }
    }
    return g;
}

// Forward fill per column, then backward fill whatever leading gap remains.
// Columns with no value at all are left untouched.
inline PartialGrid fill_gaps(PartialGrid g) {
    const int rows = static_cast<int>(g.values.rows());
    const int cols = static_cast<int>(g.values.cols());
    for (int v = 0; v < cols; ++v) {
        double last = std::numeric_limits<double>::quiet_NaN();
        for (int t = 0; t < rows; ++t) {
            if (PartialGrid::missing(g.values(t, v))) {
                if (!std::isnan(last)) g.values(t, v) = last;
            } else {
                last = g.values(t, v);
            }
        }
        if (std::isnan(last)) continue;  // all missing
        for (int t = 0; t < rows; ++t) {
            if (!PartialGrid::missing(g.values(t, v))) {
                const double first = g.values(t, v);
                for (int s = 0; s < t; ++s) g.values(s, v) = first;
                break;
            }
        }
    }
    return g;
}

// Entirely absent variables get their clinically normal value everywhere.
// After this stage no cell is missing.
inline PartialGrid impute_missing_variable(PartialGrid g, const VariableSpecSet& specs) {
    if (static_cast<int>(g.values.cols()) != specs.size()) {
        throw DataError("impute: grid has " + std::to_string(g.values.cols()) +
                        " columns but " + std::to_string(specs.size()) + " specs");
    }
    const int rows = static_cast<int>(g.values.rows());
    for (int v = 0; v < specs.size(); ++v) {
        bool any = false;
        for (int t = 0; t < rows; ++t) {
            if (!PartialGrid::missing(g.values(t, v))) { any = true; break; }
        }
        if (!any) g.values.col(v).setConstant(specs.at(v).normal);
    }
    return g;
}

// Min-max rescale into [0, 1] using the expert ranges; out-of-range raw
// values clamp to the interval ends.
inline GridEpisode rescale(const PartialGrid& g, const VariableSpecSet& specs) {
    GridEpisode out;
    out.episode_id = g.episode_id;
    out.values.resize(g.values.rows(), g.values.cols());
    for (int v = 0; v < specs.size(); ++v) {
        const auto& s = specs.at(v);
        const double span = s.max - s.min;
        for (int t = 0; t < g.values.rows(); ++t) {
            const double x = g.values(t, v);
            if (PartialGrid::missing(x)) {
                throw DataError("rescale: missing cell in episode '" + g.episode_id + "'");
            }
            out.values(t, v) = std::clamp((x - s.min) / span, 0.0, 1.0);
        }
    }
    return out;
}

// The four-stage pipeline: hourly mean resampling, gap fill, normal-value
// imputation, min-max rescaling; attaches the binary label vector.
inline GridEpisode preprocess_pipeline(const Episode& e, const VariableSpecSet& specs,
                                       const LabelVocabulary& vocab) {
    GridEpisode g = rescale(impute_missing_variable(fill_gaps(resample_hourly(e, specs)), specs),
                            specs);
    g.label_vec.assign(static_cast<std::size_t>(vocab.size()), 0);
    for (const auto& l : e.labels) {
        if (auto idx = vocab.index_of(l)) g.label_vec[static_cast<std::size_t>(*idx)] = 1;
    }
    return g;
}

// --- grid JSONL ---

inline nlohmann::json grid_to_json(const GridEpisode& g) {
    nlohmann::json rows = nlohmann::json::array();
    for (int t = 0; t < g.values.rows(); ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (int v = 0; v < g.values.cols(); ++v) row.push_back(g.values(t, v));
        rows.push_back(std::move(row));
    }
    nlohmann::json labels = nlohmann::json::array();
    for (auto b : g.label_vec) labels.push_back(static_cast<int>(b));
    return {{"episode_id", g.episode_id}, {"values", std::move(rows)}, {"label_vec", labels}};
}

inline GridEpisode grid_from_json(const nlohmann::json& j, const std::string& where) {
    detail::require_fields(j, {"episode_id", "values", "label_vec"}, where);
    GridEpisode g;
    g.episode_id = j["episode_id"].get<std::string>();
    const auto& rows = j["values"];
    if (!rows.is_array() || rows.empty()) throw DataError(where + ": values must be a non-empty array");
    const std::size_t cols = rows[0].size();
    g.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != cols) throw DataError(where + ": ragged values matrix");
        for (std::size_t v = 0; v < cols; ++v) {
            const double x = rows[t][v].get<double>();
            if (!std::isfinite(x)) throw DataError(where + ": non-finite grid value");
            g.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v)) = x;
        }
    }
    for (const auto& jl : j["label_vec"]) {
        const int b = jl.get<int>();
        if (b != 0 && b != 1) throw DataError(where + ": label_vec entries must be 0 or 1");
        g.label_vec.push_back(static_cast<std::uint8_t>(b));
    }
    return g;
}

inline std::vector<GridEpisode> parse_grids(std::istream& in) {
    std::vector<GridEpisode> grids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& ex) {
            throw DataError(where + ": malformed JSON: " + ex.what());
        }
        grids.push_back(grid_from_json(j, where));
    }
    return grids;
}

inline void serialize_grids(const std::vector<GridEpisode>& grids, std::ostream& out) {
    for (const auto& g : grids) out << grid_to_json(g).dump() << '\n';
}

}  // namespace phenoseq
