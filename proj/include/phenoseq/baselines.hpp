#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "phenoseq/episode.hpp"
#include "phenoseq/error.hpp"
#include "phenoseq/lstm.hpp"  // sigmoid
#include "phenoseq/metrics.hpp"
#include "phenoseq/parallel.hpp"
#include "phenoseq/preprocess.hpp"

namespace phenoseq {

enum class FeatureSchema { Raw12, Engineered };

inline std::string schema_name(FeatureSchema s) {
    return s == FeatureSchema::Raw12 ? "raw12" : "engineered";
}

struct FeatureVector {
    Eigen::VectorXd values;
    FeatureSchema schema = FeatureSchema::Raw12;
};

// Episode-independent ranker: every episode is scored by the training-set
// label incidence.
struct BaseRateModel {
    Eigen::VectorXd incidence;
};

inline BaseRateModel fit_base_rate(const std::vector<Episode>& train, const LabelVocabulary& vocab) {
    if (train.empty()) throw DataError("fit_base_rate: empty training set");
    const std::vector<double> inc = label_incidence(train, vocab);
    BaseRateModel m;
    m.incidence.resize(static_cast<Eigen::Index>(inc.size()));
    for (std::size_t j = 0; j < inc.size(); ++j) m.incidence(static_cast<Eigen::Index>(j)) = inc[j];
    return m;
}

inline BaseRateModel fit_base_rate(const std::vector<GridEpisode>& train) {
    if (train.empty()) throw DataError("fit_base_rate: empty training set");
    const std::size_t labels = train.front().label_vec.size();
    BaseRateModel m;
    m.incidence = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(labels));
    for (const auto& g : train) {
        for (std::size_t j = 0; j < labels; ++j) {
            m.incidence(static_cast<Eigen::Index>(j)) += g.label_vec[j];
        }
    }
    m.incidence /= static_cast<double>(train.size());
    return m;
}

// The final 12 hourly rows flattened row-major: 12 * V features.
inline FeatureVector raw12_features(const GridEpisode& g) {
    const int t0 = g.steps() - 12;
    if (t0 < 0) {
        throw DataError("raw12_features: episode '" + g.episode_id + "' has fewer than 12 hours");
    }
    FeatureVector f;
    f.schema = FeatureSchema::Raw12;
    f.values.resize(12 * g.width());
    Eigen::Index k = 0;
    for (int t = t0; t < g.steps(); ++t) {
        for (int v = 0; v < g.width(); ++v) f.values(k++) = g.values(t, v);
    }
    return f;
}

// Per-variable summary statistics (first, last, min, max, mean, standard
// deviation, least-squares slope over hours) plus normalized episode length:
// 7 * V + 1 features.
inline FeatureVector engineered_features(const GridEpisode& g) {
    const int steps = g.steps();
    if (steps < 1) throw DataError("engineered_features: empty grid");
    FeatureVector f;
    f.schema = FeatureSchema::Engineered;
    f.values.resize(7 * g.width() + 1);
    Eigen::Index k = 0;
    for (int v = 0; v < g.width(); ++v) {
        const auto col = g.values.col(v);
        const double mean = col.mean();
        double var = 0.0;
        for (int t = 0; t < steps; ++t) var += (col(t) - mean) * (col(t) - mean);
        var /= static_cast<double>(steps);

        // least-squares slope of value against hour index
        const double t_mean = 0.5 * static_cast<double>(steps - 1);
        double cov = 0.0, t_var = 0.0;
        for (int t = 0; t < steps; ++t) {
            const double dt = static_cast<double>(t) - t_mean;
            cov += dt * (col(t) - mean);
            t_var += dt * dt;
        }
        const double slope = t_var > 0.0 ? cov / t_var : 0.0;

        f.values(k++) = col(0);
        f.values(k++) = col(steps - 1);
        f.values(k++) = col.minCoeff();
        f.values(k++) = col.maxCoeff();
        f.values(k++) = mean;
        f.values(k++) = std::sqrt(var);
        f.values(k++) = slope;
    }
    f.values(k) = static_cast<double>(steps) / 720.0;
    return f;
}

// One-vs-rest logistic regression with l2^2 regularization on the weights.
struct LinearModel {
    Eigen::MatrixXd weights;  // L x F
    Eigen::VectorXd bias;     // L
    double l2 = 0.0;
    FeatureSchema schema = FeatureSchema::Raw12;
};

namespace detail {

// Mean BCE plus l2 * ||w||^2 and its gradient, shared by the solver and the
// convergence check.
struct LogisticObjective {
    const Eigen::MatrixXd& x;  // N x F
    const Eigen::VectorXd& y;  // N, entries 0/1
    double l2;

    double value(const Eigen::VectorXd& w, double b) const {
        constexpr double eps = 1e-12;
        const Eigen::VectorXd z = x * w + Eigen::VectorXd::Constant(x.rows(), b);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double p = std::clamp(sigmoid(z(i)), eps, 1.0 - eps);
            loss -= y(i) != 0.0 ? std::log(p) : std::log(1.0 - p);
        }
        return loss / static_cast<double>(x.rows()) + l2 * w.squaredNorm();
    }

    void gradient(const Eigen::VectorXd& w, double b, Eigen::VectorXd& gw, double& gb) const {
        const Eigen::VectorXd z = x * w + Eigen::VectorXd::Constant(x.rows(), b);
        Eigen::VectorXd delta(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) delta(i) = sigmoid(z(i)) - y(i);
        const double n = static_cast<double>(x.rows());
        gw.noalias() = x.transpose() * delta / n;
        gw += 2.0 * l2 * w;
        gb = delta.sum() / n;
    }
};

}  // namespace detail

// Fits each label independently by full-batch gradient descent with
// backtracking step halving, stopping at gradient norm < 1e-6 or 10000
// iterations. Weights start at zero, so max_iterations = 0 leaves the
// all-0.5 scorer.
inline LinearModel fit_logistic(const std::vector<FeatureVector>& features,
                                const Eigen::MatrixXd& labels, double l2,
                                std::uint64_t /*seed*/, int max_iterations = 10000,
                                int threads = 1) {
    if (features.empty()) throw DataError("fit_logistic: no feature vectors");
    const Eigen::Index n = static_cast<Eigen::Index>(features.size());
    const Eigen::Index f = features.front().values.size();
    if (labels.rows() != n) throw DataError("fit_logistic: feature/label row mismatch");

    Eigen::MatrixXd x(n, f);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& fv = features[static_cast<std::size_t>(i)];
        if (fv.values.size() != f || fv.schema != features.front().schema) {
            throw DataError("fit_logistic: inconsistent feature vectors");
        }
        if (!fv.values.allFinite()) throw DataError("fit_logistic: non-finite feature value");
        x.row(i) = fv.values.transpose();
    }

    LinearModel model;
    model.l2 = l2;
    model.schema = features.front().schema;
    model.weights = Eigen::MatrixXd::Zero(labels.cols(), f);
    model.bias = Eigen::VectorXd::Zero(labels.cols());

    parallel_for(static_cast<std::size_t>(labels.cols()), threads, [&](std::size_t j) {
        const Eigen::VectorXd y = labels.col(static_cast<Eigen::Index>(j));
        const detail::LogisticObjective obj{x, y, l2};
        Eigen::VectorXd w = Eigen::VectorXd::Zero(f);
        double b = 0.0;
        double fx = obj.value(w, b);
        Eigen::VectorXd gw(f);
        double gb = 0.0;
        double step = 1.0;
        for (int it = 0; it < max_iterations; ++it) {
            obj.gradient(w, b, gw, gb);
            const double gnorm_sq = gw.squaredNorm() + gb * gb;
            if (std::sqrt(gnorm_sq) < 1e-6) break;

            step = std::min(step * 2.0, 1e4);  // warm start from the last accepted step
            while (true) {
                const Eigen::VectorXd w_try = w - step * gw;
                const double b_try = b - step * gb;
                const double f_try = obj.value(w_try, b_try);
                if (f_try <= fx - 1e-4 * step * gnorm_sq || step < 1e-16) {
                    w = w_try;
                    b = b_try;
                    fx = f_try;
                    break;
                }
                step *= 0.5;
            }
        }
        model.weights.row(static_cast<Eigen::Index>(j)) = w.transpose();
        model.bias(static_cast<Eigen::Index>(j)) = b;
    });
    return model;
}

inline Eigen::VectorXd predict_linear(const LinearModel& m, const FeatureVector& f) {
    if (f.schema != m.schema) {
        throw DataError("predict_linear: feature schema '" + schema_name(f.schema) +
                        "' does not match model schema '" + schema_name(m.schema) + "'");
    }
    if (f.values.size() != m.weights.cols()) throw DataError("predict_linear: feature width mismatch");
    const Eigen::VectorXd z = m.weights * f.values + m.bias;
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

// --- dataset-level helpers ---

inline std::vector<FeatureVector> extract_features(const std::vector<GridEpisode>& grids,
                                                   FeatureSchema schema, int threads = 1) {
    std::vector<FeatureVector> out(grids.size());
    parallel_for(grids.size(), threads, [&](std::size_t i) {
        out[i] = schema == FeatureSchema::Raw12 ? raw12_features(grids[i])
                                                : engineered_features(grids[i]);
    });
    return out;
}

inline Eigen::MatrixXd label_matrix(const std::vector<GridEpisode>& grids) {
    if (grids.empty()) return {};
    const Eigen::Index labels = static_cast<Eigen::Index>(grids.front().label_vec.size());
    Eigen::MatrixXd y(static_cast<Eigen::Index>(grids.size()), labels);
    for (std::size_t i = 0; i < grids.size(); ++i) {
        for (Eigen::Index j = 0; j < labels; ++j) {
            y(static_cast<Eigen::Index>(i), j) = grids[i].label_vec[static_cast<std::size_t>(j)];
        }
    }
    return y;
}

inline ScoreMatrix score_dataset(const BaseRateModel& m, const std::vector<GridEpisode>& grids) {
    ScoreMatrix out;
    out.truth = label_matrix(grids);
    out.scores.resize(static_cast<Eigen::Index>(grids.size()), m.incidence.size());
    for (Eigen::Index i = 0; i < out.scores.rows(); ++i) out.scores.row(i) = m.incidence.transpose();
    return out;
}

inline ScoreMatrix score_dataset(const LinearModel& m, const std::vector<GridEpisode>& grids,
                                 int threads = 1) {
    ScoreMatrix out;
    out.truth = label_matrix(grids);
    out.scores.resize(static_cast<Eigen::Index>(grids.size()), m.weights.rows());
    parallel_for(grids.size(), threads, [&](std::size_t i) {
        const FeatureVector f = m.schema == FeatureSchema::Raw12 ? raw12_features(grids[i])
                                                                 : engineered_features(grids[i]);
        out.scores.row(static_cast<Eigen::Index>(i)) = predict_linear(m, f).transpose();
    });
    return out;
}

// --- checkpoint serialization (same JSON container style as the LSTM) ---

inline nlohmann::json base_rate_to_json(const BaseRateModel& m) {
    return {{"format_version", 1},
            {"model", "base_rate"},
            {"label_count", m.incidence.size()},
            {"incidence", detail::vector_to_json(m.incidence)}};
}

inline BaseRateModel base_rate_from_json(const nlohmann::json& j) {
    if (j.value("model", "") != "base_rate") throw DataError("checkpoint: not a base_rate checkpoint");
    BaseRateModel m;
    m.incidence = detail::vector_from_json(j.at("incidence"), j.at("label_count").get<Eigen::Index>(),
                                           "incidence");
    return m;
}

inline nlohmann::json linear_to_json(const LinearModel& m) {
    return {{"format_version", 1},
            {"model", "linear"},
            {"schema", schema_name(m.schema)},
            {"label_count", m.weights.rows()},
            {"feature_count", m.weights.cols()},
            {"l2", m.l2},
            {"weights", detail::matrix_to_json(m.weights)},
            {"bias", detail::vector_to_json(m.bias)}};
}

inline LinearModel linear_from_json(const nlohmann::json& j) {
    if (j.value("model", "") != "linear") throw DataError("checkpoint: not a linear checkpoint");
    LinearModel m;
    const auto schema = j.at("schema").get<std::string>();
    if (schema == "raw12") {
        m.schema = FeatureSchema::Raw12;
    } else if (schema == "engineered") {
        m.schema = FeatureSchema::Engineered;
    } else {
        throw DataError("checkpoint: unknown feature schema '" + schema + "'");
    }
    const Eigen::Index labels = j.at("label_count").get<Eigen::Index>();
    const Eigen::Index features = j.at("feature_count").get<Eigen::Index>();
    m.l2 = j.at("l2").get<double>();
    m.weights = detail::matrix_from_json(j.at("weights"), labels, features, "weights");
    m.bias = detail::vector_from_json(j.at("bias"), labels, "bias");
    return m;
}

}  // namespace phenoseq
