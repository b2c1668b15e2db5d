#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "phenoseq/error.hpp"
#include "phenoseq/lstm.hpp"
#include "phenoseq/metrics.hpp"
#include "phenoseq/parallel.hpp"
#include "phenoseq/preprocess.hpp"
#include "phenoseq/rng.hpp"

namespace phenoseq {

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-5;            // l2^2 coefficient, weights only
    std::optional<double> clip_norm = 5.0;  // global gradient norm cap
    std::optional<int> truncate_k;          // BPTT horizon; unset = full
    int max_epochs = 100;
    int patience = 5;  // epochs without validation micro-AUC improvement
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw DataError("config: learning_rate must be > 0");
        if (momentum < 0.0 || momentum >= 1.0) throw DataError("config: momentum must be in [0, 1)");
        if (weight_decay < 0.0) throw DataError("config: weight_decay must be >= 0");
        if (clip_norm && !(*clip_norm > 0.0)) throw DataError("config: clip_norm must be > 0");
        if (truncate_k && *truncate_k < 1) throw DataError("config: truncate_k must be >= 1");
        if (max_epochs < 1) throw DataError("config: max_epochs must be >= 1");
        if (patience < 0) throw DataError("config: patience must be >= 0");
    }
};

struct TrainHistory {
    std::vector<double> train_loss;     // mean per epoch
    std::vector<double> val_micro_auc;  // NaN when undefined
    int best_epoch = -1;
};

struct TrainResult {
    LstmParams params;  // from the best validation epoch
    TrainHistory history;
};

// Sum over labels of binary cross entropy; scores clamp to [eps, 1-eps] so
// the loss stays finite at the boundaries.
inline double bce_loss(const Eigen::VectorXd& scores, const std::vector<std::uint8_t>& targets) {
    if (scores.size() != static_cast<Eigen::Index>(targets.size())) {
        throw DataError("bce_loss: score/target length mismatch");
    }
    constexpr double eps = 1e-12;
    double loss = 0.0;
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
        const double s = std::clamp(scores(j), eps, 1.0 - eps);
        loss -= targets[static_cast<std::size_t>(j)] ? std::log(s) : std::log(1.0 - s);
    }
    return loss;
}

inline double gradient_norm(const Gradients& g) {
    double sq = 0.0;
    for_each_tensor(const_cast<Gradients&>(g), [&sq](auto& t, bool) { sq += t.squaredNorm(); });
    return std::sqrt(sq);
}

// Rescales the whole gradient so its global l2 norm is at most clip_norm;
// gradients already under the threshold pass through unchanged.
inline Gradients clip_gradients(Gradients g, double clip_norm) {
    if (!(clip_norm > 0.0)) throw DataError("clip_gradients: clip_norm must be > 0");
    const double n = gradient_norm(g);
    if (n > clip_norm) {
        const double scale = clip_norm / n;
        for_each_tensor(g, [scale](auto& t, bool) { t *= scale; });
    }
    return g;
}

// Classical momentum update with l2^2 weight decay on the weights (biases
// decay-exempt):
//   g~ = g + weight_decay * theta    v <- momentum * v - lr * g~    theta <- theta + v
inline void sgd_momentum_step(LstmParams& params, const Gradients& grads, Velocity& vel,
                              const TrainConfig& cfg) {
    for_each_tensor_triple(params, grads, vel,
                           [&cfg](auto& p, const auto& g, auto& v, bool is_bias) {
                               if (cfg.weight_decay > 0.0 && !is_bias) {
                                   v = cfg.momentum * v - cfg.learning_rate * (g + cfg.weight_decay * p);
                               } else {
                                   v = cfg.momentum * v - cfg.learning_rate * g;
                               }
                               p += v;
                           });
}

// Validation scores for a set of grids, episode-parallel.
inline ScoreMatrix score_dataset(const LstmParams& params, const std::vector<GridEpisode>& grids,
                                 int threads = 1) {
    ScoreMatrix m;
    m.scores.resize(static_cast<Eigen::Index>(grids.size()), params.label_count());
    m.truth.resize(static_cast<Eigen::Index>(grids.size()), params.label_count());
    parallel_for(grids.size(), threads, [&](std::size_t i) {
        const Eigen::VectorXd s = predict(params, grids[i]);
        for (int j = 0; j < params.label_count(); ++j) {
            m.scores(static_cast<Eigen::Index>(i), j) = s(j);
            m.truth(static_cast<Eigen::Index>(i), j) =
                static_cast<double>(grids[i].label_vec[static_cast<std::size_t>(j)]);
        }
    });
    return m;
}

// Online SGD training (batch size 1) with per-epoch seeded shuffling and
// early stopping on validation micro AUC. Returns the parameters from the
// best validation epoch. Throws NumericError naming the episode if the loss
// goes non-finite.
inline TrainResult train(const std::vector<GridEpisode>& train_set,
                         const std::vector<GridEpisode>& val_set,
                         const std::vector<int>& hidden_sizes, const TrainConfig& cfg,
                         int threads = 1) {
    cfg.validate();
    if (train_set.empty()) throw DataError("train: empty training set");
    const int input_width = train_set.front().width();
    const int label_count = static_cast<int>(train_set.front().label_vec.size());

    LstmParams params = init_params(input_width, hidden_sizes, label_count, cfg.seed);
    Velocity vel = zero_like(params);

    TrainResult result;
    result.params = params;
    double best_auc = -std::numeric_limits<double>::infinity();
    int epochs_without_improvement = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng shuffle_rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        for (const std::size_t idx : order) {
            const GridEpisode& ep = train_set[idx];
            const ForwardTrace trace = forward(params, ep);
            const double loss = bce_loss(trace.scores, ep.label_vec);
            if (!std::isfinite(loss)) {
                throw NumericError("train: non-finite loss on episode '" + ep.episode_id +
                                   "' in epoch " + std::to_string(epoch));
            }
            loss_sum += loss;
            Gradients grads = backward(params, trace, ep.label_vec, cfg.truncate_k);
            if (cfg.clip_norm) grads = clip_gradients(std::move(grads), *cfg.clip_norm);
            sgd_momentum_step(params, grads, vel, cfg);
        }
        result.history.train_loss.push_back(loss_sum / static_cast<double>(train_set.size()));

        double val_auc = std::numeric_limits<double>::quiet_NaN();
        if (!val_set.empty()) {
            const ScoreMatrix m = score_dataset(params, val_set, threads);
            if (const auto a = micro_auc(m)) val_auc = *a;
        }
        result.history.val_micro_auc.push_back(val_auc);

        const bool improved = val_set.empty() || (std::isfinite(val_auc) && val_auc > best_auc);
        if (improved) {
            best_auc = val_auc;
            result.params = params;
            result.history.best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
            if (epochs_without_improvement > cfg.patience) break;
        }
    }
    return result;
}

// --- config / history JSON ---

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    detail::require_fields(j,
                           {"learning_rate", "momentum", "weight_decay", "clip_norm", "truncate_k",
                            "max_epochs", "patience", "seed"},
                           "train config");
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.momentum = j.at("momentum").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.clip_norm = j.at("clip_norm").is_null()
                        ? std::nullopt
                        : std::optional<double>(j.at("clip_norm").get<double>());
    cfg.truncate_k = j.at("truncate_k").is_null()
                         ? std::nullopt
                         : std::optional<int>(j.at("truncate_k").get<int>());
    cfg.max_epochs = j.at("max_epochs").get<int>();
    cfg.patience = j.at("patience").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

inline nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return {{"learning_rate", cfg.learning_rate},
            {"momentum", cfg.momentum},
            {"weight_decay", cfg.weight_decay},
            {"clip_norm", cfg.clip_norm ? nlohmann::json(*cfg.clip_norm) : nlohmann::json(nullptr)},
            {"truncate_k", cfg.truncate_k ? nlohmann::json(*cfg.truncate_k) : nlohmann::json(nullptr)},
            {"max_epochs", cfg.max_epochs},
            {"patience", cfg.patience},
            {"seed", cfg.seed}};
}

inline nlohmann::json history_to_json(const TrainHistory& h) {
    nlohmann::json epochs = nlohmann::json::array();
    for (std::size_t i = 0; i < h.train_loss.size(); ++i) {
        nlohmann::json e = {{"epoch", i}, {"train_loss", h.train_loss[i]}};
        e["val_micro_auc"] = std::isfinite(h.val_micro_auc[i])
                                 ? nlohmann::json(h.val_micro_auc[i])
                                 : nlohmann::json(nullptr);
        epochs.push_back(std::move(e));
    }
    return {{"epochs", std::move(epochs)}, {"best_epoch", h.best_epoch}};
}

}  // namespace phenoseq
