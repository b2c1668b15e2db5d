#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"
#include "phenoseq/episode.hpp"
#include "phenoseq/error.hpp"
#include "phenoseq/rng.hpp"

namespace phenoseq {

// Synthetic corpus with planted label signals. Long-range labels perturb
// their designated variable only during the first quarter of the episode, so
// a last-12-hours feature window cannot see them; short-range labels perturb
// the final 12 hours. Everything is a pure function of the seed.
struct SynthConfig {
    int n_episodes = 2000;
    int n_variables = 13;
    int n_labels = 32;
    double label_rate = 2.8;           // mean labels per episode
    double obs_rate_per_hour = 0.25;   // Poisson sampling rate per variable
    double missing_var_prob = 0.1;     // chance a variable is absent entirely
    double long_range_fraction = 0.5;  // fraction of labels planted early
    double noise_sd = 0.05;            // observation noise, fraction of range
    std::uint64_t seed = 0;

    void validate() const {
        if (n_episodes < 1 || n_variables < 1 || n_labels < 1) {
            throw DataError("synth config: counts must be >= 1");
        }
        if (!(label_rate > 0.0) || !(obs_rate_per_hour > 0.0)) {
            throw DataError("synth config: rates must be > 0");
        }
        if (missing_var_prob < 0.0 || missing_var_prob > 1.0 || long_range_fraction < 0.0 ||
            long_range_fraction > 1.0) {
            throw DataError("synth config: probabilities must be in [0, 1]");
        }
        if (noise_sd < 0.0) throw DataError("synth config: noise_sd must be >= 0");
    }
};

// Ground truth for one planted label, written alongside the corpus so tests
// can decode episodes independently of any model.
struct PlantedLabel {
    std::string name;
    bool long_range = false;
    int variable = 0;          // designated variable column
    double shift_fraction = 0.0;  // additive shift as a fraction of the range
    double probability = 0.0;     // activation probability per episode
};

struct SynthCorpus {
    std::vector<Episode> episodes;
    VariableSpecSet specs;
    LabelVocabulary vocab;
    std::vector<PlantedLabel> truth;
};

namespace detail {

inline std::string zero_padded(const char* prefix, int i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
    return buf;
}

}  // namespace detail

inline std::vector<VariableSpec> synth_variable_specs(int n_variables) {
    std::vector<VariableSpec> specs;
    for (int v = 0; v < n_variables; ++v) {
        // distinct ranges per variable, normal value centered
        const double normal = 40.0 + 6.0 * v;
        const double span = 25.0 + 3.0 * v;
        specs.push_back({detail::zero_padded("var_", v, 2), normal - span, normal + span, normal});
    }
    return specs;
}

// Label j -> variable (j mod V) at shift level (j / V): labels sharing a
// variable use distinct shift sizes, so an episode-level mean identifies
// which one is active. Long-range flags are spread evenly across the
// incidence ramp by fractional accumulation.
inline std::vector<PlantedLabel> synth_planted_labels(const SynthConfig& cfg) {
    std::vector<PlantedLabel> labels;
    double acc = 0.0;
    double taper_sum = 0.0;
    for (int j = 0; j < cfg.n_labels; ++j) {
        taper_sum += cfg.n_labels == 1
                         ? 1.0
                         : 1.5 - static_cast<double>(j) / static_cast<double>(cfg.n_labels - 1);
    }
    for (int j = 0; j < cfg.n_labels; ++j) {
        PlantedLabel p;
        p.name = detail::zero_padded("label_", j, 2);
        acc += cfg.long_range_fraction;
        if (acc >= 1.0 - 1e-12) {
            p.long_range = true;
            acc -= 1.0;
        }
        p.variable = j % cfg.n_variables;
        const int level = (j / cfg.n_variables) % 3;
        p.shift_fraction = 0.15 * static_cast<double>(level + 1);
        const double taper = cfg.n_labels == 1
                                 ? 1.0
                                 : 1.5 - static_cast<double>(j) /
                                             static_cast<double>(cfg.n_labels - 1);
        p.probability = std::min(0.95, cfg.label_rate * taper / taper_sum);
        labels.push_back(std::move(p));
    }
    return labels;
}

inline SynthCorpus generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthCorpus corpus;
    corpus.specs = VariableSpecSet(synth_variable_specs(cfg.n_variables));
    corpus.truth = synth_planted_labels(cfg);
    std::vector<std::string> names;
    for (const auto& p : corpus.truth) names.push_back(p.name);
    corpus.vocab = LabelVocabulary(std::move(names));

    corpus.episodes.resize(static_cast<std::size_t>(cfg.n_episodes));
    for (int i = 0; i < cfg.n_episodes; ++i) {
        Rng rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(i));
        Episode e;
        e.episode_id = detail::zero_padded("ep_", i, 6);

        const std::int64_t duration =
            kMinDurationMinutes +
            static_cast<std::int64_t>(rng.uniform_int(
                static_cast<std::uint64_t>(kMaxDurationMinutes - kMinDurationMinutes + 1)));

        // Activate labels; at most one active label per designated variable so
        // the planted shifts stay separable.
        std::vector<int> active_label_for_var(static_cast<std::size_t>(cfg.n_variables), -1);
        std::vector<int> active;
        for (int j = 0; j < cfg.n_labels; ++j) {
            const double u = rng.uniform01();
            const auto& p = corpus.truth[static_cast<std::size_t>(j)];
            if (u < p.probability && active_label_for_var[static_cast<std::size_t>(p.variable)] < 0) {
                active_label_for_var[static_cast<std::size_t>(p.variable)] = j;
                active.push_back(j);
            }
        }

        // Variables with an active plant are always observed; the clinical
        // staff measures what looks abnormal. Others drop out entirely with
        // missing_var_prob.
        std::vector<bool> kept(static_cast<std::size_t>(cfg.n_variables));
        bool any_kept = false;
        for (int v = 0; v < cfg.n_variables; ++v) {
            const double u = rng.uniform01();
            kept[static_cast<std::size_t>(v)] =
                active_label_for_var[static_cast<std::size_t>(v)] >= 0 || u >= cfg.missing_var_prob;
            any_kept = any_kept || kept[static_cast<std::size_t>(v)];
        }
        if (!any_kept && cfg.missing_var_prob < 1.0) {
            kept[0] = true;  // keep the episode anchored
            any_kept = true;
        }

        const std::int64_t long_window_end = duration / 4;   // [0, end)
        const std::int64_t short_window_start = std::max<std::int64_t>(0, duration - 720);

        auto value_at = [&](int v, std::int64_t minute, Rng& r) {
            const VariableSpec& spec = corpus.specs.at(v);
            const double range = spec.max - spec.min;
            double value = spec.normal;
            const int j = active_label_for_var[static_cast<std::size_t>(v)];
            if (j >= 0) {
                const auto& p = corpus.truth[static_cast<std::size_t>(j)];
                const bool in_window = p.long_range ? minute < long_window_end
                                                    : minute >= short_window_start;
                if (in_window) value += p.shift_fraction * range;
            }
            if (cfg.noise_sd > 0.0) value += cfg.noise_sd * range * r.normal();
            return value;
        };

        for (int v = 0; v < cfg.n_variables; ++v) {
            if (!kept[static_cast<std::size_t>(v)]) continue;
            const std::string& name = corpus.specs.at(v).name;
            double t_hours = 0.0;
            while (true) {
                t_hours += rng.exponential(cfg.obs_rate_per_hour);
                const std::int64_t minute = static_cast<std::int64_t>(t_hours * 60.0);
                if (minute > duration) break;
                e.observations.push_back({minute, name, value_at(v, minute, rng)});
            }
        }

        // Guarantee each active plant is observed inside its window, and pin
        // the episode's duration with a final observation.
        for (const int j : active) {
            const auto& p = corpus.truth[static_cast<std::size_t>(j)];
            if (!kept[static_cast<std::size_t>(p.variable)]) continue;  // unreachable; plants are kept
            const std::int64_t minute =
                p.long_range ? long_window_end / 2 : (short_window_start + duration) / 2;
            e.observations.push_back(
                {minute, corpus.specs.at(p.variable).name, value_at(p.variable, minute, rng)});
        }
        if (any_kept) {
            int anchor = 0;
            while (!kept[static_cast<std::size_t>(anchor)]) ++anchor;
            e.observations.push_back(
                {duration, corpus.specs.at(anchor).name, value_at(anchor, duration, rng)});
        }

        std::sort(e.observations.begin(), e.observations.end(),
                  [](const Observation& a, const Observation& b) {
                      return std::tie(a.t_minutes, a.variable) < std::tie(b.t_minutes, b.variable);
                  });
        for (const int j : active) e.labels.push_back(corpus.truth[static_cast<std::size_t>(j)].name);
        std::sort(e.labels.begin(), e.labels.end());
        corpus.episodes[static_cast<std::size_t>(i)] = std::move(e);
    }
    return corpus;
}

inline nlohmann::json truth_to_json(const SynthCorpus& corpus, const SynthConfig& cfg) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& p : corpus.truth) {
        labels.push_back({{"name", p.name},
                          {"kind", p.long_range ? "long_range" : "short_range"},
                          {"variable", corpus.specs.at(p.variable).name},
                          {"variable_index", p.variable},
                          {"shift_fraction", p.shift_fraction},
                          {"probability", p.probability}});
    }
    return {{"seed", cfg.seed},
            {"n_episodes", cfg.n_episodes},
            {"label_rate", cfg.label_rate},
            {"obs_rate_per_hour", cfg.obs_rate_per_hour},
            {"missing_var_prob", cfg.missing_var_prob},
            {"long_range_fraction", cfg.long_range_fraction},
            {"noise_sd", cfg.noise_sd},
            {"labels", std::move(labels)}};
}

}  // namespace phenoseq
