#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "phenoseq/error.hpp"
#include "phenoseq/rng.hpp"

namespace phenoseq {

// Shortest valid stay is 12 hours, longest 30 days.
constexpr std::int64_t kMinDurationMinutes = 720;
constexpr std::int64_t kMaxDurationMinutes = 43200;

struct Observation {
    std::int64_t t_minutes = 0;
    std::string variable;
    double value = 0.0;

    friend bool operator==(const Observation& a, const Observation& b) {
        return a.t_minutes == b.t_minutes && a.variable == b.variable && a.value == b.value;
    }
};

struct Episode {
    std::string episode_id;
    std::vector<Observation> observations;  // sorted by (t_minutes, variable)
    std::vector<std::string> labels;        // sorted, distinct

    // Minutes from episode start to the last observation. 0 when empty.
    std::int64_t duration_minutes() const {
        std::int64_t m = 0;
        for (const auto& o : observations) m = std::max(m, o.t_minutes);
        return m;
    }

    bool has_label(const std::string& name) const {
        return std::binary_search(labels.begin(), labels.end(), name);
    }

    friend bool operator==(const Episode& a, const Episode& b) {
        return a.episode_id == b.episode_id && a.observations == b.observations &&
               a.labels == b.labels;
    }
};

// Fixed, ordered label universe. Array order defines the index of every
// binary label vector in the pipeline.
class LabelVocabulary {
public:
    LabelVocabulary() = default;

    explicit LabelVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
                throw DataError("vocabulary: duplicate label name '" + names_[i] + "'");
            }
        }
    }

    const std::vector<std::string>& names() const { return names_; }
    int size() const { return static_cast<int>(names_.size()); }

    std::optional<int> index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
};

struct VariableSpec {
    std::string name;
    double min = 0.0;
    double max = 1.0;
    double normal = 0.5;
};

// Ordered variable metadata; the order defines grid column indices.
class VariableSpecSet {
public:
    VariableSpecSet() = default;

    explicit VariableSpecSet(std::vector<VariableSpec> specs) : specs_(std::move(specs)) {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const auto& s = specs_[i];
            if (!(s.min < s.max)) {
                throw DataError("variable spec '" + s.name + "': min must be < max");
            }
            if (s.normal < s.min || s.normal > s.max) {
                throw DataError("variable spec '" + s.name + "': normal outside [min, max]");
            }
            if (!column_.emplace(s.name, static_cast<int>(i)).second) {
                throw DataError("variable spec: duplicate name '" + s.name + "'");
            }
        }
    }

    const std::vector<VariableSpec>& specs() const { return specs_; }
    const VariableSpec& at(int column) const { return specs_[static_cast<std::size_t>(column)]; }
    int size() const { return static_cast<int>(specs_.size()); }

    std::optional<int> column_of(const std::string& name) const {
        auto it = column_.find(name);
        if (it == column_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<VariableSpec> specs_;
    std::unordered_map<std::string, int> column_;
};

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

enum class ViolationKind { TooShort, TooLong, UnknownVariable, UnknownLabel };

struct Violation {
    ViolationKind kind;
    std::string message;
};

namespace detail {

inline void require_fields(const nlohmann::json& obj,
                           std::initializer_list<const char*> fields,
                           const std::string& where) {
    for (const char* f : fields) {
        if (!obj.contains(f)) throw DataError(where + ": missing field '" + f + "'");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* f : fields) {
            if (it.key() == f) { known = true; break; }
        }
        if (!known) throw DataError(where + ": unknown field '" + it.key() + "'");
    }
}

inline Episode episode_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw DataError(where + ": episode must be a JSON object");
    require_fields(j, {"episode_id", "observations", "labels"}, where);
    if (!j["episode_id"].is_string()) throw DataError(where + ": episode_id must be a string");
    if (!j["observations"].is_array()) throw DataError(where + ": observations must be an array");
    if (!j["labels"].is_array()) throw DataError(where + ": labels must be an array");

    Episode e;
    e.episode_id = j["episode_id"].get<std::string>();
    e.observations.reserve(j["observations"].size());
    for (const auto& jo : j["observations"]) {
        if (!jo.is_object()) throw DataError(where + ": observation must be an object");
        require_fields(jo, {"t_minutes", "variable", "value"}, where);
        if (!jo["t_minutes"].is_number_integer()) {
            throw DataError(where + ": t_minutes must be an integer");
        }
        Observation o;
        o.t_minutes = jo["t_minutes"].get<std::int64_t>();
        if (o.t_minutes < 0) throw DataError(where + ": t_minutes must be >= 0");
        if (!jo["variable"].is_string()) throw DataError(where + ": variable must be a string");
        o.variable = jo["variable"].get<std::string>();
        if (!jo["value"].is_number()) throw DataError(where + ": value must be a number");
        o.value = jo["value"].get<double>();
        if (!std::isfinite(o.value)) throw DataError(where + ": value must be finite");
        e.observations.push_back(std::move(o));
    }
    for (const auto& jl : j["labels"]) {
        if (!jl.is_string()) throw DataError(where + ": labels must be strings");
        e.labels.push_back(jl.get<std::string>());
    }
    std::sort(e.observations.begin(), e.observations.end(),
              [](const Observation& a, const Observation& b) {
                  return std::tie(a.t_minutes, a.variable) < std::tie(b.t_minutes, b.variable);
              });
    std::sort(e.labels.begin(), e.labels.end());
    e.labels.erase(std::unique(e.labels.begin(), e.labels.end()), e.labels.end());
    return e;
}

inline nlohmann::json episode_to_json(const Episode& e) {
    nlohmann::json obs = nlohmann::json::array();
    for (const auto& o : e.observations) {
        obs.push_back({{"t_minutes", o.t_minutes}, {"variable", o.variable}, {"value", o.value}});
    }
    return {{"episode_id", e.episode_id}, {"observations", std::move(obs)}, {"labels", e.labels}};
}

}  // namespace detail

// Parses a JSON-Lines corpus, one episode object per line. Blank lines are
// permitted. Episode ids must be unique; observations come back sorted by
// (t_minutes, variable).
inline std::vector<Episode> parse_corpus(std::istream& in) {
    std::vector<Episode> episodes;
    std::unordered_set<std::string> seen_ids;
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
        Episode e = detail::episode_from_json(j, where);
        if (!seen_ids.insert(e.episode_id).second) {
            throw DataError(where + ": duplicate episode_id '" + e.episode_id + "'");
        }
        episodes.push_back(std::move(e));
    }
    return episodes;
}

inline void serialize_corpus(const std::vector<Episode>& episodes, std::ostream& out) {
    for (const auto& e : episodes) out << detail::episode_to_json(e).dump() << '\n';
}

// Checks corpus-level constraints. Violations are data, not failures: the
// report is empty iff the episode is usable downstream.
inline std::vector<Violation> validate_episode(const Episode& e, const VariableSpecSet& specs,
                                               const LabelVocabulary& vocab) {
    std::vector<Violation> out;
    const std::int64_t dur = e.duration_minutes();
    if (dur < kMinDurationMinutes) {
        out.push_back({ViolationKind::TooShort,
                       "episode '" + e.episode_id + "' too short: " + std::to_string(dur) +
                           " min < " + std::to_string(kMinDurationMinutes)});
    }
    if (dur > kMaxDurationMinutes) {
        out.push_back({ViolationKind::TooLong,
                       "episode '" + e.episode_id + "' too long: " + std::to_string(dur) +
                           " min > " + std::to_string(kMaxDurationMinutes)});
    }
    std::unordered_set<std::string> reported;
    for (const auto& o : e.observations) {
        if (!specs.column_of(o.variable) && reported.insert(o.variable).second) {
            out.push_back({ViolationKind::UnknownVariable,
                           "episode '" + e.episode_id + "': unknown variable '" + o.variable + "'"});
        }
    }
    for (const auto& l : e.labels) {
        if (!vocab.index_of(l)) {
            out.push_back({ViolationKind::UnknownLabel,
                           "episode '" + e.episode_id + "': unknown label '" + l + "'"});
        }
    }
    return out;
}

// 80/10/10 split: episode ids are sorted lexicographically, shuffled with the
// seed, then sliced as floor(0.8 N) / floor(0.1 N) / remainder. Independent of
// the corpus file order.
inline DatasetSplit split_dataset(const std::vector<Episode>& episodes, std::uint64_t seed) {
    const std::size_t n = episodes.size();
    if (n < 10) {
        throw DataError("split_dataset: need at least 10 episodes, got " + std::to_string(n));
    }
    std::vector<std::string> ids;
    ids.reserve(n);
    for (const auto& e : episodes) ids.push_back(e.episode_id);
    std::sort(ids.begin(), ids.end());
    Rng rng(seed);
    rng.shuffle(ids);

    const std::size_t n_train = static_cast<std::size_t>(0.8 * static_cast<double>(n));
    const std::size_t n_val = static_cast<std::size_t>(0.1 * static_cast<double>(n));
    DatasetSplit split;
    split.train.assign(ids.begin(), ids.begin() + n_train);
    split.validation.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    split.test.assign(ids.begin() + n_train + n_val, ids.end());
    return split;
}

// Fraction of episodes carrying each label, in vocabulary order.
inline std::vector<double> label_incidence(const std::vector<Episode>& episodes,
                                           const LabelVocabulary& vocab) {
    std::vector<double> counts(static_cast<std::size_t>(vocab.size()), 0.0);
    for (const auto& e : episodes) {
        for (const auto& l : e.labels) {
            if (auto idx = vocab.index_of(l)) counts[static_cast<std::size_t>(*idx)] += 1.0;
        }
    }
    if (!episodes.empty()) {
        const double n = static_cast<double>(episodes.size());
        for (auto& c : counts) c /= n;
    }
    return counts;
}

// --- JSON file helpers for specs, vocabulary, and splits ---

inline VariableSpecSet variable_specs_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw DataError("variable specs: expected a JSON array");
    std::vector<VariableSpec> specs;
    for (const auto& js : j) {
        detail::require_fields(js, {"name", "min", "max", "normal"}, "variable spec");
        VariableSpec s;
        s.name = js["name"].get<std::string>();
        s.min = js["min"].get<double>();
        s.max = js["max"].get<double>();
        s.normal = js["normal"].get<double>();
        if (!std::isfinite(s.min) || !std::isfinite(s.max) || !std::isfinite(s.normal)) {
            throw DataError("variable spec '" + s.name + "': non-finite bound");
        }
        specs.push_back(std::move(s));
    }
    return VariableSpecSet(std::move(specs));
}

inline nlohmann::json variable_specs_to_json(const VariableSpecSet& specs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : specs.specs()) {
        arr.push_back({{"name", s.name}, {"min", s.min}, {"max", s.max}, {"normal", s.normal}});
    }
    return arr;
}

inline LabelVocabulary vocabulary_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw DataError("vocabulary: expected a JSON array of strings");
    std::vector<std::string> names;
    for (const auto& jn : j) {
        if (!jn.is_string()) throw DataError("vocabulary: expected a JSON array of strings");
        names.push_back(jn.get<std::string>());
    }
    return LabelVocabulary(std::move(names));
}

inline nlohmann::json split_to_json(const DatasetSplit& s) {
    return {{"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

inline DatasetSplit split_from_json(const nlohmann::json& j) {
    detail::require_fields(j, {"train", "validation", "test"}, "split");
    DatasetSplit s;
    s.train = j["train"].get<std::vector<std::string>>();
    s.validation = j["validation"].get<std::vector<std::string>>();
    s.test = j["test"].get<std::vector<std::string>>();
    return s;
}

}  // namespace phenoseq
