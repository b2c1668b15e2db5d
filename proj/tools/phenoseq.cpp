// phenoseq: end-to-end workflow for multilabel phenotype classification on
// hourly clinical-style time series. Subcommands cover synthetic corpus
// generation, preprocessing, dataset splitting, LSTM and baseline training,
// and evaluation. All randomness flows from explicit --seed flags.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "phenoseq/baselines.hpp"
#include "phenoseq/episode.hpp"
#include "phenoseq/error.hpp"
#include "phenoseq/lstm.hpp"
#include "phenoseq/manifest.hpp"
#include "phenoseq/metrics.hpp"
#include "phenoseq/parallel.hpp"
#include "phenoseq/preprocess.hpp"
#include "phenoseq/synthgen.hpp"
#include "phenoseq/training.hpp"

namespace {

using nlohmann::json;
namespace ps = phenoseq;

int log_level() {
    static const int level = [] {
        const char* env = std::getenv("PHENOSEQ_LOG");
        if (!env) return 1;
        const std::string v(env);
        if (v == "quiet") return 0;
        if (v == "debug") return 2;
        return 1;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[phenoseq] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[phenoseq] " << msg << "\n";
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ps::DataError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& ex) {
        throw ps::DataError("'" + path + "': malformed JSON: " + ex.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ps::DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ps::DataError("write failed for '" + path + "'");
}

void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

std::vector<ps::Episode> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ps::DataError("cannot open '" + path + "'");
    try {
        return ps::parse_corpus(in);
    } catch (const ps::DataError& ex) {
        throw ps::DataError("'" + path + "': " + ex.what());
    }
}

std::vector<ps::GridEpisode> load_grids(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ps::DataError("cannot open '" + path + "'");
    try {
        return ps::parse_grids(in);
    } catch (const ps::DataError& ex) {
        throw ps::DataError("'" + path + "': " + ex.what());
    }
}

std::vector<ps::GridEpisode> subset_grids(const std::vector<ps::GridEpisode>& grids,
                                          const std::vector<std::string>& ids) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < grids.size(); ++i) index.emplace(grids[i].episode_id, i);
    std::vector<ps::GridEpisode> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw ps::DataError("split references unknown episode '" + id + "'");
        out.push_back(grids[it->second]);
    }
    return out;
}

std::vector<int> parse_hidden_sizes(const std::string& text) {
    std::vector<int> sizes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            sizes.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ps::DataError("bad --hidden value '" + text + "'");
        }
    }
    if (sizes.empty()) throw ps::DataError("bad --hidden value '" + text + "'");
    return sizes;
}

std::string model_display_name(const json& checkpoint) {
    const std::string model = checkpoint.value("model", "");
    if (model == "base_rate") return "Base rate";
    if (model == "linear") {
        return checkpoint.value("schema", "") == "raw12" ? "Linear, last 12 hours raw data"
                                                         : "Linear, engineered features";
    }
    if (model == "lstm") {
        std::string widths;
        for (const auto& h : checkpoint.value("hidden_sizes", std::vector<int>{})) {
            widths += (widths.empty() ? "" : "x") + std::to_string(h);
        }
        return "LSTM, " + std::to_string(checkpoint.value("hidden_sizes", std::vector<int>{}).size()) +
               " layers, " + widths + " nodes";
    }
    return model.empty() ? "model" : model;
}

ps::ScoreMatrix score_checkpoint(const json& checkpoint, const std::vector<ps::GridEpisode>& grids,
                                 int threads) {
    const std::string model = checkpoint.value("model", "");
    if (model == "lstm") {
        return ps::score_dataset(ps::lstm_from_json(checkpoint), grids, threads);
    }
    if (model == "linear") {
        return ps::score_dataset(ps::linear_from_json(checkpoint), grids, threads);
    }
    if (model == "base_rate") {
        return ps::score_dataset(ps::base_rate_from_json(checkpoint), grids);
    }
    throw ps::DataError("unknown model type '" + model + "' in checkpoint");
}

// --- subcommand options ---

struct SynthOpts {
    ps::SynthConfig cfg;
    std::string out_dir;
};

struct PreprocessOpts {
    std::string corpus, specs, vocab, out;
    int threads = ps::default_thread_count();
};

struct SplitOpts {
    std::string corpus, out;
    std::uint64_t seed = 0;
};

struct TrainOpts {
    std::string data, split, out, history, config;
    std::string hidden = "128,128";
    std::optional<double> lr, momentum, weight_decay, clip;
    std::optional<int> truncate, epochs, patience;
    std::optional<std::uint64_t> seed;
    bool no_clip = false;
    int threads = ps::default_thread_count();
};

struct BaselineOpts {
    std::string model, data, split, out;
    double l2 = 1e-3;
    std::uint64_t seed = 0;
    int max_iterations = 10000;
    int threads = ps::default_thread_count();
};

struct EvaluateOpts {
    std::vector<std::string> checkpoints;
    std::string scores, truth, data, split, subset = "test", vocab, out, dump_scores;
    int k = 10;
    double threshold = 0.5;
    int threads = ps::default_thread_count();
};

int run_synth(const SynthOpts& opt) {
    ps::WallTimer timer;
    const ps::SynthCorpus corpus = ps::generate(opt.cfg);
    std::filesystem::create_directories(opt.out_dir);
    const std::string corpus_path = opt.out_dir + "/corpus.jsonl";
    const std::string specs_path = opt.out_dir + "/specs.json";
    const std::string vocab_path = opt.out_dir + "/vocab.json";
    const std::string truth_path = opt.out_dir + "/truth.json";
    {
        std::ofstream out(corpus_path, std::ios::binary);
        if (!out) throw ps::DataError("cannot write '" + corpus_path + "'");
        ps::serialize_corpus(corpus.episodes, out);
    }
    write_json_file(specs_path, ps::variable_specs_to_json(corpus.specs));
    write_json_file(vocab_path, json(corpus.vocab.names()));
    write_json_file(truth_path, ps::truth_to_json(corpus, opt.cfg));

    ps::RunManifest manifest;
    manifest.command = "synth";
    manifest.seeds["seed"] = opt.cfg.seed;
    manifest.tool_version = PHENOSEQ_VERSION;
    for (const auto& p : {corpus_path, specs_path, vocab_path, truth_path}) manifest.add_output(p);
    manifest.wall_seconds = timer.seconds();
    write_json_file(opt.out_dir + "/manifest.json", manifest.to_json());
    log_info("synth: wrote " + std::to_string(corpus.episodes.size()) + " episodes to " +
             opt.out_dir);
    return 0;
}

int run_preprocess(const PreprocessOpts& opt) {
    ps::WallTimer timer;
    const auto episodes = load_corpus(opt.corpus);
    const auto specs = ps::variable_specs_from_json(read_json_file(opt.specs));
    const auto vocab = ps::vocabulary_from_json(read_json_file(opt.vocab));

    for (const auto& e : episodes) {
        const auto violations = ps::validate_episode(e, specs, vocab);
        if (!violations.empty()) throw ps::DataError(violations.front().message);
    }

    std::vector<ps::GridEpisode> grids(episodes.size());
    ps::parallel_for(episodes.size(), opt.threads, [&](std::size_t i) {
        grids[i] = ps::preprocess_pipeline(episodes[i], specs, vocab);
    });
    {
        std::ofstream out(opt.out, std::ios::binary);
        if (!out) throw ps::DataError("cannot write '" + opt.out + "'");
        ps::serialize_grids(grids, out);
    }

    ps::RunManifest manifest;
    manifest.command = "preprocess";
    manifest.tool_version = PHENOSEQ_VERSION;
    for (const auto& p : {opt.corpus, opt.specs, opt.vocab}) manifest.add_input(p);
    manifest.add_output(opt.out);
    manifest.wall_seconds = timer.seconds();
    write_json_file(opt.out + ".manifest.json", manifest.to_json());
    log_info("preprocess: wrote " + std::to_string(grids.size()) + " grids to " + opt.out);
    return 0;
}

int run_split(const SplitOpts& opt) {
    ps::WallTimer timer;
    const auto episodes = load_corpus(opt.corpus);
    const ps::DatasetSplit split = ps::split_dataset(episodes, opt.seed);
    write_json_file(opt.out, ps::split_to_json(split));

    ps::RunManifest manifest;
    manifest.command = "split";
    manifest.seeds["seed"] = opt.seed;
    manifest.tool_version = PHENOSEQ_VERSION;
    manifest.add_input(opt.corpus);
    manifest.add_output(opt.out);
    manifest.wall_seconds = timer.seconds();
    write_json_file(opt.out + ".manifest.json", manifest.to_json());
    log_info("split: " + std::to_string(split.train.size()) + "/" +
             std::to_string(split.validation.size()) + "/" + std::to_string(split.test.size()) +
             " train/validation/test");
    return 0;
}

int run_train(const TrainOpts& opt) {
    ps::WallTimer timer;
    ps::TrainConfig cfg;
    if (!opt.config.empty()) cfg = ps::train_config_from_json(read_json_file(opt.config));
    if (opt.lr) cfg.learning_rate = *opt.lr;
    if (opt.momentum) cfg.momentum = *opt.momentum;
    if (opt.weight_decay) cfg.weight_decay = *opt.weight_decay;
    if (opt.clip) cfg.clip_norm = *opt.clip;
    if (opt.no_clip) cfg.clip_norm.reset();
    if (opt.truncate) cfg.truncate_k = *opt.truncate;
    if (opt.epochs) cfg.max_epochs = *opt.epochs;
    if (opt.patience) cfg.patience = *opt.patience;
    if (opt.seed) cfg.seed = *opt.seed;
    cfg.validate();

    const auto grids = load_grids(opt.data);
    const ps::DatasetSplit split = ps::split_from_json(read_json_file(opt.split));
    const auto train_set = subset_grids(grids, split.train);
    const auto val_set = subset_grids(grids, split.validation);
    const auto hidden = parse_hidden_sizes(opt.hidden);

    log_info("train: " + std::to_string(train_set.size()) + " episodes, validation " +
             std::to_string(val_set.size()));
    const ps::TrainResult result = ps::train(train_set, val_set, hidden, cfg, opt.threads);
    log_info("train: best epoch " + std::to_string(result.history.best_epoch));
    for (std::size_t e = 0; e < result.history.train_loss.size(); ++e) {
        log_debug("epoch " + std::to_string(e) + ": loss " +
                  std::to_string(result.history.train_loss[e]) + ", val auc " +
                  std::to_string(result.history.val_micro_auc[e]));
    }

    write_json_file(opt.out, ps::lstm_to_json(result.params, cfg.seed));
    if (!opt.history.empty()) write_json_file(opt.history, ps::history_to_json(result.history));

    ps::RunManifest manifest;
    manifest.command = "train";
    if (!opt.config.empty()) {
        manifest.config_paths.push_back(opt.config);
        manifest.add_input(opt.config);
    }
    manifest.seeds["seed"] = cfg.seed;
    manifest.tool_version = PHENOSEQ_VERSION;
    manifest.add_input(opt.data);
    manifest.add_input(opt.split);
    manifest.add_output(opt.out);
    if (!opt.history.empty()) manifest.add_output(opt.history);
    manifest.wall_seconds = timer.seconds();
    write_json_file(opt.out + ".manifest.json", manifest.to_json());
    return 0;
}

int run_baseline(const BaselineOpts& opt) {
    ps::WallTimer timer;
    const auto grids = load_grids(opt.data);
    const ps::DatasetSplit split = ps::split_from_json(read_json_file(opt.split));
    const auto train_set = subset_grids(grids, split.train);
    if (train_set.empty()) throw ps::DataError("baseline: empty training split");

    json checkpoint;
    if (opt.model == "base-rate") {
        checkpoint = ps::base_rate_to_json(ps::fit_base_rate(train_set));
    } else if (opt.model == "linear-raw12" || opt.model == "linear-engineered") {
        const ps::FeatureSchema schema = opt.model == "linear-raw12"
                                             ? ps::FeatureSchema::Raw12
                                             : ps::FeatureSchema::Engineered;
        const auto features = ps::extract_features(train_set, schema, opt.threads);
        const Eigen::MatrixXd labels = ps::label_matrix(train_set);
        const ps::LinearModel model =
            ps::fit_logistic(features, labels, opt.l2, opt.seed, opt.max_iterations, opt.threads);
        checkpoint = ps::linear_to_json(model);
    } else {
        throw ps::DataError("unknown baseline model '" + opt.model +
                            "' (expected base-rate|linear-raw12|linear-engineered)");
    }
    write_json_file(opt.out, checkpoint);

    ps::RunManifest manifest;
    manifest.command = "baseline";
    manifest.seeds["seed"] = opt.seed;
    manifest.tool_version = PHENOSEQ_VERSION;
    manifest.add_input(opt.data);
    manifest.add_input(opt.split);
    manifest.add_output(opt.out);
    manifest.wall_seconds = timer.seconds();
    write_json_file(opt.out + ".manifest.json", manifest.to_json());
    log_info("baseline: wrote " + opt.model + " checkpoint to " + opt.out);
    return 0;
}

ps::ScoreMatrix scores_from_files(const EvaluateOpts& opt, std::vector<std::string>& label_names) {
    const json js = read_json_file(opt.scores);
    const json jt = read_json_file(opt.truth);
    const auto ids_s = js.at("episode_ids").get<std::vector<std::string>>();
    const auto ids_t = jt.at("episode_ids").get<std::vector<std::string>>();
    if (ids_s != ids_t) throw ps::DataError("evaluate: score/truth episode ids disagree");
    label_names = jt.at("labels").get<std::vector<std::string>>();

    const auto& s_rows = js.at("scores");
    const auto& t_rows = jt.at("truth");
    if (s_rows.size() != ids_s.size() || t_rows.size() != ids_s.size()) {
        throw ps::DataError("evaluate: row count does not match episode ids");
    }
    ps::ScoreMatrix m;
    m.scores.resize(static_cast<Eigen::Index>(ids_s.size()),
                    static_cast<Eigen::Index>(label_names.size()));
    m.truth.resize(m.scores.rows(), m.scores.cols());
    for (Eigen::Index i = 0; i < m.scores.rows(); ++i) {
        const auto& sr = s_rows[static_cast<std::size_t>(i)];
        const auto& tr = t_rows[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(sr.size()) != m.scores.cols() ||
            static_cast<Eigen::Index>(tr.size()) != m.scores.cols()) {
            throw ps::DataError("evaluate: ragged score/truth rows");
        }
        for (Eigen::Index j = 0; j < m.scores.cols(); ++j) {
            m.scores(i, j) = sr[static_cast<std::size_t>(j)].get<double>();
            m.truth(i, j) = tr[static_cast<std::size_t>(j)].get<double>();
        }
    }
    return m;
}

int run_evaluate(const EvaluateOpts& opt) {
    ps::WallTimer timer;
    ps::RunManifest manifest;
    manifest.command = "evaluate";
    manifest.tool_version = PHENOSEQ_VERSION;

    std::vector<std::pair<std::string, ps::MetricsReport>> rows;
    json reports = json::array();

    if (!opt.scores.empty() || !opt.truth.empty()) {
        if (opt.scores.empty() || opt.truth.empty() || !opt.checkpoints.empty()) {
            throw ps::DataError("evaluate: use either --scores with --truth, or --checkpoint");
        }
        std::vector<std::string> label_names;
        const ps::ScoreMatrix m = scores_from_files(opt, label_names);
        const ps::LabelVocabulary vocab(label_names);
        const ps::MetricsReport report = ps::build_report(m, vocab, opt.threshold, opt.k);
        rows.emplace_back("scores", report);
        json jr = ps::report_to_json(report);
        jr["model"] = "scores";
        reports.push_back(std::move(jr));
        manifest.add_input(opt.scores);
        manifest.add_input(opt.truth);
    } else {
        if (opt.checkpoints.empty() || opt.data.empty()) {
            throw ps::DataError("evaluate: need --checkpoint and --data (or --scores/--truth)");
        }
        auto grids = load_grids(opt.data);
        manifest.add_input(opt.data);
        if (!opt.split.empty()) {
            const ps::DatasetSplit split = ps::split_from_json(read_json_file(opt.split));
            manifest.add_input(opt.split);
            if (opt.subset == "train") {
                grids = subset_grids(grids, split.train);
            } else if (opt.subset == "validation") {
                grids = subset_grids(grids, split.validation);
            } else if (opt.subset == "test") {
                grids = subset_grids(grids, split.test);
            } else if (opt.subset != "all") {
                throw ps::DataError("evaluate: unknown subset '" + opt.subset + "'");
            }
        }
        if (grids.empty()) throw ps::DataError("evaluate: no episodes selected");

        ps::LabelVocabulary vocab;
        if (!opt.vocab.empty()) {
            vocab = ps::vocabulary_from_json(read_json_file(opt.vocab));
            manifest.add_input(opt.vocab);
        } else {
            std::vector<std::string> names;
            for (std::size_t j = 0; j < grids.front().label_vec.size(); ++j) {
                names.push_back("label_" + std::to_string(j));
            }
            vocab = ps::LabelVocabulary(std::move(names));
        }

        json dumped_scores = json::array();
        for (const auto& path : opt.checkpoints) {
            const json checkpoint = read_json_file(path);
            manifest.add_input(path);
            const ps::ScoreMatrix m = score_checkpoint(checkpoint, grids, opt.threads);
            const ps::MetricsReport report = ps::build_report(m, vocab, opt.threshold, opt.k);
            const std::string name = model_display_name(checkpoint);
            rows.emplace_back(name, report);
            json jr = ps::report_to_json(report);
            jr["model"] = name;
            jr["checkpoint"] = path;
            reports.push_back(std::move(jr));
            if (!opt.dump_scores.empty()) {
                json rows_json = json::array();
                for (Eigen::Index i = 0; i < m.scores.rows(); ++i) {
                    json row = json::array();
                    for (Eigen::Index j = 0; j < m.scores.cols(); ++j) row.push_back(m.scores(i, j));
                    rows_json.push_back(std::move(row));
                }
                json ids = json::array();
                for (const auto& g : grids) ids.push_back(g.episode_id);
                dumped_scores.push_back({{"checkpoint", path},
                                         {"episode_ids", std::move(ids)},
                                         {"scores", std::move(rows_json)}});
            }
        }
        if (!opt.dump_scores.empty()) write_json_file(opt.dump_scores, dumped_scores);
    }

    std::cout << ps::render_table(rows);
    if (!opt.out.empty()) {
        write_json_file(opt.out, json{{"models", reports}, {"k", opt.k}, {"threshold", opt.threshold}});
        manifest.add_output(opt.out);
        manifest.wall_seconds = timer.seconds();
        write_json_file(opt.out + ".manifest.json", manifest.to_json());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilabel phenotype classification from clinical-style time series"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(PHENOSEQ_VERSION));

    SynthOpts synth_opts;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted signals");
    synth->add_option("--out", synth_opts.out_dir, "Output directory")->required();
    synth->add_option("--episodes", synth_opts.cfg.n_episodes, "Number of episodes");
    synth->add_option("--variables", synth_opts.cfg.n_variables, "Number of variables");
    synth->add_option("--labels", synth_opts.cfg.n_labels, "Number of labels");
    synth->add_option("--label-rate", synth_opts.cfg.label_rate, "Mean labels per episode");
    synth->add_option("--obs-rate", synth_opts.cfg.obs_rate_per_hour,
                      "Observations per variable per hour");
    synth->add_option("--missing-var-prob", synth_opts.cfg.missing_var_prob,
                      "Probability a variable is entirely absent");
    synth->add_option("--long-range-fraction", synth_opts.cfg.long_range_fraction,
                      "Fraction of labels with first-quarter signal");
    synth->add_option("--noise-sd", synth_opts.cfg.noise_sd, "Observation noise (fraction of range)");
    synth->add_option("--seed", synth_opts.cfg.seed, "Generator seed");

    PreprocessOpts pre_opts;
    auto* pre = app.add_subcommand("preprocess", "Resample, fill, impute, and rescale a corpus");
    pre->add_option("--corpus", pre_opts.corpus, "Corpus JSONL")->required();
    pre->add_option("--specs", pre_opts.specs, "Variable specs JSON")->required();
    pre->add_option("--vocab", pre_opts.vocab, "Vocabulary JSON")->required();
    pre->add_option("--out", pre_opts.out, "Output grids JSONL")->required();
    pre->add_option("--threads", pre_opts.threads, "Worker threads");

    SplitOpts split_opts;
    auto* split = app.add_subcommand("split", "Deterministic 80/10/10 dataset split");
    split->add_option("--corpus", split_opts.corpus, "Corpus JSONL")->required();
    split->add_option("--seed", split_opts.seed, "Shuffle seed");
    split->add_option("--out", split_opts.out, "Output split JSON")->required();

    TrainOpts train_opts;
    auto* train = app.add_subcommand("train", "Train the stacked LSTM");
    train->add_option("--data", train_opts.data, "Preprocessed grids JSONL")->required();
    train->add_option("--split", train_opts.split, "Split JSON")->required();
    train->add_option("--out", train_opts.out, "Output checkpoint JSON")->required();
    train->add_option("--history", train_opts.history, "Output history JSON");
    train->add_option("--config", train_opts.config, "Train config JSON");
    train->add_option("--hidden", train_opts.hidden, "Hidden layer widths, e.g. 128,128");
    train->add_option("--lr", train_opts.lr, "Learning rate");
    train->add_option("--momentum", train_opts.momentum, "Momentum");
    train->add_option("--weight-decay", train_opts.weight_decay, "L2^2 weight decay");
    train->add_option("--clip", train_opts.clip, "Gradient norm clip");
    train->add_flag("--no-clip", train_opts.no_clip, "Disable gradient clipping");
    train->add_option("--truncate", train_opts.truncate, "Truncated BPTT horizon");
    train->add_option("--epochs", train_opts.epochs, "Maximum epochs");
    train->add_option("--patience", train_opts.patience, "Early stopping patience");
    train->add_option("--seed", train_opts.seed, "Init and shuffle seed");
    train->add_option("--threads", train_opts.threads, "Worker threads (validation scoring)");

    BaselineOpts base_opts;
    auto* base = app.add_subcommand("baseline", "Fit a baseline model");
    base->add_option("--model", base_opts.model, "base-rate|linear-raw12|linear-engineered")
        ->required();
    base->add_option("--data", base_opts.data, "Preprocessed grids JSONL")->required();
    base->add_option("--split", base_opts.split, "Split JSON")->required();
    base->add_option("--out", base_opts.out, "Output checkpoint JSON")->required();
    base->add_option("--l2", base_opts.l2, "L2^2 regularization strength");
    base->add_option("--seed", base_opts.seed, "Solver seed");
    base->add_option("--max-iterations", base_opts.max_iterations, "Gradient descent iteration cap");
    base->add_option("--threads", base_opts.threads, "Worker threads");

    EvaluateOpts eval_opts;
    auto* eval = app.add_subcommand("evaluate", "Compute metrics and print the results table");
    eval->add_option("--checkpoint", eval_opts.checkpoints, "Model checkpoint(s) to evaluate");
    eval->add_option("--scores", eval_opts.scores, "Precomputed scores JSON");
    eval->add_option("--truth", eval_opts.truth, "Truth JSON for --scores");
    eval->add_option("--data", eval_opts.data, "Preprocessed grids JSONL");
    eval->add_option("--split", eval_opts.split, "Split JSON");
    eval->add_option("--subset", eval_opts.subset, "train|validation|test|all (default test)");
    eval->add_option("--vocab", eval_opts.vocab, "Vocabulary JSON for label names");
    eval->add_option("--k", eval_opts.k, "Precision cutoff");
    eval->add_option("--threshold", eval_opts.threshold, "F1 decision threshold");
    eval->add_option("--out", eval_opts.out, "Output report JSON");
    eval->add_option("--dump-scores", eval_opts.dump_scores, "Write model scores JSON");
    eval->add_option("--threads", eval_opts.threads, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) return run_synth(synth_opts);
        if (*pre) return run_preprocess(pre_opts);
        if (*split) return run_split(split_opts);
        if (*train) return run_train(train_opts);
        if (*base) return run_baseline(base_opts);
        if (*eval) return run_evaluate(eval_opts);
    } catch (const phenoseq::NumericError& ex) {
        std::cerr << "numeric error: " << ex.what() << "\n";
        return 3;
    } catch (const phenoseq::DataError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    return 0;
}
