#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "phenoseq/error.hpp"
#include "phenoseq/preprocess.hpp"
#include "phenoseq/rng.hpp"

namespace phenoseq {

inline double sigmoid(double x) {
    // branch on sign so exp never overflows
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// One LSTM layer: forget-gate memory cells, no peephole connections.
// Gate order everywhere is input, forget, output, candidate.
struct LayerParams {
    Eigen::MatrixXd w_i, w_f, w_o, w_c;  // H x D input weights
    Eigen::MatrixXd u_i, u_f, u_o, u_c;  // H x H recurrent weights
    Eigen::VectorXd b_i, b_f, b_o, b_c;  // H biases

    int input_width() const { return static_cast<int>(w_i.cols()); }
    int hidden_width() const { return static_cast<int>(w_i.rows()); }
};

// Fully connected sigmoid head over the top layer's final hidden state.
struct OutputHead {
    Eigen::MatrixXd w;  // L x H_top
    Eigen::VectorXd b;  // L
};

struct LstmParams {
    std::vector<LayerParams> layers;
    OutputHead head;

    int input_width() const { return layers.empty() ? 0 : layers.front().input_width(); }
    int label_count() const { return static_cast<int>(head.b.size()); }
    std::vector<int> hidden_sizes() const {
        std::vector<int> h;
        for (const auto& l : layers) h.push_back(l.hidden_width());
        return h;
    }
};

// Gradients and momentum buffers share the parameter layout exactly.
using Gradients = LstmParams;
using Velocity = LstmParams;

// Applies fn to every tensor with an is-bias flag, in a fixed order.
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
    for (auto& l : p.layers) {
        fn(l.w_i, false); fn(l.u_i, false); fn(l.b_i, true);
        fn(l.w_f, false); fn(l.u_f, false); fn(l.b_f, true);
        fn(l.w_o, false); fn(l.u_o, false); fn(l.b_o, true);
        fn(l.w_c, false); fn(l.u_c, false); fn(l.b_c, true);
    }
    fn(p.head.w, false);
    fn(p.head.b, true);
}

template <typename A, typename B, typename C, typename Fn>
void for_each_tensor_triple(A& a, B& b, C& c, Fn&& fn) {
    if (a.layers.size() != b.layers.size() || a.layers.size() != c.layers.size()) {
        throw DataError("parameter structures disagree on layer count");
    }
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        auto &la = a.layers[i], &lb = b.layers[i], &lc = c.layers[i];
        fn(la.w_i, lb.w_i, lc.w_i, false); fn(la.u_i, lb.u_i, lc.u_i, false); fn(la.b_i, lb.b_i, lc.b_i, true);
        fn(la.w_f, lb.w_f, lc.w_f, false); fn(la.u_f, lb.u_f, lc.u_f, false); fn(la.b_f, lb.b_f, lc.b_f, true);
        fn(la.w_o, lb.w_o, lc.w_o, false); fn(la.u_o, lb.u_o, lc.u_o, false); fn(la.b_o, lb.b_o, lc.b_o, true);
        fn(la.w_c, lb.w_c, lc.w_c, false); fn(la.u_c, lb.u_c, lc.u_c, false); fn(la.b_c, lb.b_c, lc.b_c, true);
    }
    fn(a.head.w, b.head.w, c.head.w, false);
    fn(a.head.b, b.head.b, c.head.b, true);
}

inline Gradients zero_like(const LstmParams& p) {
    Gradients g = p;
    for_each_tensor(g, [](auto& t, bool) { t.setZero(); });
    return g;
}

// Weight init: uniform(-r, r) with r = 1/sqrt(fan-in) per tensor. Forget-gate
// biases start at 1.0 so the cell path is open early; all other biases at 0.
inline LstmParams init_params(int input_width, const std::vector<int>& hidden_sizes,
                              int label_count, std::uint64_t seed) {
    if (input_width < 1 || label_count < 1 || hidden_sizes.empty()) {
        throw DataError("init_params: widths and label count must be >= 1");
    }
    for (int h : hidden_sizes) {
        if (h < 1) throw DataError("init_params: hidden sizes must be >= 1");
    }
    Rng rng(seed);
    auto fill_uniform = [&rng](Eigen::MatrixXd& m) {
        const double r = 1.0 / std::sqrt(static_cast<double>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-r, r);
        }
    };
    LstmParams p;
    int d = input_width;
    for (int h : hidden_sizes) {
        LayerParams l;
        for (auto* w : {&l.w_i, &l.w_f, &l.w_o, &l.w_c}) {
            w->resize(h, d);
            fill_uniform(*w);
        }
        for (auto* u : {&l.u_i, &l.u_f, &l.u_o, &l.u_c}) {
            u->resize(h, h);
            fill_uniform(*u);
        }
        l.b_i = Eigen::VectorXd::Zero(h);
        l.b_f = Eigen::VectorXd::Ones(h);
        l.b_o = Eigen::VectorXd::Zero(h);
        l.b_c = Eigen::VectorXd::Zero(h);
        p.layers.push_back(std::move(l));
        d = h;
    }
    p.head.w.resize(label_count, d);
    fill_uniform(p.head.w);
    p.head.b = Eigen::VectorXd::Zero(label_count);
    return p;
}

// Activations of a single cell update.
struct CellStep {
    Eigen::VectorXd i, f, o, g;  // gate activations; g is the tanh candidate
    Eigen::VectorXd c, tanh_c, h;
};

// One step of the forget-gate cell:
//   i = sigma(W_i x + U_i h_prev + b_i)      f = sigma(W_f x + U_f h_prev + b_f)
//   o = sigma(W_o x + U_o h_prev + b_o)      g = tanh(W_c x + U_c h_prev + b_c)
//   c = f . c_prev + i . g                   h = o . tanh(c)
inline CellStep cell_step(const LayerParams& p, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev) {
    if (x.size() != p.input_width() || h_prev.size() != p.hidden_width() ||
        c_prev.size() != p.hidden_width()) {
        throw DataError("cell_step: input/state width mismatch");
    }
    CellStep s;
    s.i = (p.w_i * x + p.u_i * h_prev + p.b_i).unaryExpr([](double v) { return sigmoid(v); });
    s.f = (p.w_f * x + p.u_f * h_prev + p.b_f).unaryExpr([](double v) { return sigmoid(v); });
    s.o = (p.w_o * x + p.u_o * h_prev + p.b_o).unaryExpr([](double v) { return sigmoid(v); });
    s.g = (p.w_c * x + p.u_c * h_prev + p.b_c).unaryExpr([](double v) { return std::tanh(v); });
    s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
    s.tanh_c = s.c.unaryExpr([](double v) { return std::tanh(v); });
    s.h = s.o.cwiseProduct(s.tanh_c);
    return s;
}

// Per-layer activation history, one column per timestep.
struct LayerTrace {
    Eigen::MatrixXd x;                    // D x T layer input
    Eigen::MatrixXd i, f, o, g;           // H x T gate activations
    Eigen::MatrixXd c, tanh_c, h;         // H x T states
};

struct ForwardTrace {
    std::vector<LayerTrace> layers;
    Eigen::VectorXd scores;  // sigmoid output, length L
    int steps = 0;
};

// Full forward pass over a preprocessed grid. Layers are stacked: each
// consumes the hidden sequence of the one below; predictions come from the
// top layer's final hidden state only.
inline ForwardTrace forward(const LstmParams& p, const GridEpisode& grid) {
    const int steps = grid.steps();
    if (steps < 1) throw DataError("forward: episode '" + grid.episode_id + "' has no timesteps");
    if (p.layers.empty()) throw DataError("forward: no layers");
    if (grid.width() != p.input_width()) {
        throw DataError("forward: grid width " + std::to_string(grid.width()) +
                        " != input width " + std::to_string(p.input_width()));
    }

    ForwardTrace trace;
    trace.steps = steps;
    trace.layers.resize(p.layers.size());

    Eigen::MatrixXd input = grid.values.transpose();  // D x T
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const LayerParams& lp = p.layers[l];
        const int h = lp.hidden_width();
        LayerTrace& tr = trace.layers[l];
        tr.x = input;
        for (auto* m : {&tr.i, &tr.f, &tr.o, &tr.g, &tr.c, &tr.tanh_c, &tr.h}) m->resize(h, steps);

        Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
        Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
        for (int t = 0; t < steps; ++t) {
            const CellStep s = cell_step(lp, tr.x.col(t), h_prev, c_prev);
            tr.i.col(t) = s.i;
            tr.f.col(t) = s.f;
            tr.o.col(t) = s.o;
            tr.g.col(t) = s.g;
            tr.c.col(t) = s.c;
            tr.tanh_c.col(t) = s.tanh_c;
            tr.h.col(t) = s.h;
            h_prev = s.h;
            c_prev = s.c;
        }
        input = tr.h;
    }

    const Eigen::VectorXd z = p.head.w * trace.layers.back().h.col(steps - 1) + p.head.b;
    trace.scores = z.unaryExpr([](double v) { return sigmoid(v); });
    return trace;
}

// Forward pass without retaining the trace; scores match forward() exactly.
inline Eigen::VectorXd predict(const LstmParams& p, const GridEpisode& grid) {
    const int steps = grid.steps();
    if (steps < 1) throw DataError("predict: episode '" + grid.episode_id + "' has no timesteps");
    if (p.layers.empty()) throw DataError("predict: no layers");
    if (grid.width() != p.input_width()) {
        throw DataError("predict: grid width " + std::to_string(grid.width()) +
                        " != input width " + std::to_string(p.input_width()));
    }

    Eigen::MatrixXd input = grid.values.transpose();
    Eigen::MatrixXd next;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const LayerParams& lp = p.layers[l];
        const int h = lp.hidden_width();
        next.resize(h, steps);
        Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
        Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
        for (int t = 0; t < steps; ++t) {
            const CellStep s = cell_step(lp, input.col(t), h_prev, c_prev);
            next.col(t) = s.h;
            h_prev = s.h;
            c_prev = s.c;
        }
        input = next;
    }
    const Eigen::VectorXd z = p.head.w * input.col(steps - 1) + p.head.b;
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

// Backpropagation through time for the binary cross-entropy loss at the
// final step. With truncate_k set, error signals stop flowing once they are
// k steps behind the end of the sequence; parameters still accumulate
// contributions from the steps the signal reaches.
inline Gradients backward(const LstmParams& p, const ForwardTrace& trace,
                          const std::vector<std::uint8_t>& targets,
                          std::optional<int> truncate_k = std::nullopt) {
    if (trace.layers.size() != p.layers.size()) {
        throw DataError("backward: trace does not match parameter layout");
    }
    if (static_cast<int>(targets.size()) != p.label_count()) {
        throw DataError("backward: target length mismatch");
    }
    const int steps = trace.steps;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        if (trace.layers[l].h.rows() != p.layers[l].hidden_width() ||
            trace.layers[l].x.rows() != p.layers[l].input_width()) {
            throw DataError("backward: trace does not match parameter layout");
        }
    }
    int cutoff = 0;
    if (truncate_k) {
        if (*truncate_k < 1) throw DataError("backward: truncate_k must be >= 1");
        cutoff = std::max(0, steps - *truncate_k);
    }

    Gradients grads = zero_like(p);

    // d(loss)/d(head preactivation) for sigmoid + binary cross entropy
    Eigen::VectorXd dz(p.label_count());
    for (int j = 0; j < p.label_count(); ++j) {
        dz(j) = trace.scores(j) - static_cast<double>(targets[static_cast<std::size_t>(j)]);
    }
    const auto& top = trace.layers.back();
    grads.head.w.noalias() = dz * top.h.col(steps - 1).transpose();
    grads.head.b = dz;

    // Gradient w.r.t. each layer's hidden output, seeded by the layer above.
    Eigen::MatrixXd dh_above = Eigen::MatrixXd::Zero(top.h.rows(), steps);
    dh_above.col(steps - 1) = p.head.w.transpose() * dz;

    for (int l = static_cast<int>(p.layers.size()) - 1; l >= 0; --l) {
        const LayerParams& lp = p.layers[static_cast<std::size_t>(l)];
        const LayerTrace& tr = trace.layers[static_cast<std::size_t>(l)];
        LayerParams& gl = grads.layers[static_cast<std::size_t>(l)];
        const int h = lp.hidden_width();

        Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(tr.x.rows(), steps);
        Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(h);
        Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(h);
        for (int t = steps - 1; t >= cutoff; --t) {
            const Eigen::VectorXd dh = dh_above.col(t) + dh_next;
            const Eigen::VectorXd ones = Eigen::VectorXd::Ones(h);

            const Eigen::VectorXd da_o = dh.cwiseProduct(tr.tanh_c.col(t))
                                             .cwiseProduct(tr.o.col(t))
                                             .cwiseProduct(ones - tr.o.col(t));
            const Eigen::VectorXd dc =
                dh.cwiseProduct(tr.o.col(t))
                    .cwiseProduct(ones - tr.tanh_c.col(t).cwiseProduct(tr.tanh_c.col(t))) +
                dc_next;

            const Eigen::VectorXd c_prev =
                t > 0 ? Eigen::VectorXd(tr.c.col(t - 1)) : Eigen::VectorXd::Zero(h);
            const Eigen::VectorXd h_prev =
                t > 0 ? Eigen::VectorXd(tr.h.col(t - 1)) : Eigen::VectorXd::Zero(h);

            const Eigen::VectorXd da_f = dc.cwiseProduct(c_prev)
                                             .cwiseProduct(tr.f.col(t))
                                             .cwiseProduct(ones - tr.f.col(t));
            const Eigen::VectorXd da_i = dc.cwiseProduct(tr.g.col(t))
                                             .cwiseProduct(tr.i.col(t))
                                             .cwiseProduct(ones - tr.i.col(t));
            const Eigen::VectorXd da_c =
                dc.cwiseProduct(tr.i.col(t))
                    .cwiseProduct(ones - tr.g.col(t).cwiseProduct(tr.g.col(t)));

            gl.w_i.noalias() += da_i * tr.x.col(t).transpose();
            gl.w_f.noalias() += da_f * tr.x.col(t).transpose();
            gl.w_o.noalias() += da_o * tr.x.col(t).transpose();
            gl.w_c.noalias() += da_c * tr.x.col(t).transpose();
            gl.u_i.noalias() += da_i * h_prev.transpose();
            gl.u_f.noalias() += da_f * h_prev.transpose();
            gl.u_o.noalias() += da_o * h_prev.transpose();
            gl.u_c.noalias() += da_c * h_prev.transpose();
            gl.b_i += da_i;
            gl.b_f += da_f;
            gl.b_o += da_o;
            gl.b_c += da_c;

            dx.col(t).noalias() = lp.w_i.transpose() * da_i + lp.w_f.transpose() * da_f +
                                  lp.w_o.transpose() * da_o + lp.w_c.transpose() * da_c;
            dh_next.noalias() = lp.u_i.transpose() * da_i + lp.u_f.transpose() * da_f +
                                lp.u_o.transpose() * da_o + lp.u_c.transpose() * da_c;
            dc_next = dc.cwiseProduct(tr.f.col(t));
        }
        dh_above = std::move(dx);
    }
    return grads;
}

// --- checkpoint serialization ---
// JSON container: a manifest (format version, widths, label count, seed) plus
// every tensor as a row-major float64 array. Round-trips bit-exactly.

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
    }
    return a;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& a, Eigen::Index rows,
                                        Eigen::Index cols, const std::string& what) {
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows * cols) {
        throw DataError("checkpoint: tensor '" + what + "' has wrong size");
    }
    Eigen::MatrixXd m(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = a[static_cast<std::size_t>(k++)].get<double>();
    }
    return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& a, Eigen::Index n,
                                        const std::string& what) {
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != n) {
        throw DataError("checkpoint: tensor '" + what + "' has wrong size");
    }
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = a[static_cast<std::size_t>(i)].get<double>();
    return v;
}

}  // namespace detail

inline nlohmann::json lstm_to_json(const LstmParams& p, std::uint64_t seed) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : p.layers) {
        layers.push_back({{"w_i", detail::matrix_to_json(l.w_i)},
                          {"u_i", detail::matrix_to_json(l.u_i)},
                          {"b_i", detail::vector_to_json(l.b_i)},
                          {"w_f", detail::matrix_to_json(l.w_f)},
                          {"u_f", detail::matrix_to_json(l.u_f)},
                          {"b_f", detail::vector_to_json(l.b_f)},
                          {"w_o", detail::matrix_to_json(l.w_o)},
                          {"u_o", detail::matrix_to_json(l.u_o)},
                          {"b_o", detail::vector_to_json(l.b_o)},
                          {"w_c", detail::matrix_to_json(l.w_c)},
                          {"u_c", detail::matrix_to_json(l.u_c)},
                          {"b_c", detail::vector_to_json(l.b_c)}});
    }
    return {{"format_version", 1},
            {"model", "lstm"},
            {"input_width", p.input_width()},
            {"hidden_sizes", p.hidden_sizes()},
            {"label_count", p.label_count()},
            {"seed", seed},
            {"layers", std::move(layers)},
            {"head",
             {{"w", detail::matrix_to_json(p.head.w)}, {"b", detail::vector_to_json(p.head.b)}}}};
}

inline LstmParams lstm_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("model", "") != "lstm") {
        throw DataError("checkpoint: not an lstm checkpoint");
    }
    if (j.value("format_version", 0) != 1) throw DataError("checkpoint: unsupported format version");
    const int input_width = j.at("input_width").get<int>();
    const auto hidden = j.at("hidden_sizes").get<std::vector<int>>();
    const int labels = j.at("label_count").get<int>();
    const auto& jl = j.at("layers");
    if (jl.size() != hidden.size()) throw DataError("checkpoint: layer count mismatch");

    LstmParams p;
    int d = input_width;
    for (std::size_t l = 0; l < hidden.size(); ++l) {
        const int h = hidden[l];
        LayerParams lp;
        lp.w_i = detail::matrix_from_json(jl[l].at("w_i"), h, d, "w_i");
        lp.u_i = detail::matrix_from_json(jl[l].at("u_i"), h, h, "u_i");
        lp.b_i = detail::vector_from_json(jl[l].at("b_i"), h, "b_i");
        lp.w_f = detail::matrix_from_json(jl[l].at("w_f"), h, d, "w_f");
        lp.u_f = detail::matrix_from_json(jl[l].at("u_f"), h, h, "u_f");
        lp.b_f = detail::vector_from_json(jl[l].at("b_f"), h, "b_f");
        lp.w_o = detail::matrix_from_json(jl[l].at("w_o"), h, d, "w_o");
        lp.u_o = detail::matrix_from_json(jl[l].at("u_o"), h, h, "u_o");
        lp.b_o = detail::vector_from_json(jl[l].at("b_o"), h, "b_o");
        lp.w_c = detail::matrix_from_json(jl[l].at("w_c"), h, d, "w_c");
        lp.u_c = detail::matrix_from_json(jl[l].at("u_c"), h, h, "u_c");
        lp.b_c = detail::vector_from_json(jl[l].at("b_c"), h, "b_c");
        p.layers.push_back(std::move(lp));
        d = h;
    }
    p.head.w = detail::matrix_from_json(j.at("head").at("w"), labels, d, "head.w");
    p.head.b = detail::vector_from_json(j.at("head").at("b"), labels, "head.b");
    return p;
}

}  // namespace phenoseq
