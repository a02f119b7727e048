#pragma once

// Forward passes for the three recurrent cell types. Inputs are token
// indices (one-hot realized as a column read of the input weights); every
// step returns a full trace of activations for the backward pass.

#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "ghazalforge/linalg.hpp"
#include "ghazalforge/rng.hpp"

namespace ghazalforge {

enum class CellKind { rnn, lstm, gru };

inline const char* to_string(CellKind k) {
    switch (k) {
        case CellKind::rnn: return "rnn";
        case CellKind::lstm: return "lstm";
        case CellKind::gru: return "gru";
    }
    return "?";
}

inline CellKind cell_kind_from_string(const std::string& s) {
    if (s == "rnn") return CellKind::rnn;
    if (s == "lstm") return CellKind::lstm;
    if (s == "gru") return CellKind::gru;
    throw std::runtime_error("unknown cell kind: '" + s + "'");
}

/// Named view of one parameter tensor's flat storage.
template <typename T>
struct TensorRef {
    const char* name;
    T* data;
    std::size_t size;
};

// ---------------------------------------------------------------------------
// Parameter sets. Tensor order is fixed and is the serialization order.

template <typename T>
struct RnnParams {
    using value_type = T;

    Mat<T> U;  // hidden x vocab, input weights
    Mat<T> W;  // hidden x hidden, recurrent weights
    Mat<T> V;  // vocab x hidden, output weights
    Vec<T> b;  // hidden bias
    Vec<T> c;  // output bias

    RnnParams() = default;
    RnnParams(std::size_t hidden, std::size_t vocab)
        : U(hidden, vocab), W(hidden, hidden), V(vocab, hidden), b(hidden), c(vocab) {}

    std::size_t hidden() const { return W.rows(); }
    std::size_t vocab() const { return V.rows(); }

    std::vector<TensorRef<T>> tensors() { return make_tensors(*this); }
    std::vector<TensorRef<const T>> tensors() const { return make_tensors(*this); }

private:
    template <class Self>
    static auto make_tensors(Self& s) {
        using TT = std::conditional_t<std::is_const_v<Self>, const T, T>;
        return std::vector<TensorRef<TT>>{
            {"U", s.U.data(), s.U.size()}, {"W", s.W.data(), s.W.size()},
            {"V", s.V.data(), s.V.size()}, {"b", s.b.data(), s.b.size()},
            {"c", s.c.data(), s.c.size()},
        };
    }
};

template <typename T>
struct LstmParams {
    using value_type = T;

    Mat<T> U_f, U_i, U_o, U_g;  // per-gate input weights, hidden x vocab
    Mat<T> W_f, W_i, W_o, W_g;  // per-gate recurrent weights, hidden x hidden
    Vec<T> b_f, b_i, b_o, b_g;  // per-gate biases
    Mat<T> V;                   // vocab x hidden output projection
    Vec<T> c;                   // output bias

    LstmParams() = default;
    LstmParams(std::size_t hidden, std::size_t vocab)
        : U_f(hidden, vocab), U_i(hidden, vocab), U_o(hidden, vocab), U_g(hidden, vocab),
          W_f(hidden, hidden), W_i(hidden, hidden), W_o(hidden, hidden), W_g(hidden, hidden),
          b_f(hidden), b_i(hidden), b_o(hidden), b_g(hidden),
          V(vocab, hidden), c(vocab) {}

    std::size_t hidden() const { return W_f.rows(); }
    std::size_t vocab() const { return V.rows(); }

    std::vector<TensorRef<T>> tensors() { return make_tensors(*this); }
    std::vector<TensorRef<const T>> tensors() const { return make_tensors(*this); }

private:
    template <class Self>
    static auto make_tensors(Self& s) {
        using TT = std::conditional_t<std::is_const_v<Self>, const T, T>;
        return std::vector<TensorRef<TT>>{
            {"U_f", s.U_f.data(), s.U_f.size()}, {"U_i", s.U_i.data(), s.U_i.size()},
            {"U_o", s.U_o.data(), s.U_o.size()}, {"U_g", s.U_g.data(), s.U_g.size()},
            {"W_f", s.W_f.data(), s.W_f.size()}, {"W_i", s.W_i.data(), s.W_i.size()},
            {"W_o", s.W_o.data(), s.W_o.size()}, {"W_g", s.W_g.data(), s.W_g.size()},
            {"b_f", s.b_f.data(), s.b_f.size()}, {"b_i", s.b_i.data(), s.b_i.size()},
            {"b_o", s.b_o.data(), s.b_o.size()}, {"b_g", s.b_g.data(), s.b_g.size()},
            {"V", s.V.data(), s.V.size()},       {"c", s.c.data(), s.c.size()},
        };
    }
};

template <typename T>
struct GruParams {
    using value_type = T;

    Mat<T> U_r, U_u, U_g;  // reset / update / candidate input weights
    Mat<T> W_r, W_u, W_g;  // recurrent weights
    Vec<T> b_r, b_u, b_g;  // biases
    Mat<T> V;              // vocab x hidden output projection
    Vec<T> c;              // output bias

    GruParams() = default;
    GruParams(std::size_t hidden, std::size_t vocab)
        : U_r(hidden, vocab), U_u(hidden, vocab), U_g(hidden, vocab),
          W_r(hidden, hidden), W_u(hidden, hidden), W_g(hidden, hidden),
          b_r(hidden), b_u(hidden), b_g(hidden),
          V(vocab, hidden), c(vocab) {}

    std::size_t hidden() const { return W_r.rows(); }
    std::size_t vocab() const { return V.rows(); }

    std::vector<TensorRef<T>> tensors() { return make_tensors(*this); }
    std::vector<TensorRef<const T>> tensors() const { return make_tensors(*this); }

private:
    template <class Self>
    static auto make_tensors(Self& s) {
        using TT = std::conditional_t<std::is_const_v<Self>, const T, T>;
        return std::vector<TensorRef<TT>>{
            {"U_r", s.U_r.data(), s.U_r.size()}, {"U_u", s.U_u.data(), s.U_u.size()},
            {"U_g", s.U_g.data(), s.U_g.size()},
            {"W_r", s.W_r.data(), s.W_r.size()}, {"W_u", s.W_u.data(), s.W_u.size()},
            {"W_g", s.W_g.data(), s.W_g.size()},
            {"b_r", s.b_r.data(), s.b_r.size()}, {"b_u", s.b_u.data(), s.b_u.size()},
            {"b_g", s.b_g.data(), s.b_g.size()},
            {"V", s.V.data(), s.V.size()},       {"c", s.c.data(), s.c.size()},
        };
    }
};

template <typename T>
using ModelParams = std::variant<RnnParams<T>, LstmParams<T>, GruParams<T>>;

template <typename T>
CellKind kind_of(const ModelParams<T>& p) {
    return static_cast<CellKind>(p.index());
}

template <typename T>
std::size_t hidden_of(const ModelParams<T>& p) {
    return std::visit([](const auto& q) { return q.hidden(); }, p);
}

template <typename T>
std::size_t vocab_of(const ModelParams<T>& p) {
    return std::visit([](const auto& q) { return q.vocab(); }, p);
}

template <typename T>
ModelParams<T> make_params(CellKind kind, std::size_t hidden, std::size_t vocab) {
    switch (kind) {
        case CellKind::rnn: return RnnParams<T>(hidden, vocab);
        case CellKind::lstm: return LstmParams<T>(hidden, vocab);
        case CellKind::gru: return GruParams<T>(hidden, vocab);
    }
    throw std::invalid_argument("make_params: bad cell kind");
}

/// Two params objects have the same tensor layout (names and sizes).
template <class P>
bool congruent(const P& a, const P& b) {
    auto ta = a.tensors();
    auto tb = b.tensors();
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i)
        if (ta[i].size != tb[i].size) return false;
    return true;
}

/// Exact trainable-scalar count including the output layer.
inline std::size_t param_count(CellKind kind, std::size_t hidden, std::size_t vocab) {
    if (hidden < 1 || vocab < 1)
        throw std::invalid_argument("param_count: sizes must be >= 1");
    const std::size_t gate = hidden * vocab + hidden * hidden + hidden;
    const std::size_t head = vocab * hidden + vocab;
    switch (kind) {
        case CellKind::rnn: return gate + head;
        case CellKind::lstm: return 4 * gate + head;
        case CellKind::gru: return 3 * gate + head;
    }
    throw std::invalid_argument("param_count: bad cell kind");
}

// ---------------------------------------------------------------------------
// Initialization

/// Every tensor entry drawn from U(lo, hi); biases included. For gradient checks.
template <class P>
void randomize_uniform(P& p, typename P::value_type lo, typename P::value_type hi,
                       std::mt19937_64& gen) {
    using T = typename P::value_type;
    for (auto& t : p.tensors())
        for (std::size_t i = 0; i < t.size; ++i)
            t.data[i] = static_cast<T>(uniform_range(gen, lo, hi));
}

namespace detail {

template <typename T>
void init_fan_in(Mat<T>& m, std::mt19937_64& gen) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<T>(uniform_range(gen, -bound, bound));
}

}  // namespace detail

/// Training init: U(-1/sqrt(fan_in), +1/sqrt(fan_in)) per weight matrix, biases zero.
template <typename T>
void init_params(RnnParams<T>& p, std::mt19937_64& gen) {
    detail::init_fan_in(p.U, gen);
    detail::init_fan_in(p.W, gen);
    detail::init_fan_in(p.V, gen);
    p.b.fill(T(0));
    p.c.fill(T(0));
}

template <typename T>
void init_params(LstmParams<T>& p, std::mt19937_64& gen) {
    for (Mat<T>* m : {&p.U_f, &p.U_i, &p.U_o, &p.U_g, &p.W_f, &p.W_i, &p.W_o, &p.W_g, &p.V})
        detail::init_fan_in(*m, gen);
    for (Vec<T>* v : {&p.b_f, &p.b_i, &p.b_o, &p.b_g, &p.c}) v->fill(T(0));
}

template <typename T>
void init_params(GruParams<T>& p, std::mt19937_64& gen) {
    for (Mat<T>* m : {&p.U_r, &p.U_u, &p.U_g, &p.W_r, &p.W_u, &p.W_g, &p.V})
        detail::init_fan_in(*m, gen);
    for (Vec<T>* v : {&p.b_r, &p.b_u, &p.b_g, &p.c}) v->fill(T(0));
}

template <typename T>
void init_params(ModelParams<T>& p, std::mt19937_64& gen) {
    std::visit([&](auto& q) { init_params(q, gen); }, p);
}

// ---------------------------------------------------------------------------
// Forward pass

/// Cached per-step activations; the backward pass consumes these.
template <typename T>
struct StepTrace {
    int x_index = -1;
    Vec<T> a;          // pre-activation (vanilla rnn)
    Vec<T> h;          // hidden state
    Vec<T> cell_c;     // lstm cell state
    Vec<T> f, i, o_gate;        // lstm gates
    Vec<T> r, u;                // gru gates
    Vec<T> candidate;           // lstm new-memory / gru candidate state
    Vec<T> o;          // output logits
    Vec<T> yhat;       // softmax probabilities
};

/// Recurrent state threaded between steps; `c` is used by the LSTM only.
template <typename T>
struct CellState {
    Vec<T> h;
    Vec<T> c;
};

template <typename T>
CellState<T> zero_state(CellKind kind, std::size_t hidden) {
    CellState<T> s;
    s.h = Vec<T>(hidden);
    if (kind == CellKind::lstm) s.c = Vec<T>(hidden);
    return s;
}

namespace detail {

template <typename T>
void check_token(int x_index, std::size_t vocab, const char* op) {
    if (x_index < 0 || static_cast<std::size_t>(x_index) >= vocab) {
        std::ostringstream msg;
        msg << op << ": token index " << x_index << " out of range [0, " << vocab << ")";
        throw std::invalid_argument(msg.str());
    }
}

template <typename T>
void check_state(const Vec<T>& h_prev, std::size_t hidden, const char* op) {
    if (h_prev.size() != hidden) {
        std::ostringstream msg;
        msg << op << ": state has length " << h_prev.size() << ", expected " << hidden;
        throw std::invalid_argument(msg.str());
    }
}

// preact = U[:, x] + W h_prev + bias
template <typename T>
Vec<T> gate_preactivation(const Mat<T>& U, const Mat<T>& W, const Vec<T>& bias,
                          const Vec<T>& h_prev, int x_index) {
    Vec<T> a = matvec(W, h_prev);
    for (std::size_t k = 0; k < a.size(); ++k)
        a[k] += U(k, static_cast<std::size_t>(x_index)) + bias[k];
    return a;
}

// o = c + V h, yhat = softmax(o); same affine head for every cell type
template <typename T>
void output_head(const Mat<T>& V, const Vec<T>& c, StepTrace<T>& tr) {
    tr.o = matvec(V, tr.h);
    add_inplace(tr.o, c);
    tr.yhat = softmax(tr.o);
}

}  // namespace detail

// a = b + W h_prev + U x ; h = tanh(a) ; o = c + V h ; yhat = softmax(o)
template <typename T>
StepTrace<T> rnn_forward_step(const RnnParams<T>& p, const Vec<T>& h_prev, int x_index) {
    detail::check_token<T>(x_index, p.vocab(), "rnn_forward_step");
    detail::check_state(h_prev, p.hidden(), "rnn_forward_step");
    StepTrace<T> tr;
    tr.x_index = x_index;
    tr.a = detail::gate_preactivation(p.U, p.W, p.b, h_prev, x_index);
    tr.h = tanh_vec(tr.a);
    detail::output_head(p.V, p.c, tr);
    return tr;
}

template <typename T>
StepTrace<T> lstm_forward_step(const LstmParams<T>& p, const Vec<T>& h_prev,
                               const Vec<T>& c_prev, int x_index) {
    detail::check_token<T>(x_index, p.vocab(), "lstm_forward_step");
    detail::check_state(h_prev, p.hidden(), "lstm_forward_step");
    detail::check_state(c_prev, p.hidden(), "lstm_forward_step");
    StepTrace<T> tr;
    tr.x_index = x_index;
    tr.f = sigmoid_vec(detail::gate_preactivation(p.U_f, p.W_f, p.b_f, h_prev, x_index));
    tr.i = sigmoid_vec(detail::gate_preactivation(p.U_i, p.W_i, p.b_i, h_prev, x_index));
    tr.o_gate = sigmoid_vec(detail::gate_preactivation(p.U_o, p.W_o, p.b_o, h_prev, x_index));
    tr.candidate = tanh_vec(detail::gate_preactivation(p.U_g, p.W_g, p.b_g, h_prev, x_index));
    tr.cell_c = Vec<T>(p.hidden());
    for (std::size_t k = 0; k < p.hidden(); ++k)
        tr.cell_c[k] = tr.f[k] * c_prev[k] + tr.i[k] * tr.candidate[k];
    tr.h = Vec<T>(p.hidden());
    for (std::size_t k = 0; k < p.hidden(); ++k)
        tr.h[k] = tr.o_gate[k] * tanh_clamped(tr.cell_c[k]);
    detail::output_head(p.V, p.c, tr);
    return tr;
}

// candidate = tanh(U_g x + W_g (r o h_prev) + b_g) ; h = u o h_prev + (1-u) o candidate
template <typename T>
StepTrace<T> gru_forward_step(const GruParams<T>& p, const Vec<T>& h_prev, int x_index) {
    detail::check_token<T>(x_index, p.vocab(), "gru_forward_step");
    detail::check_state(h_prev, p.hidden(), "gru_forward_step");
    StepTrace<T> tr;
    tr.x_index = x_index;
    tr.r = sigmoid_vec(detail::gate_preactivation(p.U_r, p.W_r, p.b_r, h_prev, x_index));
    tr.u = sigmoid_vec(detail::gate_preactivation(p.U_u, p.W_u, p.b_u, h_prev, x_index));
    tr.candidate = tanh_vec(
        detail::gate_preactivation(p.U_g, p.W_g, p.b_g, hadamard(tr.r, h_prev), x_index));
    tr.h = Vec<T>(p.hidden());
    for (std::size_t k = 0; k < p.hidden(); ++k)
        tr.h[k] = tr.u[k] * h_prev[k] + (T(1) - tr.u[k]) * tr.candidate[k];
    detail::output_head(p.V, p.c, tr);
    return tr;
}

template <typename T>
StepTrace<T> forward_step(const ModelParams<T>& p, const CellState<T>& state, int x_index) {
    return std::visit(
        [&](const auto& q) -> StepTrace<T> {
            using Q = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<Q, RnnParams<T>>)
                return rnn_forward_step(q, state.h, x_index);
            else if constexpr (std::is_same_v<Q, LstmParams<T>>)
                return lstm_forward_step(q, state.h, state.c, x_index);
            else
                return gru_forward_step(q, state.h, x_index);
        },
        p);
}

template <typename T>
std::vector<StepTrace<T>> forward_sequence(const RnnParams<T>& p, const Vec<T>& h0,
                                           std::span<const int> inputs) {
    if (inputs.empty()) throw std::invalid_argument("forward_sequence: empty input");
    std::vector<StepTrace<T>> traces;
    traces.reserve(inputs.size());
    const Vec<T>* h = &h0;
    for (int x : inputs) {
        traces.push_back(rnn_forward_step(p, *h, x));
        h = &traces.back().h;
    }
    return traces;
}

template <typename T>
std::vector<StepTrace<T>> forward_sequence(const LstmParams<T>& p, const Vec<T>& h0,
                                           const Vec<T>& c0, std::span<const int> inputs) {
    if (inputs.empty()) throw std::invalid_argument("forward_sequence: empty input");
    std::vector<StepTrace<T>> traces;
    traces.reserve(inputs.size());
    const Vec<T>* h = &h0;
    const Vec<T>* c = &c0;
    for (int x : inputs) {
        traces.push_back(lstm_forward_step(p, *h, *c, x));
        h = &traces.back().h;
        c = &traces.back().cell_c;
    }
    return traces;
}

template <typename T>
std::vector<StepTrace<T>> forward_sequence(const GruParams<T>& p, const Vec<T>& h0,
                                           std::span<const int> inputs) {
    if (inputs.empty()) throw std::invalid_argument("forward_sequence: empty input");
    std::vector<StepTrace<T>> traces;
    traces.reserve(inputs.size());
    const Vec<T>* h = &h0;
    for (int x : inputs) {
        traces.push_back(gru_forward_step(p, *h, x));
        h = &traces.back().h;
    }
    return traces;
}

template <typename T>
std::vector<StepTrace<T>> forward_sequence(const ModelParams<T>& p, const CellState<T>& s0,
                                           std::span<const int> inputs) {
    return std::visit(
        [&](const auto& q) {
            using Q = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<Q, LstmParams<T>>)
                return forward_sequence(q, s0.h, s0.c, inputs);
            else
                return forward_sequence(q, s0.h, inputs);
        },
        p);
}

}  // namespace ghazalforge
