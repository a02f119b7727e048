#pragma once

// Cross-entropy loss and backpropagation through time for all three cells,
// plus the finite-difference machinery used to verify the analytic gradients.
//
// Gradients accumulate the TOTAL loss over the window (sum over steps, not
// mean); callers that want per-token scaling divide afterwards. One-hot
// inputs mean dU only touches the columns of the tokens actually seen.

#include <algorithm>
#include <functional>
#include <span>
#include <vector>

#include "ghazalforge/cells.hpp"
#include "ghazalforge/linalg.hpp"

namespace ghazalforge {

template <typename T>
struct LossValue {
    T total = T(0);
    std::vector<T> per_step;
    std::size_t token_count = 0;
    std::size_t clamp_count = 0;  // steps where the probability floor engaged

    T mean() const {
        if (token_count == 0) throw std::logic_error("LossValue::mean: no tokens");
        return total / static_cast<T>(token_count);
    }
};

namespace detail {

template <typename T>
void check_targets(std::span<const StepTrace<T>> traces, std::span<const int> targets,
                   const char* op) {
    if (traces.empty()) {
        throw std::invalid_argument(std::string(op) + ": empty sequence");
    }
    if (traces.size() != targets.size()) {
        std::ostringstream msg;
        msg << op << ": " << traces.size() << " steps but " << targets.size() << " targets";
        throw std::invalid_argument(msg.str());
    }
    const std::size_t vocab = traces.front().yhat.size();
    for (std::size_t t = 0; t < targets.size(); ++t)
        check_token<T>(targets[t], vocab, op);
}

}  // namespace detail

template <typename T>
LossValue<T> cross_entropy_loss(std::span<const StepTrace<T>> traces,
                                std::span<const int> targets) {
    detail::check_targets(traces, targets, "cross_entropy_loss");
    LossValue<T> loss;
    loss.per_step.reserve(traces.size());
    for (std::size_t t = 0; t < traces.size(); ++t) {
        T p = traces[t].yhat[static_cast<std::size_t>(targets[t])];
        if (p < static_cast<T>(kProbFloor)) {
            p = static_cast<T>(kProbFloor);
            ++loss.clamp_count;
        }
        const T l = -std::log(p);
        loss.per_step.push_back(l);
        loss.total += l;
    }
    loss.token_count = traces.size();
    return loss;
}

/// dL/do for one step: softmax output minus the one-hot target.
template <typename T>
Vec<T> output_gradient(const Vec<T>& yhat, int target) {
    detail::check_token<T>(target, yhat.size(), "output_gradient");
    Vec<T> g(yhat.size());
    for (std::size_t k = 0; k < yhat.size(); ++k) g[k] = yhat[k];
    g[static_cast<std::size_t>(target)] -= T(1);
    return g;
}

template <class P>
struct BpttResult {
    using value_type = typename P::value_type;
    LossValue<value_type> loss;
    P grads;  // same shapes as the parameters
    CellState<value_type> final_state;
};

template <typename T>
struct BpttResult<ModelParams<T>> {
    using value_type = T;
    LossValue<T> loss;
    ModelParams<T> grads;
    CellState<T> final_state;
};

// ---------------------------------------------------------------------------
// Vanilla RNN.
//
// Single right-to-left sweep. dh_t picks up V^T do_t locally plus the
// recurrent term W^T da_{t+1} carried from the step after it; da = (1-h^2) o dh
// then feeds b, W (outer with h_{t-1}) and the x_t column of U.

template <typename T>
BpttResult<RnnParams<T>> bptt(const RnnParams<T>& p, const Vec<T>& h0,
                              std::span<const int> inputs, std::span<const int> targets) {
    auto traces = forward_sequence(p, h0, inputs);
    detail::check_targets<T>(traces, targets, "bptt");

    BpttResult<RnnParams<T>> out;
    out.loss = cross_entropy_loss<T>(traces, targets);
    out.grads = RnnParams<T>(p.hidden(), p.vocab());
    out.final_state.h = traces.back().h;

    RnnParams<T>& g = out.grads;
    Vec<T> dh_recur(p.hidden());  // W^T da from the step to the right
    for (std::size_t t = traces.size(); t-- > 0;) {
        const StepTrace<T>& tr = traces[t];
        const Vec<T>& h_prev = (t == 0) ? h0 : traces[t - 1].h;

        Vec<T> dout = output_gradient(tr.yhat, targets[t]);
        add_inplace(g.c, dout);
        add_outer(g.V, dout, tr.h);

        Vec<T> dh = matvec_transposed(p.V, dout);
        add_inplace(dh, dh_recur);

        Vec<T> da(p.hidden());
        for (std::size_t k = 0; k < p.hidden(); ++k)
            da[k] = (T(1) - tr.h[k] * tr.h[k]) * dh[k];

        add_inplace(g.b, da);
        add_outer(g.W, da, h_prev);
        add_column(g.U, static_cast<std::size_t>(tr.x_index), da);

        dh_recur = matvec_transposed(p.W, da);
    }
    return out;
}

// ---------------------------------------------------------------------------
// LSTM. Two streams run backwards: dh (through the output and the gates) and
// dc (through the cell-state highway, picking up dh o o_gate o tanh'(c)).

template <typename T>
BpttResult<LstmParams<T>> bptt(const LstmParams<T>& p, const Vec<T>& h0, const Vec<T>& c0,
                               std::span<const int> inputs, std::span<const int> targets) {
    auto traces = forward_sequence(p, h0, c0, inputs);
    detail::check_targets<T>(traces, targets, "bptt");

    BpttResult<LstmParams<T>> out;
    out.loss = cross_entropy_loss<T>(traces, targets);
    out.grads = LstmParams<T>(p.hidden(), p.vocab());
    out.final_state.h = traces.back().h;
    out.final_state.c = traces.back().cell_c;

    LstmParams<T>& g = out.grads;
    const std::size_t H = p.hidden();
    Vec<T> dh_next(H);
    Vec<T> dc_next(H);
    for (std::size_t t = traces.size(); t-- > 0;) {
        const StepTrace<T>& tr = traces[t];
        const Vec<T>& h_prev = (t == 0) ? h0 : traces[t - 1].h;
        const Vec<T>& c_prev = (t == 0) ? c0 : traces[t - 1].cell_c;
        const std::size_t x = static_cast<std::size_t>(tr.x_index);

        Vec<T> dout = output_gradient(tr.yhat, targets[t]);
        add_inplace(g.c, dout);
        add_outer(g.V, dout, tr.h);

        Vec<T> dh = matvec_transposed(p.V, dout);
        add_inplace(dh, dh_next);

        Vec<T> df(H), di(H), dog(H), dg(H), dc(H);
        for (std::size_t k = 0; k < H; ++k) {
            const T tc = tanh_clamped(tr.cell_c[k]);
            dc[k] = dc_next[k] + dh[k] * tr.o_gate[k] * (T(1) - tc * tc);
            dog[k] = dh[k] * tc * tr.o_gate[k] * (T(1) - tr.o_gate[k]);
            df[k] = dc[k] * c_prev[k] * tr.f[k] * (T(1) - tr.f[k]);
            di[k] = dc[k] * tr.candidate[k] * tr.i[k] * (T(1) - tr.i[k]);
            dg[k] = dc[k] * tr.i[k] * (T(1) - tr.candidate[k] * tr.candidate[k]);
        }

        add_inplace(g.b_f, df);
        add_inplace(g.b_i, di);
        add_inplace(g.b_o, dog);
        add_inplace(g.b_g, dg);
        add_outer(g.W_f, df, h_prev);
        add_outer(g.W_i, di, h_prev);
        add_outer(g.W_o, dog, h_prev);
        add_outer(g.W_g, dg, h_prev);
        add_column(g.U_f, x, df);
        add_column(g.U_i, x, di);
        add_column(g.U_o, x, dog);
        add_column(g.U_g, x, dg);

        dh_next = matvec_transposed(p.W_f, df);
        add_inplace(dh_next, matvec_transposed(p.W_i, di));
        add_inplace(dh_next, matvec_transposed(p.W_o, dog));
        add_inplace(dh_next, matvec_transposed(p.W_g, dg));
        for (std::size_t k = 0; k < H; ++k) dc_next[k] = dc[k] * tr.f[k];
    }
    return out;
}

// ---------------------------------------------------------------------------
// GRU. h_prev reaches h_t four ways: the u o h_prev leak, the reset-gated
// candidate path W_g (r o h_prev), and both gate preactivations.

template <typename T>
BpttResult<GruParams<T>> bptt(const GruParams<T>& p, const Vec<T>& h0,
                              std::span<const int> inputs, std::span<const int> targets) {
    auto traces = forward_sequence(p, h0, inputs);
    detail::check_targets<T>(traces, targets, "bptt");

    BpttResult<GruParams<T>> out;
    out.loss = cross_entropy_loss<T>(traces, targets);
    out.grads = GruParams<T>(p.hidden(), p.vocab());
    out.final_state.h = traces.back().h;

    GruParams<T>& g = out.grads;
    const std::size_t H = p.hidden();
    Vec<T> dh_next(H);
    for (std::size_t t = traces.size(); t-- > 0;) {
        const StepTrace<T>& tr = traces[t];
        const Vec<T>& h_prev = (t == 0) ? h0 : traces[t - 1].h;
        const std::size_t x = static_cast<std::size_t>(tr.x_index);

        Vec<T> dout = output_gradient(tr.yhat, targets[t]);
        add_inplace(g.c, dout);
        add_outer(g.V, dout, tr.h);

        Vec<T> dh = matvec_transposed(p.V, dout);
        add_inplace(dh, dh_next);

        Vec<T> du(H), dg_pre(H);
        for (std::size_t k = 0; k < H; ++k) {
            du[k] = dh[k] * (h_prev[k] - tr.candidate[k]) * tr.u[k] * (T(1) - tr.u[k]);
            dg_pre[k] =
                dh[k] * (T(1) - tr.u[k]) * (T(1) - tr.candidate[k] * tr.candidate[k]);
        }
        Vec<T> wg_back = matvec_transposed(p.W_g, dg_pre);
        Vec<T> dr(H);
        for (std::size_t k = 0; k < H; ++k)
            dr[k] = wg_back[k] * h_prev[k] * tr.r[k] * (T(1) - tr.r[k]);

        add_inplace(g.b_r, dr);
        add_inplace(g.b_u, du);
        add_inplace(g.b_g, dg_pre);
        add_outer(g.W_r, dr, h_prev);
        add_outer(g.W_u, du, h_prev);
        add_outer(g.W_g, dg_pre, hadamard(tr.r, h_prev));
        add_column(g.U_r, x, dr);
        add_column(g.U_u, x, du);
        add_column(g.U_g, x, dg_pre);

        dh_next = matvec_transposed(p.W_r, dr);
        add_inplace(dh_next, matvec_transposed(p.W_u, du));
        for (std::size_t k = 0; k < H; ++k)
            dh_next[k] += dh[k] * tr.u[k] + wg_back[k] * tr.r[k];
    }
    return out;
}

template <typename T>
BpttResult<ModelParams<T>> bptt(const ModelParams<T>& p, const CellState<T>& s0,
                                std::span<const int> inputs, std::span<const int> targets) {
    return std::visit(
        [&](const auto& q) -> BpttResult<ModelParams<T>> {
            using Q = std::decay_t<decltype(q)>;
            BpttResult<Q> r;
            if constexpr (std::is_same_v<Q, LstmParams<T>>)
                r = bptt(q, s0.h, s0.c, inputs, targets);
            else
                r = bptt(q, s0.h, inputs, targets);
            BpttResult<ModelParams<T>> out;
            out.loss = std::move(r.loss);
            out.grads = std::move(r.grads);
            out.final_state = std::move(r.final_state);
            return out;
        },
        p);
}

// ---------------------------------------------------------------------------
// Clipping

template <typename T>
struct ClipResult {
    bool clipped = false;
    T norm = T(0);  // global norm before any rescaling
};

template <class P>
typename P::value_type gradient_norm(const P& grads) {
    using T = typename P::value_type;
    double sq = 0.0;
    for (const auto& t : grads.tensors()) {
        for (std::size_t i = 0; i < t.size; ++i) {
            const double v = static_cast<double>(t.data[i]);
            if (!std::isfinite(v)) {
                std::ostringstream msg;
                msg << "gradient_norm: non-finite value in tensor '" << t.name
                    << "' at index " << i;
                throw std::runtime_error(msg.str());
            }
            sq += v * v;
        }
    }
    return static_cast<T>(std::sqrt(sq));
}

/// Rescale all gradients in place so the global norm is at most max_norm.
template <class P>
ClipResult<typename P::value_type> clip_gradients(P& grads,
                                                  typename P::value_type max_norm) {
    using T = typename P::value_type;
    if (!(max_norm > T(0)))
        throw std::invalid_argument("clip_gradients: max_norm must be positive");
    ClipResult<T> res;
    res.norm = gradient_norm(grads);
    if (res.norm > max_norm) {
        const T scale = max_norm / res.norm;
        for (auto& t : grads.tensors())
            for (std::size_t i = 0; i < t.size; ++i) t.data[i] *= scale;
        res.clipped = true;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Finite differences. Perturbs one scalar at a time; central differences.
// Double precision only; the loss callable must be deterministic, which is
// checked by evaluating the base point twice.

template <class P, class F>
P finite_difference_gradient(const P& params, F&& loss_fn, double eps) {
    using T = typename P::value_type;
    static_assert(std::is_same_v<T, double>,
                  "finite differences are only meaningful in double precision");
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw std::invalid_argument("finite_difference_gradient: eps outside [1e-7, 1e-3]");

    P work = params;
    const double base0 = loss_fn(static_cast<const P&>(work));
    const double base1 = loss_fn(static_cast<const P&>(work));
    if (base0 != base1)
        throw std::runtime_error(
            "finite_difference_gradient: loss function is not deterministic");

    P grads = params;
    auto wt = work.tensors();
    auto gt = grads.tensors();
    for (std::size_t ti = 0; ti < wt.size(); ++ti) {
        for (std::size_t i = 0; i < wt[ti].size; ++i) {
            const double saved = wt[ti].data[i];
            wt[ti].data[i] = saved + eps;
            const double up = loss_fn(static_cast<const P&>(work));
            wt[ti].data[i] = saved - eps;
            const double down = loss_fn(static_cast<const P&>(work));
            wt[ti].data[i] = saved;
            gt[ti].data[i] = (up - down) / (2.0 * eps);
        }
    }
    return grads;
}

struct GradientComparison {
    double max_rel_err = 0.0;
    std::string tensor;       // tensor holding the worst entry
    std::size_t index = 0;    // flat index within that tensor
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Worst relative error |a-b| / max(|a|, |b|, 1e-8) across all entries.
template <class P>
GradientComparison compare_gradients(const P& analytic, const P& numeric) {
    auto ta = analytic.tensors();
    auto tb = numeric.tensors();
    if (ta.size() != tb.size())
        throw std::invalid_argument("compare_gradients: tensor count mismatch");
    GradientComparison cmp;
    for (std::size_t ti = 0; ti < ta.size(); ++ti) {
        if (ta[ti].size != tb[ti].size)
            throw std::invalid_argument("compare_gradients: tensor shape mismatch");
        for (std::size_t i = 0; i < ta[ti].size; ++i) {
            const double a = static_cast<double>(ta[ti].data[i]);
            const double b = static_cast<double>(tb[ti].data[i]);
            const double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
            const double rel = std::fabs(a - b) / denom;
            if (rel > cmp.max_rel_err) {
                cmp.max_rel_err = rel;
                cmp.tensor = ta[ti].name;
                cmp.index = i;
                cmp.analytic = a;
                cmp.numeric = b;
            }
        }
    }
    return cmp;
}

/// One randomized analytic-vs-numeric comparison. Parameters and the initial
/// state are drawn from U(-0.5, 0.5), tokens uniformly from the vocabulary.
inline GradientComparison gradient_check_random(CellKind kind, std::size_t hidden,
                                                std::size_t vocab, std::size_t tau,
                                                std::uint64_t seed, double eps = 1e-5) {
    std::mt19937_64 gen(seed);
    ModelParams<double> params = make_params<double>(kind, hidden, vocab);
    std::visit([&](auto& q) { randomize_uniform(q, -0.5, 0.5, gen); }, params);

    CellState<double> s0 = zero_state<double>(kind, hidden);
    for (std::size_t k = 0; k < hidden; ++k) s0.h[k] = uniform_range(gen, -0.5, 0.5);
    if (kind == CellKind::lstm)
        for (std::size_t k = 0; k < hidden; ++k) s0.c[k] = uniform_range(gen, -0.5, 0.5);

    std::vector<int> inputs(tau), targets(tau);
    for (std::size_t t = 0; t < tau; ++t) {
        inputs[t] = static_cast<int>(uniform_index(gen, vocab));
        targets[t] = static_cast<int>(uniform_index(gen, vocab));
    }

    auto analytic = bptt(params, s0, inputs, targets);
    return std::visit(
        [&](const auto& q) {
            using Q = std::decay_t<decltype(q)>;
            auto loss_fn = [&](const Q& cand) {
                std::vector<StepTrace<double>> traces;
                if constexpr (std::is_same_v<Q, LstmParams<double>>)
                    traces = forward_sequence(cand, s0.h, s0.c, std::span<const int>(inputs));
                else
                    traces = forward_sequence(cand, s0.h, std::span<const int>(inputs));
                return cross_entropy_loss<double>(traces, targets).total;
            };
            Q numeric = finite_difference_gradient(q, loss_fn, eps);
            return compare_gradients(std::get<Q>(analytic.grads), numeric);
        },
        params);
}

}  // namespace ghazalforge
