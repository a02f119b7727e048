#pragma once

// Plain SGD with a per-epoch multiplicative learning-rate decay. Clipping
// lives in backprop.hpp; the trainer applies clip then step.

#include "ghazalforge/cells.hpp"

namespace ghazalforge {

struct OptimizerConfig {
    double learning_rate = 0.05;
    double decay = 1.0;      // lr at epoch e is learning_rate * decay^e
    double clip_norm = 5.0;  // global-norm threshold

    void validate() const {
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("optimizer: learning_rate must be positive");
        if (!(decay > 0.0) || decay > 1.0)
            throw std::invalid_argument("optimizer: decay must be in (0, 1]");
        if (!(clip_norm > 0.0))
            throw std::invalid_argument("optimizer: clip_norm must be positive");
    }
};

inline double learning_rate_at(const OptimizerConfig& cfg, std::size_t epoch) {
    double lr = cfg.learning_rate;
    for (std::size_t e = 0; e < epoch; ++e) lr *= cfg.decay;
    return lr;
}

/// params -= lr * grads, elementwise across every tensor.
template <class P>
void sgd_step(P& params, const P& grads, typename P::value_type lr) {
    if (!congruent(params, grads))
        throw std::invalid_argument("sgd_step: parameter/gradient shape mismatch");
    auto tp = params.tensors();
    auto tg = grads.tensors();
    for (std::size_t ti = 0; ti < tp.size(); ++ti)
        for (std::size_t i = 0; i < tp[ti].size; ++i)
            tp[ti].data[i] -= lr * tg[ti].data[i];
}

template <typename T>
void sgd_step(ModelParams<T>& params, const ModelParams<T>& grads, T lr) {
    if (params.index() != grads.index())
        throw std::invalid_argument("sgd_step: cell kind mismatch");
    std::visit(
        [&](auto& p) {
            using Q = std::decay_t<decltype(p)>;
            sgd_step(p, std::get<Q>(grads), lr);
        },
        params);
}

/// Scale a gradient set in place, e.g. to convert a window-total gradient
/// into a per-token mean before the SGD step.
template <class P>
void scale_gradients(P& grads, typename P::value_type factor) {
    for (auto& t : grads.tensors())
        for (std::size_t i = 0; i < t.size; ++i) t.data[i] *= factor;
}

}  // namespace ghazalforge
