#pragma once

// Temperature / top-k categorical sampling over checkpoint models. The
// generator is std::mt19937_64 (fixed per major version) and all draws go
// through rng.hpp, so a given (checkpoint, seed, config) always reproduces
// the same text.

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ghazalforge/checkpoint.hpp"
#include "ghazalforge/corpus.hpp"
#include "ghazalforge/linalg.hpp"
#include "ghazalforge/rng.hpp"

namespace ghazalforge {

struct SamplerConfig {
    double temperature = 0.8;
    std::size_t top_k = 0;      // 0 disables the top-k restriction
    std::size_t max_tokens = 400;
    std::size_t max_lines = 0;  // 0 disables the line-count stop
    std::uint64_t rng_seed = 1;
    std::string prompt;

    void validate() const {
        if (!(temperature > 0.0))
            throw std::invalid_argument("sampler: temperature must be positive");
        if (max_tokens < 1)
            throw std::invalid_argument("sampler: max_tokens must be >= 1");
    }
};

/// Greedy cutoff: below this temperature sampling degenerates to argmax.
inline constexpr double kGreedyTemperature = 1e-6;

template <typename T>
std::size_t argmax_index(const Vec<T>& v) {
    if (v.empty()) throw std::invalid_argument("argmax_index: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

/// Temperature-scaled, optionally top-k-restricted distribution. Recovers
/// logits as log(yhat), rescales by 1/T, keeps the top_k largest (ties broken
/// toward lower index) and renormalizes via softmax. Entries outside the
/// restriction come back as exact zeros.
inline Vec<double> adjusted_distribution(const Vec<double>& yhat, double temperature,
                                         std::size_t top_k = 0) {
    if (yhat.empty())
        throw std::invalid_argument("adjusted_distribution: empty distribution");
    if (!(temperature > 0.0))
        throw std::invalid_argument("adjusted_distribution: temperature must be positive");
    const std::size_t n = yhat.size();
    if (top_k > n)
        throw std::invalid_argument("adjusted_distribution: top_k exceeds vocabulary size");

    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i)
        logits[i] = std::log(std::max(yhat[i], kProbFloor)) / temperature;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (logits[a] != logits[b]) return logits[a] > logits[b];
        return a < b;
    });
    const std::size_t keep = (top_k == 0) ? n : top_k;

    double max_logit = logits[order[0]];
    double z = 0.0;
    std::vector<double> expd(n, 0.0);
    for (std::size_t r = 0; r < keep; ++r) {
        const std::size_t i = order[r];
        expd[i] = std::exp(logits[i] - max_logit);
        z += expd[i];
    }
    Vec<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = expd[i] / z;
    return out;
}

/// One categorical draw from the adjusted distribution.
inline std::size_t sample_next(const Vec<double>& yhat, const SamplerConfig& cfg,
                               std::mt19937_64& gen) {
    cfg.validate();
    if (cfg.temperature < kGreedyTemperature) return argmax_index(yhat);
    const Vec<double> p = adjusted_distribution(yhat, cfg.temperature, cfg.top_k);
    const double u = uniform_unit(gen);
    double cum = 0.0;
    std::size_t last_nonzero = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        cum += p[i];
        last_nonzero = i;
        if (u < cum) return i;
    }
    return last_nonzero;  // u landed in the rounding slack at the top
}

namespace detail {

/// Prompt text to token indices under the checkpoint vocabulary. Char-mode
/// characters missing from the vocabulary are an error naming the codepoint;
/// word-mode unknowns map to UNK.
inline std::vector<int> encode_prompt(const std::string& normalized,
                                      const Vocabulary& vocab) {
    std::vector<int> out;
    std::size_t start = 0;
    auto emit_line = [&](const std::string& line) {
        for (auto& tok : tokenize_line(line, vocab.mode)) {
            int idx = vocab.lookup(tok);
            if (idx < 0) {
                if (vocab.mode == TokenMode::word) idx = vocab.unk_index;
                else
                    throw std::runtime_error("prompt character " + codepoint_label(tok) +
                                             " is not in the model vocabulary");
            }
            out.push_back(idx);
        }
    };
    for (std::size_t p = 0; p <= normalized.size(); ++p) {
        if (p == normalized.size() || normalized[p] == '\n') {
            emit_line(normalized.substr(start, p - start));
            if (p < normalized.size()) out.push_back(vocab.line_break_index);
            start = p + 1;
        }
    }
    return out;
}

}  // namespace detail

/// Warm the state on the (normalized) prompt, then sample token by token
/// until max_tokens or max_lines line breaks. Returns prompt + continuation,
/// re-normalized, so the result is always a normalization fixed point.
inline std::string generate(const Checkpoint& ckpt, const SamplerConfig& cfg) {
    cfg.validate();
    const Vocabulary& vocab = ckpt.vocabulary;
    if (vocab.size() == 0) throw std::runtime_error("generate: empty vocabulary");
    if (cfg.top_k > vocab.size())
        throw std::invalid_argument("generate: top_k exceeds vocabulary size");

    const std::string norm_prompt = normalize_urdu(cfg.prompt, vocab.strip_diacritics);
    std::vector<int> tokens = detail::encode_prompt(norm_prompt, vocab);
    std::size_t emit_from = 0;
    if (tokens.empty()) {
        // start-of-text stand-in; warms the state but is not part of the output
        tokens.push_back(vocab.line_break_index);
        emit_from = 1;
    }

    std::mt19937_64 gen(cfg.rng_seed);
    CellState<double> state = zero_state<double>(ckpt.cell(), ckpt.hidden());
    Vec<double> yhat;
    for (int tok : tokens) {
        StepTrace<double> tr = forward_step(ckpt.params, state, tok);
        state.h = std::move(tr.h);
        if (ckpt.cell() == CellKind::lstm) state.c = std::move(tr.cell_c);
        yhat = std::move(tr.yhat);
    }

    std::size_t lines_emitted = 0;
    for (std::size_t produced = 0; produced < cfg.max_tokens; ++produced) {
        const int idx = static_cast<int>(sample_next(yhat, cfg, gen));
        tokens.push_back(idx);
        if (idx == vocab.line_break_index && cfg.max_lines > 0) {
            if (++lines_emitted >= cfg.max_lines) break;
        }
        StepTrace<double> tr = forward_step(ckpt.params, state, idx);
        state.h = std::move(tr.h);
        if (ckpt.cell() == CellKind::lstm) state.c = std::move(tr.cell_c);
        yhat = std::move(tr.yhat);
    }

    return normalize_urdu(
        decode(std::span<const int>(tokens).subspan(emit_from), vocab),
        vocab.strip_diacritics);
}

}  // namespace ghazalforge
