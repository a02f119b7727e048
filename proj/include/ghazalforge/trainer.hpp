#pragma once

// Training orchestration: truncated BPTT over corpus windows with hidden
// state carried along stride==tau chains and reset at document boundaries,
// per-epoch validation perplexity, per-epoch fixed-prompt samples, and
// latest/best checkpoint persistence.
//
// The window loop is single-threaded (state carry imposes an order); only
// validation fans out over documents, with a reduction in document order so
// the result does not depend on scheduling.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "ghazalforge/backprop.hpp"
#include "ghazalforge/checkpoint.hpp"
#include "ghazalforge/corpus.hpp"
#include "ghazalforge/optimizer.hpp"
#include "ghazalforge/parallel.hpp"
#include "ghazalforge/sampler.hpp"

namespace ghazalforge {

struct TrainingConfig {
    CellKind cell = CellKind::gru;
    std::size_t hidden = 128;
    std::size_t window_len = 64;  // tau
    std::size_t stride = 0;       // 0 means stride == window_len
    std::size_t epochs = 10;
    OptimizerConfig optimizer;
    std::uint64_t rng_seed = 1;
    int precision = 64;  // 64-bit doubles or 32-bit floats
    TokenMode mode = TokenMode::character;
    bool strip_diacritics = true;
    bool keep_blank_lines = false;
    std::size_t max_vocab = 10000;  // word mode only
    double val_fraction = 0.05;     // last fraction of documents by sorted name
    std::filesystem::path out_dir = ".";
    std::string sample_prompt;        // per-epoch sample prompt ("" = unconditional)
    std::size_t sample_tokens = 120;  // 0 disables per-epoch samples

    std::size_t effective_stride() const { return stride == 0 ? window_len : stride; }

    void validate() const {
        if (hidden < 1) throw std::invalid_argument("config: hidden size must be >= 1");
        if (window_len < 2)
            throw std::invalid_argument("config: window length must be >= 2");
        if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
        if (precision != 64 && precision != 32)
            throw std::invalid_argument("config: precision must be 64 or 32");
        if (!(val_fraction >= 0.0 && val_fraction <= 0.5))
            throw std::invalid_argument("config: val_fraction must be in [0, 0.5]");
        optimizer.validate();
    }
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // mean per-token cross entropy
    double val_ppl = 0.0;
    double grad_norm_mean = 0.0;  // pre-clip global norms over windows
    double grad_norm_max = 0.0;
    std::size_t clip_count = 0;
    double seconds = 0.0;
};

struct TrainingReport {
    std::vector<EpochStats> epochs;
    std::filesystem::path latest_path;
    std::filesystem::path best_path;
    double best_val_ppl = 0.0;
    std::size_t best_epoch = 0;
    Checkpoint final_checkpoint;
};

inline constexpr const char* kMetricsHeader =
    "epoch,train_loss,val_ppl,grad_norm_mean,grad_norm_max,clip_count,seconds";

// ---------------------------------------------------------------------------
// Perplexity

/// exp(total cross entropy / token count), teacher forced, hidden state reset
/// at every document boundary. Documents evaluate in parallel; the sums
/// reduce in document order.
template <typename T>
double evaluate_perplexity(const ModelParams<T>& params, const Vocabulary& vocab,
                           std::span<const CorpusDocument> docs) {
    if (docs.empty()) throw std::invalid_argument("evaluate_perplexity: no documents");
    const EncodedStream stream = encode(docs, vocab);
    const CellKind kind = kind_of(params);
    const std::size_t hidden = hidden_of(params);

    struct DocResult {
        double ce = 0.0;
        std::size_t tokens = 0;
    };
    std::vector<DocResult> results(stream.boundaries.size());
    std::vector<std::size_t> begins(stream.boundaries.size());
    {
        std::size_t b = 0;
        for (std::size_t d = 0; d < stream.boundaries.size(); ++d) {
            begins[d] = b;
            b = stream.boundaries[d];
        }
    }
    parallel_for(stream.boundaries.size(), [&](std::size_t d) {
        const std::size_t begin = begins[d];
        const std::size_t end = stream.boundaries[d];
        if (end - begin < 2) return;  // nothing to predict
        std::span<const int> all(stream.indices);
        std::span<const int> inputs = all.subspan(begin, end - begin - 1);
        std::span<const int> targets = all.subspan(begin + 1, end - begin - 1);
        CellState<T> state = zero_state<T>(kind, hidden);
        auto traces = forward_sequence(params, state, inputs);
        const LossValue<T> loss = cross_entropy_loss<T>(traces, targets);
        results[d].ce = static_cast<double>(loss.total);
        results[d].tokens = loss.token_count;
    });

    double total = 0.0;
    std::size_t tokens = 0;
    for (const DocResult& r : results) {
        total += r.ce;
        tokens += r.tokens;
    }
    if (tokens == 0)
        throw std::runtime_error("evaluate_perplexity: no predictable tokens");
    return std::exp(total / static_cast<double>(tokens));
}

inline double evaluate_perplexity(const Checkpoint& ckpt,
                                  std::span<const CorpusDocument> docs) {
    if (ckpt.vocabulary.norm_version != kNormalizationVersion)
        throw std::runtime_error(
            "evaluate_perplexity: checkpoint normalization version " +
            std::to_string(ckpt.vocabulary.norm_version) + " does not match this build (" +
            std::to_string(kNormalizationVersion) + ")");
    return evaluate_perplexity(ckpt.params, ckpt.vocabulary, docs);
}

// ---------------------------------------------------------------------------
// Training

namespace detail {

template <typename T>
ModelParams<double> to_double_params(const ModelParams<T>& p) {
    ModelParams<double> out =
        make_params<double>(kind_of(p), hidden_of(p), vocab_of(p));
    std::visit(
        [&](const auto& src) {
            std::visit(
                [&](auto& dst) {
                    auto ts = src.tensors();
                    auto td = dst.tensors();
                    for (std::size_t i = 0; i < ts.size(); ++i)
                        for (std::size_t k = 0; k < ts[i].size; ++k)
                            td[i].data[k] = static_cast<double>(ts[i].data[k]);
                },
                out);
        },
        p);
    return out;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

template <typename T>
TrainingReport train_impl(const TrainingConfig& cfg,
                          const std::filesystem::path& corpus_root,
                          std::ostream& metrics, std::ostream& log) {
    const auto docs = load_corpus(
        corpus_root, {cfg.strip_diacritics, cfg.keep_blank_lines}, &log);

    const std::size_t n_val =
        static_cast<std::size_t>(static_cast<double>(docs.size()) * cfg.val_fraction);
    std::span<const CorpusDocument> all(docs);
    std::span<const CorpusDocument> train_docs = all.first(docs.size() - n_val);
    std::span<const CorpusDocument> val_docs = all.last(n_val);
    if (val_docs.empty()) {
        log << "note: validation split is empty; reporting perplexity on the "
               "training documents\n";
        val_docs = train_docs;
    }

    // Vocabulary covers held-out documents too; otherwise char-mode
    // validation could hit characters the training split never saw.
    const Vocabulary vocab = build_vocabulary(all, cfg.mode, cfg.max_vocab);
    const EncodedStream stream = encode(train_docs, vocab);
    const std::vector<Window> windows =
        make_windows(stream, cfg.window_len, cfg.effective_stride());

    std::mt19937_64 gen(cfg.rng_seed);
    ModelParams<T> params = make_params<T>(cfg.cell, cfg.hidden, vocab.size());
    init_params(params, gen);

    std::filesystem::create_directories(cfg.out_dir);
    TrainingReport report;
    report.latest_path = cfg.out_dir / "latest.ckpt";
    report.best_path = cfg.out_dir / "best.ckpt";
    report.best_val_ppl = std::numeric_limits<double>::infinity();

    metrics << kMetricsHeader << '\n';
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const T lr = static_cast<T>(learning_rate_at(cfg.optimizer, epoch));

        double loss_sum = 0.0;
        std::size_t token_sum = 0;
        double norm_sum = 0.0;
        double norm_max = 0.0;
        std::size_t clip_count = 0;

        CellState<T> state = zero_state<T>(cfg.cell, cfg.hidden);
        for (std::size_t w = 0; w < windows.size(); ++w) {
            const Window& win = windows[w];
            if (!win.carry_in) state = zero_state<T>(cfg.cell, cfg.hidden);
            auto result =
                bptt(params, state, window_inputs(stream, win), window_targets(stream, win));
            if (!std::isfinite(static_cast<double>(result.loss.total)))
                throw std::runtime_error("training aborted: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", window " +
                                         std::to_string(w));
            state = std::move(result.final_state);
            loss_sum += static_cast<double>(result.loss.total);
            token_sum += result.loss.token_count;

            std::visit(
                [&](auto& g) {
                    scale_gradients(g, T(1) / static_cast<T>(result.loss.token_count));
                    const auto clip =
                        clip_gradients(g, static_cast<T>(cfg.optimizer.clip_norm));
                    norm_sum += static_cast<double>(clip.norm);
                    norm_max = std::max(norm_max, static_cast<double>(clip.norm));
                    if (clip.clipped) ++clip_count;
                },
                result.grads);
            sgd_step(params, result.grads, lr);
        }

        Checkpoint ckpt;
        ckpt.params = to_double_params(params);
        ckpt.vocabulary = vocab;
        ckpt.rng_seed = cfg.rng_seed;
        ckpt.epoch = epoch;
        ckpt.extra = {
            {"clip_norm", format_double(cfg.optimizer.clip_norm)},
            {"decay", format_double(cfg.optimizer.decay)},
            {"epochs", std::to_string(cfg.epochs)},
            {"keep_blank_lines", cfg.keep_blank_lines ? "1" : "0"},
            {"learning_rate", format_double(cfg.optimizer.learning_rate)},
            {"precision", std::to_string(cfg.precision)},
            {"stride", std::to_string(cfg.effective_stride())},
            {"val_fraction", format_double(cfg.val_fraction)},
            {"window_len", std::to_string(cfg.window_len)},
        };

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(token_sum);
        stats.val_ppl = evaluate_perplexity(params, vocab, val_docs);
        stats.grad_norm_mean = norm_sum / static_cast<double>(windows.size());
        stats.grad_norm_max = norm_max;
        stats.clip_count = clip_count;

        save_checkpoint(ckpt, report.latest_path);
        if (stats.val_ppl < report.best_val_ppl) {
            report.best_val_ppl = stats.val_ppl;
            report.best_epoch = epoch;
            save_checkpoint(ckpt, report.best_path);
        }

        if (cfg.sample_tokens > 0) {
            SamplerConfig sc;
            sc.prompt = cfg.sample_prompt;
            sc.max_tokens = cfg.sample_tokens;
            sc.rng_seed = cfg.rng_seed * 1000003ull + epoch;
            log << "sample after epoch " << epoch << ":\n"
                << generate(ckpt, sc) << "\n";
        }

        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(stats);
        metrics << stats.epoch << ',' << format_double(stats.train_loss) << ','
                << format_double(stats.val_ppl) << ','
                << format_double(stats.grad_norm_mean) << ','
                << format_double(stats.grad_norm_max) << ',' << stats.clip_count << ','
                << format_double(stats.seconds) << '\n';
        report.final_checkpoint = std::move(ckpt);
    }
    return report;
}

}  // namespace detail

inline TrainingReport train(const TrainingConfig& cfg,
                            const std::filesystem::path& corpus_root,
                            std::ostream& metrics, std::ostream& log) {
    cfg.validate();
    if (cfg.precision == 32)
        return detail::train_impl<float>(cfg, corpus_root, metrics, log);
    return detail::train_impl<double>(cfg, corpus_root, metrics, log);
}

}  // namespace ghazalforge
