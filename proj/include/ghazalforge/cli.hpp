#pragma once

// Command-line surface: train / generate / eval / gradcheck / corpus-stats.
// Exit codes: 0 success, 1 usage error, 2 data or model error. Payload goes
// to the out stream, diagnostics to err, so the whole surface is testable
// in-process without spawning a binary.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ghazalforge/backprop.hpp"
#include "ghazalforge/checkpoint.hpp"
#include "ghazalforge/corpus.hpp"
#include "ghazalforge/sampler.hpp"
#include "ghazalforge/trainer.hpp"

namespace ghazalforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

struct TrainArgs {
    std::string corpus;
    std::string out_dir = ".";
    std::string cell = "gru";
    std::size_t hidden = 128;
    std::size_t window = 64;
    std::size_t stride = 0;
    std::size_t epochs = 10;
    double lr = 0.05;
    double decay = 1.0;
    double clip = 5.0;
    std::uint64_t seed = 1;
    int precision = 64;
    std::string tokenize = "char";
    bool keep_diacritics = false;
    bool keep_blank_lines = false;
    std::size_t max_vocab = 10000;
    double val_fraction = 0.05;
    std::string sample_prompt;
    std::size_t sample_tokens = 120;
};

struct GenerateArgs {
    std::string ckpt;
    std::string prompt;
    double temperature = 0.8;
    std::size_t top_k = 0;
    std::size_t max_tokens = 400;
    std::size_t lines = 0;
    std::uint64_t seed = 1;
    std::string out_file;
};

struct EvalArgs {
    std::string ckpt;
    std::string corpus;
    std::string tokenize;  // optional; must agree with the checkpoint
    bool keep_blank_lines = false;
};

struct GradcheckArgs {
    std::string cell = "all";
    std::size_t hidden = 6;
    std::size_t vocab = 10;
    std::size_t steps = 5;
    std::size_t instances = 5;
    std::uint64_t seed = 1;
    // 2e-4 balances truncation against cancellation noise; at 1e-5 the
    // difference quotient loses a digit and near-zero entries look wrong.
    double eps = 2e-4;
    double tol = 1e-5;
};

struct StatsArgs {
    std::string corpus;
    std::string tokenize = "char";
    bool keep_diacritics = false;
    bool keep_blank_lines = false;
    std::size_t max_vocab = 10000;
};

inline int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    TrainingConfig cfg;
    cfg.cell = cell_kind_from_string(a.cell);
    cfg.hidden = a.hidden;
    cfg.window_len = a.window;
    cfg.stride = a.stride;
    cfg.epochs = a.epochs;
    cfg.optimizer.learning_rate = a.lr;
    cfg.optimizer.decay = a.decay;
    cfg.optimizer.clip_norm = a.clip;
    cfg.rng_seed = a.seed;
    cfg.precision = a.precision;
    cfg.mode = token_mode_from_string(a.tokenize);
    cfg.strip_diacritics = !a.keep_diacritics;
    cfg.keep_blank_lines = a.keep_blank_lines;
    cfg.max_vocab = a.max_vocab;
    cfg.val_fraction = a.val_fraction;
    cfg.out_dir = a.out_dir;
    cfg.sample_prompt = a.sample_prompt;
    cfg.sample_tokens = a.sample_tokens;

    const TrainingReport report = train(cfg, a.corpus, out, err);
    err << "final checkpoint: " << report.latest_path.string() << "\n";
    err << "best checkpoint: " << report.best_path.string() << " (epoch "
        << report.best_epoch << ", val_ppl " << report.best_val_ppl << ")\n";
    return kExitOk;
}

inline int run_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    SamplerConfig cfg;
    cfg.prompt = a.prompt;
    cfg.temperature = a.temperature;
    cfg.top_k = a.top_k;
    cfg.max_tokens = a.max_tokens;
    cfg.max_lines = a.lines;
    cfg.rng_seed = a.seed;
    const std::string text = generate(ckpt, cfg);
    if (!a.out_file.empty()) {
        std::ofstream f(a.out_file, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write output file: " + a.out_file);
        f << text;
        if (!text.empty() && text.back() != '\n') f << '\n';
        err << "wrote " << a.out_file << "\n";
    } else {
        out << text;
        if (!text.empty() && text.back() != '\n') out << '\n';
    }
    return kExitOk;
}

inline int run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    if (!a.tokenize.empty() &&
        token_mode_from_string(a.tokenize) != ckpt.vocabulary.mode) {
        err << "error: checkpoint was trained with " << to_string(ckpt.vocabulary.mode)
            << "-mode tokenization; refusing --tokenize " << a.tokenize << "\n";
        return kExitData;
    }
    LoadOptions opts;
    opts.strip_diacritics = ckpt.vocabulary.strip_diacritics;
    opts.keep_blank_lines = a.keep_blank_lines;
    const auto docs = load_corpus(a.corpus, opts, &err);
    const double ppl = evaluate_perplexity(ckpt, docs);
    out << std::setprecision(10) << ppl << "\n";
    return kExitOk;
}

inline int run_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<CellKind> cells;
    if (a.cell == "all")
        cells = {CellKind::rnn, CellKind::lstm, CellKind::gru};
    else
        cells = {cell_kind_from_string(a.cell)};

    bool all_pass = true;
    for (CellKind kind : cells) {
        GradientComparison worst;
        for (std::size_t i = 0; i < a.instances; ++i) {
            const auto cmp = gradient_check_random(kind, a.hidden, a.vocab, a.steps,
                                                   a.seed + 7919 * i, a.eps);
            if (cmp.max_rel_err > worst.max_rel_err) worst = cmp;
        }
        const bool pass = worst.max_rel_err <= a.tol;
        all_pass = all_pass && pass;
        out << "cell=" << to_string(kind) << " instances=" << a.instances
            << " max_rel_err=" << std::setprecision(3) << std::scientific
            << worst.max_rel_err << std::defaultfloat << " "
            << (pass ? "PASS" : "FAIL") << "\n";
        if (!pass)
            err << "worst entry: tensor " << worst.tensor << "[" << worst.index
                << "] analytic=" << worst.analytic << " numeric=" << worst.numeric
                << "\n";
    }
    return all_pass ? kExitOk : kExitData;
}

inline int run_stats(const StatsArgs& a, std::ostream& out, std::ostream& err) {
    LoadOptions opts;
    opts.strip_diacritics = !a.keep_diacritics;
    opts.keep_blank_lines = a.keep_blank_lines;
    const auto docs = load_corpus(a.corpus, opts, &err);
    const TokenMode mode = token_mode_from_string(a.tokenize);
    const Vocabulary vocab = build_vocabulary(docs, mode, a.max_vocab);
    const auto freq = token_frequencies(docs, mode);

    std::size_t total = 0;
    for (const auto& [tok, n] : freq) total += n;
    out << "documents," << docs.size() << "\n";
    out << "tokens," << total << "\n";
    out << "vocab," << vocab.size() << "\n";
    out << "top_tokens:\n";
    const std::size_t top = std::min<std::size_t>(20, vocab.size());
    for (std::size_t i = 0; i < top; ++i) {
        const std::string& tok = vocab.tokens[i];
        const auto it = freq.find(tok);
        out << ghazalforge::detail::escape_token(tok) << ','
            << (it == freq.end() ? 0 : it->second) << "\n";
    }
    return kExitOk;
}

// CLI11 never reads a config file attached to a subcommand, so the flat
// key=value file is applied by hand: keys already given on the command line
// are skipped, everything else is replayed as `--key=value` and re-parsed so
// the usual conversion and range checks still run.
inline std::vector<std::string> config_overrides(const CLI::App& cmd,
                                                 const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path);
    auto trim = [](std::string s) {
        const auto* ws = " \t\r";
        const auto a = s.find_first_not_of(ws);
        if (a == std::string::npos) return std::string();
        return s.substr(a, s.find_last_not_of(ws) - a + 1);
    };
    std::vector<std::string> extra;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        const std::string key = eq == std::string::npos ? "" : trim(line.substr(0, eq));
        if (key.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        const CLI::Option* op = cmd.get_option_no_throw("--" + key);
        if (op == nullptr || op->count() == 0)
            extra.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
    }
    return extra;
}

}  // namespace detail

/// Parse and dispatch. `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"ghazalforge: recurrent language models for Urdu poetry"};
    app.require_subcommand(1);
    std::string config_path;  // shared; only one subcommand parses per run

    detail::TrainArgs ta;
    CLI::App* train_cmd =
        app.add_subcommand("train", "Train a model on a corpus directory");
    train_cmd->add_option("--corpus", ta.corpus, "Corpus directory of UTF-8 .txt files")
        ->required();
    train_cmd->add_option("--out", ta.out_dir, "Output directory for checkpoints")
        ->capture_default_str();
    train_cmd->add_option("--cell", ta.cell, "Cell type")
        ->check(CLI::IsMember({"rnn", "lstm", "gru"}))
        ->capture_default_str();
    train_cmd->add_option("--hidden", ta.hidden, "Hidden state size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--window", ta.window, "BPTT window length (tau)")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20))
        ->capture_default_str();
    train_cmd->add_option("--stride", ta.stride,
                          "Stride between windows (default: equal to --window)");
    train_cmd->add_option("--epochs", ta.epochs, "Training epochs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--lr", ta.lr, "SGD learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--decay", ta.decay, "Per-epoch learning-rate decay factor")
        ->check(CLI::Range(1e-6, 1.0))
        ->capture_default_str();
    train_cmd->add_option("--clip", ta.clip, "Global gradient-norm clip threshold")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--seed", ta.seed, "RNG seed")->capture_default_str();
    train_cmd->add_option("--precision", ta.precision, "Float width for training")
        ->check(CLI::IsMember({64, 32}))
        ->capture_default_str();
    train_cmd->add_option("--tokenize", ta.tokenize, "Token mode")
        ->check(CLI::IsMember({"char", "word"}))
        ->capture_default_str();
    train_cmd->add_flag("--keep-diacritics", ta.keep_diacritics,
                        "Keep Urdu diacritics (default: stripped)");
    train_cmd->add_flag("--keep-blank-lines", ta.keep_blank_lines,
                        "Treat blank lines as extra line-break tokens");
    train_cmd->add_option("--max-vocab", ta.max_vocab, "Vocabulary cap (word mode)")
        ->check(CLI::Range(std::size_t{3}, std::size_t{1} << 31))
        ->capture_default_str();
    train_cmd->add_option("--val-fraction", ta.val_fraction,
                          "Held-out fraction of documents (last by sorted name)")
        ->check(CLI::Range(0.0, 0.5))
        ->capture_default_str();
    train_cmd->add_option("--sample-prompt", ta.sample_prompt,
                          "Prompt for the per-epoch logged sample");
    train_cmd->add_option("--sample-tokens", ta.sample_tokens,
                          "Tokens per per-epoch sample (0 disables)")
        ->capture_default_str();
    train_cmd->add_option("--config", config_path,
                          "Flat key=value file with option defaults; explicit flags win");

    detail::GenerateArgs ga;
    CLI::App* gen_cmd = app.add_subcommand("generate", "Sample text from a checkpoint");
    gen_cmd->add_option("--ckpt", ga.ckpt, "Checkpoint file")->required();
    gen_cmd->add_option("--prompt", ga.prompt, "Prompt text (may be empty)");
    gen_cmd->add_option("--temperature", ga.temperature, "Sampling temperature")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gen_cmd->add_option("--top-k", ga.top_k, "Restrict sampling to the k likeliest tokens")
        ->capture_default_str();
    gen_cmd->add_option("--max-tokens", ga.max_tokens, "Maximum tokens to generate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gen_cmd->add_option("--lines", ga.lines, "Stop after this many generated lines")
        ->capture_default_str();
    gen_cmd->add_option("--seed", ga.seed, "RNG seed")->capture_default_str();
    gen_cmd->add_option("--out", ga.out_file, "Write output to a file instead of stdout");
    gen_cmd->add_option("--config", config_path,
                        "Flat key=value file with option defaults; explicit flags win");

    detail::EvalArgs ea;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "Report perplexity of a checkpoint on a corpus");
    eval_cmd->add_option("--ckpt", ea.ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--corpus", ea.corpus, "Corpus directory")->required();
    eval_cmd->add_option("--tokenize", ea.tokenize,
                         "Must match the checkpoint's token mode if given")
        ->check(CLI::IsMember({"char", "word"}));
    eval_cmd->add_flag("--keep-blank-lines", ea.keep_blank_lines,
                       "Treat blank lines as extra line-break tokens");
    eval_cmd->add_option("--config", config_path,
                         "Flat key=value file with option defaults; explicit flags win");

    detail::GradcheckArgs ca;
    CLI::App* grad_cmd = app.add_subcommand(
        "gradcheck", "Verify analytic gradients against finite differences");
    grad_cmd->add_option("--cell", ca.cell, "Cell type, or 'all'")
        ->check(CLI::IsMember({"rnn", "lstm", "gru", "all"}))
        ->capture_default_str();
    grad_cmd->add_option("--hidden", ca.hidden, "Hidden state size")
        ->check(CLI::Range(std::size_t{1}, std::size_t{64}))
        ->capture_default_str();
    grad_cmd->add_option("--vocab", ca.vocab, "Vocabulary size")
        ->check(CLI::Range(std::size_t{2}, std::size_t{64}))
        ->capture_default_str();
    grad_cmd->add_option("--steps", ca.steps, "Sequence length (tau)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{64}))
        ->capture_default_str();
    grad_cmd->add_option("--instances", ca.instances, "Random instances per cell")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    grad_cmd->add_option("--seed", ca.seed, "Base RNG seed")->capture_default_str();
    grad_cmd->add_option("--eps", ca.eps, "Finite-difference step")
        ->check(CLI::Range(1e-7, 1e-3))
        ->capture_default_str();
    grad_cmd->add_option("--tol", ca.tol, "Max relative error to pass")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    grad_cmd->add_option("--config", config_path,
                         "Flat key=value file with option defaults; explicit flags win");

    detail::StatsArgs sa;
    CLI::App* stats_cmd =
        app.add_subcommand("corpus-stats", "Corpus and vocabulary summary");
    stats_cmd->add_option("--corpus", sa.corpus, "Corpus directory")->required();
    stats_cmd->add_option("--tokenize", sa.tokenize, "Token mode")
        ->check(CLI::IsMember({"char", "word"}))
        ->capture_default_str();
    stats_cmd->add_flag("--keep-diacritics", sa.keep_diacritics,
                        "Keep Urdu diacritics (default: stripped)");
    stats_cmd->add_flag("--keep-blank-lines", sa.keep_blank_lines,
                        "Treat blank lines as extra line-break tokens");
    stats_cmd->add_option("--max-vocab", sa.max_vocab, "Vocabulary cap (word mode)")
        ->capture_default_str();
    stats_cmd->add_option("--config", config_path,
                          "Flat key=value file with option defaults; explicit flags win");

    CLI::App* commands[] = {train_cmd, gen_cmd, eval_cmd, grad_cmd, stats_cmd};
    try {
        std::vector<std::string> reversed = args;
        std::reverse(reversed.begin(), reversed.end());
        app.parse(std::move(reversed));
        if (!config_path.empty()) {
            for (CLI::App* cmd : commands) {
                if (!cmd->parsed()) continue;
                auto extra = detail::config_overrides(*cmd, config_path);
                if (extra.empty()) break;
                std::vector<std::string> again = args;
                again.insert(again.end(), extra.begin(), extra.end());
                std::reverse(again.begin(), again.end());
                app.clear();
                app.parse(std::move(again));
                break;
            }
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }

    try {
        if (train_cmd->parsed()) return detail::run_train(ta, out, err);
        if (gen_cmd->parsed()) return detail::run_generate(ga, out, err);
        if (eval_cmd->parsed()) return detail::run_eval(ea, out, err);
        if (grad_cmd->parsed()) return detail::run_gradcheck(ca, out, err);
        if (stats_cmd->parsed()) return detail::run_stats(sa, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    err << "error: no subcommand given\n";
    return kExitUsage;
}

}  // namespace ghazalforge::cli
