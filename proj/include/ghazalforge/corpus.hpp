#pragma once

// Corpus ingestion: load UTF-8 poem files, normalize, build the token
// vocabulary, encode to index streams and cut training windows. Documents
// are hidden-state reset boundaries; couplets in different files are
// unrelated poems, so no window ever spans two files.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ghazalforge/normalize.hpp"
#include "ghazalforge/parallel.hpp"
#include "ghazalforge/utf8.hpp"

namespace ghazalforge {

inline constexpr const char* kLineBreakToken = "\n";
inline constexpr const char* kUnkToken = "<unk>";

struct CorpusDocument {
    std::string source_name;
    std::vector<std::string> lines;  // normalized; empty lines only when kept explicitly
    std::size_t raw_char_count = 0;  // code points before normalization
};

enum class TokenMode { character, word };

inline const char* to_string(TokenMode m) {
    return m == TokenMode::character ? "char" : "word";
}

inline TokenMode token_mode_from_string(const std::string& s) {
    if (s == "char" || s == "character") return TokenMode::character;
    if (s == "word") return TokenMode::word;
    throw std::runtime_error("unknown token mode: '" + s + "'");
}

struct Vocabulary {
    TokenMode mode = TokenMode::character;
    std::vector<std::string> tokens;                 // index -> token
    std::unordered_map<std::string, int> index_of;   // token -> index
    int line_break_index = -1;
    int unk_index = -1;  // word mode only
    int norm_version = kNormalizationVersion;
    bool strip_diacritics = true;

    std::size_t size() const { return tokens.size(); }

    int lookup(const std::string& tok) const {
        auto it = index_of.find(tok);
        return it == index_of.end() ? -1 : it->second;
    }

    /// Rebuild index_of and special indices from `tokens`; checks the bijection.
    void reindex() {
        index_of.clear();
        line_break_index = -1;
        unk_index = -1;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            auto [it, fresh] = index_of.emplace(tokens[i], static_cast<int>(i));
            if (!fresh)
                throw std::runtime_error("vocabulary: duplicate token at index " +
                                         std::to_string(i));
            if (tokens[i] == kLineBreakToken) line_break_index = static_cast<int>(i);
            if (tokens[i] == kUnkToken) unk_index = static_cast<int>(i);
        }
        if (line_break_index < 0)
            throw std::runtime_error("vocabulary: LINE_BREAK token missing");
        if (mode == TokenMode::word && unk_index < 0)
            throw std::runtime_error("vocabulary: UNK token missing in word mode");
    }
};

namespace detail {

inline std::vector<std::string> tokenize_line(const std::string& line, TokenMode mode) {
    std::vector<std::string> out;
    if (mode == TokenMode::character) {
        const std::u32string cps = decode_utf8(line);
        out.reserve(cps.size());
        for (char32_t cp : cps) {
            std::string tok;
            append_utf8(tok, cp);
            out.push_back(std::move(tok));
        }
    } else {
        std::size_t start = 0;
        while (start < line.size()) {
            std::size_t end = line.find(' ', start);
            if (end == std::string::npos) end = line.size();
            if (end > start) out.push_back(line.substr(start, end - start));
            start = end + 1;
        }
    }
    return out;
}

inline std::string codepoint_label(const std::string& tok) {
    const std::u32string cps = decode_utf8(tok);
    std::string label = "'" + tok + "' (";
    for (std::size_t i = 0; i < cps.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cps[i]));
        if (i) label += ' ';
        label += buf;
    }
    return label + ")";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Loading

struct LoadOptions {
    bool strip_diacritics = true;
    // Treat blank lines inside a file as extra LINE_BREAK tokens instead of
    // dropping them. Off by default; the corpus convention is one verse per
    // line with no structural blank lines.
    bool keep_blank_lines = false;
};

inline std::vector<CorpusDocument> load_corpus(const std::filesystem::path& root,
                                               const LoadOptions& opts = {},
                                               std::ostream* warnings = nullptr) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root))
        throw std::runtime_error("corpus root is not a directory: " + root.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    if (files.empty())
        throw std::runtime_error("no .txt files in corpus directory: " + root.string());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    std::vector<std::optional<CorpusDocument>> slots(files.size());
    std::vector<std::string> slot_warnings(files.size());
    parallel_for(files.size(), [&](std::size_t i) {
        const fs::path& path = files[i];
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open file: " + path.string());
        std::string raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());

        std::u32string cps;
        try {
            cps = decode_utf8(raw);
        } catch (const Utf8Error& e) {
            throw std::runtime_error("file " + path.string() + ": " + e.what());
        }

        CorpusDocument doc;
        doc.source_name = path.filename().string();
        doc.raw_char_count = cps.size();

        const std::u32string norm = normalize_urdu_cps(std::move(cps), opts.strip_diacritics);
        std::size_t start = 0;
        bool any_content = false;
        auto flush = [&](std::size_t end) {
            std::u32string_view line(norm.data() + start, end - start);
            if (!line.empty()) {
                doc.lines.push_back(encode_utf8(line));
                any_content = true;
            } else if (opts.keep_blank_lines) {
                doc.lines.emplace_back();
            }
        };
        for (std::size_t p = 0; p < norm.size(); ++p) {
            if (norm[p] == U'\n') {
                flush(p);
                start = p + 1;
            }
        }
        if (start < norm.size()) flush(norm.size());

        if (!any_content) {
            slot_warnings[i] = "warning: dropping whitespace-only file " + path.string();
            return;
        }
        slots[i] = std::move(doc);
    });

    std::vector<CorpusDocument> docs;
    docs.reserve(files.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slot_warnings[i].empty() && warnings) *warnings << slot_warnings[i] << '\n';
        if (slots[i]) docs.push_back(std::move(*slots[i]));
    }
    return docs;
}

// ---------------------------------------------------------------------------
// Vocabulary

/// Token frequencies exactly as encode() will emit them: line tokens plus one
/// LINE_BREAK per line.
inline std::map<std::string, std::size_t> token_frequencies(
    std::span<const CorpusDocument> docs, TokenMode mode) {
    std::map<std::string, std::size_t> freq;
    for (const auto& doc : docs) {
        for (const auto& line : doc.lines) {
            for (auto& tok : detail::tokenize_line(line, mode)) ++freq[tok];
            ++freq[kLineBreakToken];
        }
    }
    return freq;
}

inline Vocabulary build_vocabulary(std::span<const CorpusDocument> docs, TokenMode mode,
                                   std::size_t max_size = 0) {
    if (docs.empty()) throw std::runtime_error("build_vocabulary: no documents");
    auto freq = token_frequencies(docs, mode);
    if (freq.size() <= 1 && freq.count(kLineBreakToken) == freq.size()) {
        // only LINE_BREAK (or nothing): no actual text survived normalization
        throw std::runtime_error("build_vocabulary: corpus is empty after normalization");
    }

    std::vector<std::pair<std::string, std::size_t>> ranked;
    for (auto& [tok, n] : freq)
        if (tok != kLineBreakToken) ranked.emplace_back(tok, n);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    if (mode == TokenMode::word) {
        if (max_size < 3)
            throw std::runtime_error("build_vocabulary: word mode needs max_size >= 3");
        if (ranked.size() > max_size - 2) ranked.resize(max_size - 2);
    }

    ranked.emplace_back(kLineBreakToken, freq[kLineBreakToken]);
    if (mode == TokenMode::word) ranked.emplace_back(kUnkToken, 0);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.mode = mode;
    vocab.tokens.reserve(ranked.size());
    for (auto& [tok, n] : ranked) vocab.tokens.push_back(tok);
    vocab.reindex();
    return vocab;
}

// ---------------------------------------------------------------------------
// Encoding

struct EncodedStream {
    std::vector<int> indices;
    std::vector<std::size_t> boundaries;  // positions where documents end
};

inline EncodedStream encode(std::span<const CorpusDocument> docs, const Vocabulary& vocab) {
    EncodedStream stream;
    for (const auto& doc : docs) {
        for (const auto& line : doc.lines) {
            for (auto& tok : detail::tokenize_line(line, vocab.mode)) {
                int idx = vocab.lookup(tok);
                if (idx < 0) {
                    if (vocab.mode == TokenMode::word) {
                        idx = vocab.unk_index;
                    } else {
                        throw std::runtime_error(
                            "encode: token " + detail::codepoint_label(tok) +
                            " from " + doc.source_name + " not in vocabulary");
                    }
                }
                stream.indices.push_back(idx);
            }
            stream.indices.push_back(vocab.line_break_index);
        }
        stream.boundaries.push_back(stream.indices.size());
    }
    return stream;
}

inline std::string decode(std::span<const int> indices, const Vocabulary& vocab) {
    std::string out;
    bool need_space = false;
    for (int idx : indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= vocab.size())
            throw std::runtime_error("decode: index " + std::to_string(idx) +
                                     " out of range");
        const std::string& tok = vocab.tokens[static_cast<std::size_t>(idx)];
        if (vocab.mode == TokenMode::word) {
            if (tok == kLineBreakToken) {
                out += tok;
                need_space = false;
            } else {
                if (need_space) out += ' ';
                out += tok;
                need_space = true;
            }
        } else {
            out += tok;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Windowing

struct Window {
    std::size_t begin = 0;  // index of the first input token in the stream
    std::size_t len = 0;    // number of input/target positions
    bool carry_in = false;  // hidden state persists from the previous window
};

inline std::span<const int> window_inputs(const EncodedStream& s, const Window& w) {
    return std::span<const int>(s.indices).subspan(w.begin, w.len);
}

inline std::span<const int> window_targets(const EncodedStream& s, const Window& w) {
    return std::span<const int>(s.indices).subspan(w.begin + 1, w.len);
}

/// Cut (input, target) windows per document. Windows tile each document at
/// `stride`; when stride == tau consecutive windows form a state-carrying
/// chain (carry_in true from the second window on). When stride <= tau a
/// final clamped window is added if the tiling would leave trailing targets
/// uncovered, so every in-document position >= 1 appears as a target.
/// Documents shorter than tau+1 tokens yield one truncated window.
inline std::vector<Window> make_windows(const EncodedStream& stream, std::size_t tau,
                                        std::size_t stride) {
    if (tau < 2) throw std::invalid_argument("make_windows: window length must be >= 2");
    if (stride < 1) throw std::invalid_argument("make_windows: stride must be >= 1");

    std::vector<Window> windows;
    std::size_t seg_begin = 0;
    for (std::size_t seg_end : stream.boundaries) {
        if (seg_end <= seg_begin || seg_end > stream.indices.size())
            throw std::runtime_error("make_windows: malformed document boundaries");
        const std::size_t len = seg_end - seg_begin;
        if (len >= 2 && len < tau + 1) {
            windows.push_back({seg_begin, len - 1, false});
        } else if (len >= tau + 1) {
            const std::size_t last_start = len - 1 - tau;  // relative to segment
            std::size_t covered_end = 0;
            bool first = true;
            for (std::size_t s = 0; s <= last_start; s += stride) {
                windows.push_back({seg_begin + s, tau, !first && stride == tau});
                covered_end = s + tau;
                first = false;
            }
            if (stride <= tau && covered_end < len - 1)
                windows.push_back({seg_begin + last_start, tau, false});
        }
        seg_begin = seg_end;
    }
    if (windows.empty())
        throw std::runtime_error("make_windows: no document is long enough for a window");
    return windows;
}

}  // namespace ghazalforge
