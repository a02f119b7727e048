#pragma once

// Single-file checkpoint: UTF-8 text header (version, config echo, vocabulary
// in index order) followed by raw tensors as length-prefixed little-endian
// f64 arrays in the fixed per-cell tensor order, closed by a 64-bit FNV-1a
// checksum over every preceding byte. The text half keeps the vocabulary
// human-inspectable; the binary half keeps round trips bit-exact.
//
// Load order is strict: magic+version first, then checksum, then parse, so a
// file from a newer format fails with a version error and a damaged file
// fails with a checksum error before any field is trusted.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ghazalforge/cells.hpp"
#include "ghazalforge/corpus.hpp"

namespace ghazalforge {

inline constexpr const char* kCheckpointMagic = "ghazalforge-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    int format_version = kCheckpointVersion;
    ModelParams<double> params;
    Vocabulary vocabulary;
    std::uint64_t rng_seed = 0;
    std::size_t epoch = 0;
    std::map<std::string, std::string> extra;  // config echo; sorted => stable bytes

    CellKind cell() const { return kind_of(params); }
    std::size_t hidden() const { return hidden_of(params); }
    std::size_t vocab_size() const { return vocab_of(params); }
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& bytes, std::size_t len) {
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(bytes[i]);
        h *= 1099511628211ull;
    }
    return h;
}

inline void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void append_f64_le(std::string& out, double v) {
    append_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint64_t read_u64_le(const std::string& bytes, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i]))
             << (8 * i);
    return v;
}

inline std::string escape_token(const std::string& tok) {
    std::string out;
    for (char ch : tok) {
        if (ch == '\\') out += "\\\\";
        else if (ch == '\n') out += "\\n";
        else if (ch == '\r') out += "\\r";
        else out.push_back(ch);
    }
    return out;
}

inline std::string unescape_token(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out.push_back(s[i]);
            continue;
        }
        if (i + 1 >= s.size())
            throw std::runtime_error("checkpoint: dangling escape in token");
        const char nxt = s[++i];
        if (nxt == '\\') out.push_back('\\');
        else if (nxt == 'n') out.push_back('\n');
        else if (nxt == 'r') out.push_back('\r');
        else throw std::runtime_error("checkpoint: bad escape in token");
    }
    return out;
}

// Reads lines off a byte buffer without streams so the binary tail position
// stays exact.
struct LineReader {
    const std::string& bytes;
    std::size_t pos = 0;

    bool next(std::string& line) {
        if (pos >= bytes.size()) return false;
        const std::size_t nl = bytes.find('\n', pos);
        if (nl == std::string::npos) return false;  // header lines always end in \n
        line.assign(bytes, pos, nl - pos);
        pos = nl + 1;
        return true;
    }
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
    const Vocabulary& vb = ckpt.vocabulary;
    if (vb.size() != ckpt.vocab_size())
        throw std::runtime_error("checkpoint: vocabulary size does not match parameters");

    std::string out;
    out += kCheckpointMagic;
    out += " v" + std::to_string(ckpt.format_version) + "\n";
    out += "cell=" + std::string(to_string(ckpt.cell())) + "\n";
    out += "hidden=" + std::to_string(ckpt.hidden()) + "\n";
    out += "vocab=" + std::to_string(ckpt.vocab_size()) + "\n";
    out += "mode=" + std::string(to_string(vb.mode)) + "\n";
    out += "norm_version=" + std::to_string(vb.norm_version) + "\n";
    out += "strip_diacritics=" + std::string(vb.strip_diacritics ? "1" : "0") + "\n";
    out += "epoch=" + std::to_string(ckpt.epoch) + "\n";
    out += "rng_seed=" + std::to_string(ckpt.rng_seed) + "\n";
    for (const auto& [k, v] : ckpt.extra) out += "meta." + k + "=" + v + "\n";
    out += "tokens=" + std::to_string(vb.size()) + "\n";
    for (const auto& tok : vb.tokens) out += detail::escape_token(tok) + "\n";
    out += "tensors:\n";

    std::visit(
        [&](const auto& p) {
            for (const auto& t : p.tensors()) {
                detail::append_u64_le(out, t.size);
                for (std::size_t i = 0; i < t.size; ++i)
                    detail::append_f64_le(out, t.data[i]);
            }
        },
        ckpt.params);

    detail::append_u64_le(out, detail::fnv1a64(out, out.size()));
    return out;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(ckpt);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint parse_checkpoint(const std::string& bytes) {
    const std::string magic_prefix = std::string(kCheckpointMagic) + " v";
    if (bytes.compare(0, magic_prefix.size(), magic_prefix) != 0)
        throw std::runtime_error("checkpoint: not a checkpoint file");
    {
        const std::size_t nl = bytes.find('\n');
        if (nl == std::string::npos)
            throw std::runtime_error("checkpoint: truncated header");
        const std::string ver = bytes.substr(magic_prefix.size(), nl - magic_prefix.size());
        int v = 0;
        try {
            v = std::stoi(ver);
        } catch (...) {
            throw std::runtime_error("checkpoint: malformed version '" + ver + "'");
        }
        if (v > kCheckpointVersion)
            throw std::runtime_error("checkpoint: format version " + std::to_string(v) +
                                     " is newer than supported version " +
                                     std::to_string(kCheckpointVersion));
    }

    if (bytes.size() < 8) throw std::runtime_error("checkpoint: file truncated");
    const std::uint64_t stored = detail::read_u64_le(bytes, bytes.size() - 8);
    const std::uint64_t computed = detail::fnv1a64(bytes, bytes.size() - 8);
    if (stored != computed)
        throw std::runtime_error("checkpoint: checksum mismatch (file corrupted)");

    detail::LineReader rd{bytes};
    std::string line;
    rd.next(line);  // magic, already validated

    std::map<std::string, std::string> fields;
    std::vector<std::string> token_lines;
    std::size_t token_count = 0;
    bool saw_tensors = false;
    while (rd.next(line)) {
        if (line == "tensors:") {
            saw_tensors = true;
            break;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("checkpoint: malformed header line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "tokens") {
            token_count = std::stoul(val);
            for (std::size_t i = 0; i < token_count; ++i) {
                if (!rd.next(line))
                    throw std::runtime_error("checkpoint: truncated vocabulary list");
                token_lines.push_back(detail::unescape_token(line));
            }
        } else {
            fields[key] = val;
        }
    }
    if (!saw_tensors) throw std::runtime_error("checkpoint: missing tensor section");

    auto need = [&](const char* key) -> const std::string& {
        auto it = fields.find(key);
        if (it == fields.end())
            throw std::runtime_error("checkpoint: missing header field '" +
                                     std::string(key) + "'");
        return it->second;
    };

    Checkpoint ckpt;
    const CellKind cell = cell_kind_from_string(need("cell"));
    const std::size_t hidden = std::stoul(need("hidden"));
    const std::size_t vocab = std::stoul(need("vocab"));
    if (hidden < 1 || vocab < 1)
        throw std::runtime_error("checkpoint: bad dimensions");
    if (token_count != vocab)
        throw std::runtime_error("checkpoint: vocabulary size disagrees with header");

    ckpt.vocabulary.mode = token_mode_from_string(need("mode"));
    ckpt.vocabulary.norm_version = std::stoi(need("norm_version"));
    ckpt.vocabulary.strip_diacritics = need("strip_diacritics") == "1";
    ckpt.vocabulary.tokens = std::move(token_lines);
    ckpt.vocabulary.reindex();
    ckpt.epoch = std::stoul(need("epoch"));
    ckpt.rng_seed = std::stoull(need("rng_seed"));
    for (auto& [k, v] : fields)
        if (k.rfind("meta.", 0) == 0) ckpt.extra[k.substr(5)] = v;

    ckpt.params = make_params<double>(cell, hidden, vocab);
    std::size_t pos = rd.pos;
    const std::size_t end = bytes.size() - 8;
    std::visit(
        [&](auto& p) {
            for (auto& t : p.tensors()) {
                if (pos + 8 > end)
                    throw std::runtime_error("checkpoint: truncated tensor section");
                const std::uint64_t n = detail::read_u64_le(bytes, pos);
                pos += 8;
                if (n != t.size)
                    throw std::runtime_error("checkpoint: tensor '" + std::string(t.name) +
                                             "' has " + std::to_string(n) +
                                             " elements, expected " +
                                             std::to_string(t.size));
                if (pos + 8 * t.size > end)
                    throw std::runtime_error("checkpoint: truncated tensor section");
                for (std::size_t i = 0; i < t.size; ++i, pos += 8)
                    t.data[i] = std::bit_cast<double>(detail::read_u64_le(bytes, pos));
            }
        },
        ckpt.params);
    if (pos != end)
        throw std::runtime_error("checkpoint: trailing bytes after tensor section");
    return ckpt;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_checkpoint(bytes);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(e.what()) + " [" + path.string() + "]");
    }
}

}  // namespace ghazalforge
