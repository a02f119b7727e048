#pragma once

// Urdu text normalization: canonical composition scoped to the Arabic block,
// Arabic->Urdu letter unification, tatweel removal, optional diacritic
// stripping, and per-line whitespace collapse. The combining-class and
// composition tables below are the fixed Unicode data for U+0600..U+06FF;
// nothing outside that block composes in Urdu text, so a full Unicode
// database is not needed. The table set is versioned: checkpoints record
// kNormalizationVersion and refuse to re-encode under a different table.
//
// Composition runs twice. Removing tatweel or a diacritic can make a
// base+mark pair adjacent (or leave a mark run unordered) in a way the first
// pass could not see; a second reorder+compose pass reaches the fixed point,
// which is what makes the whole function idempotent.

#include <string>
#include <string_view>
#include <vector>

#include "ghazalforge/utf8.hpp"

namespace ghazalforge {

inline constexpr int kNormalizationVersion = 1;

namespace detail {

// Canonical combining classes for the Arabic block (everything else: 0).
inline int combining_class(char32_t cp) {
    switch (cp) {
        case 0x064B: return 27;
        case 0x064C: return 28;
        case 0x064D: return 29;
        case 0x064E: return 30;
        case 0x064F: return 31;
        case 0x0650: return 32;
        case 0x0651: return 33;
        case 0x0652: return 34;
        case 0x0670: return 35;
        case 0x0655: case 0x0656: case 0x065C: case 0x065F: case 0x06E3:
        case 0x06EA: case 0x06ED:
            return 220;
        case 0x0653: case 0x0654: case 0x0657: case 0x0658: case 0x0659:
        case 0x065A: case 0x065B: case 0x065D: case 0x065E:
        case 0x06D6: case 0x06D7: case 0x06D8: case 0x06D9: case 0x06DA:
        case 0x06DB: case 0x06DC: case 0x06DF: case 0x06E0: case 0x06E1:
        case 0x06E2: case 0x06E4: case 0x06E7: case 0x06E8: case 0x06EB:
        case 0x06EC:
            return 230;
        default: return 0;
    }
}

// Primary canonical composites with both halves in the Arabic block.
inline char32_t compose_pair(char32_t base, char32_t mark) {
    if (mark == 0x0653 && base == 0x0627) return 0x0622;  // alef + madda
    if (mark == 0x0654) {
        switch (base) {  // hamza above
            case 0x0627: return 0x0623;
            case 0x0648: return 0x0624;
            case 0x064A: return 0x0626;
            case 0x06D5: return 0x06C0;
            case 0x06C1: return 0x06C2;
            case 0x06D2: return 0x06D3;
        }
    }
    if (mark == 0x0655 && base == 0x0627) return 0x0625;  // hamza below
    return 0;
}

// Stable sort of each run of nonzero-class marks by combining class.
inline void canonical_reorder(std::u32string& s) {
    for (std::size_t i = 1; i < s.size(); ++i) {
        const int cc = combining_class(s[i]);
        if (cc == 0) continue;
        std::size_t j = i;
        while (j > 0 && combining_class(s[j - 1]) > cc) {
            std::swap(s[j - 1], s[j]);
            --j;
        }
    }
}

// Standard canonical composition: a mark joins the last starter unless an
// in-between mark with combining class >= its own blocks it.
inline void canonical_compose(std::u32string& s) {
    std::u32string out;
    out.reserve(s.size());
    std::ptrdiff_t last_starter = -1;
    for (char32_t cp : s) {
        const int cc = combining_class(cp);
        if (last_starter >= 0) {
            const bool adjacent =
                static_cast<std::size_t>(last_starter) + 1 == out.size();
            const bool unblocked =
                adjacent || combining_class(out.back()) < cc;
            if (unblocked) {
                if (char32_t comp = compose_pair(out[last_starter], cp)) {
                    out[static_cast<std::size_t>(last_starter)] = comp;
                    continue;
                }
            }
        }
        out.push_back(cp);
        if (cc == 0) last_starter = static_cast<std::ptrdiff_t>(out.size()) - 1;
    }
    s = std::move(out);
}

inline bool is_line_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\r' || cp == 0x0B || cp == 0x0C;
}

// Collapse runs of whitespace to one space, trim line ends; '\n' kept.
inline void collapse_whitespace(std::u32string& s) {
    std::u32string out;
    out.reserve(s.size());
    bool pending = false;
    bool line_empty = true;
    for (char32_t cp : s) {
        if (cp == U'\n') {
            out.push_back(cp);
            pending = false;
            line_empty = true;
        } else if (is_line_space(cp)) {
            pending = true;
        } else {
            if (pending && !line_empty) out.push_back(U' ');
            pending = false;
            line_empty = false;
            out.push_back(cp);
        }
    }
    s = std::move(out);
}

}  // namespace detail

inline std::u32string normalize_urdu_cps(std::u32string s, bool strip_diacritics = true) {
    std::u32string cleaned;
    cleaned.reserve(s.size());
    for (char32_t cp : s)
        if (cp != 0xFEFF) cleaned.push_back(cp);  // BOM / zero-width no-break
    s = std::move(cleaned);

    detail::canonical_reorder(s);
    detail::canonical_compose(s);

    for (char32_t& cp : s) {
        if (cp == 0x064A) cp = 0x06CC;       // arabic yeh -> farsi yeh
        else if (cp == 0x0643) cp = 0x06A9;  // arabic kaf -> keheh
        else if (cp == 0x0629) cp = 0x06C3;  // teh marbuta -> teh marbuta goal
    }

    std::u32string kept;
    kept.reserve(s.size());
    for (char32_t cp : s) {
        if (cp == 0x0640) continue;  // tatweel
        if (strip_diacritics && cp >= 0x064B && cp <= 0x0652) continue;
        kept.push_back(cp);
    }
    s = std::move(kept);

    detail::canonical_reorder(s);
    detail::canonical_compose(s);

    detail::collapse_whitespace(s);
    return s;
}

inline std::string normalize_urdu(std::string_view text, bool strip_diacritics = true) {
    return encode_utf8(normalize_urdu_cps(decode_utf8(text), strip_diacritics));
}

}  // namespace ghazalforge
