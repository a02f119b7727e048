#pragma once

// Strict UTF-8 decode/encode. Overlong forms, surrogates, out-of-range
// scalars and truncated sequences are all hard errors that name the byte
// offset, so corpus problems surface at load time instead of as garbled text.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ghazalforge {

class Utf8Error : public std::runtime_error {
public:
    Utf8Error(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at byte offset " + std::to_string(offset)),
          byte_offset(offset) {}
    std::size_t byte_offset;
};

inline std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char b0 = static_cast<unsigned char>(s[i]);
        std::size_t len;
        char32_t cp;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1Fu;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0Fu;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07u;
        } else {
            throw Utf8Error("invalid utf-8 lead byte", i);
        }
        if (i + len > s.size()) throw Utf8Error("truncated utf-8 sequence", i);
        for (std::size_t k = 1; k < len; ++k) {
            const unsigned char bk = static_cast<unsigned char>(s[i + k]);
            if ((bk & 0xC0) != 0x80)
                throw Utf8Error("invalid utf-8 continuation byte", i + k);
            cp = (cp << 6) | (bk & 0x3Fu);
        }
        static constexpr char32_t kMinForLen[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (len > 1 && cp < kMinForLen[len])
            throw Utf8Error("overlong utf-8 encoding", i);
        if (cp >= 0xD800 && cp <= 0xDFFF)
            throw Utf8Error("utf-8 encoded surrogate", i);
        if (cp > 0x10FFFF) throw Utf8Error("code point beyond U+10FFFF", i);
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        if (cp >= 0xD800 && cp <= 0xDFFF)
            throw std::invalid_argument("append_utf8: surrogate code point");
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp <= 0x10FFFF) {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        throw std::invalid_argument("append_utf8: code point beyond U+10FFFF");
    }
}

inline std::string encode_utf8(std::u32string_view cps) {
    std::string out;
    out.reserve(cps.size() * 2);
    for (char32_t cp : cps) append_utf8(out, cp);
    return out;
}

}  // namespace ghazalforge
