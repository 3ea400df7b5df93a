#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace synthrl::text {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim_view(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

/// Collapses every whitespace run to one space and trims the ends.
inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char c : s) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(c);
    }
    return out;
}

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline bool contains(std::string_view hay, std::string_view needle) {
    return hay.find(needle) != std::string_view::npos;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

// FNV-1a, 64 bit. Stable across platforms and runs.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Content hash used to key scripted completions: whitespace-insensitive.
inline std::string content_hash(std::string_view s) { return hex64(fnv1a(collapse_whitespace(s))); }

namespace detail {

// Decodes one UTF-8 code point starting at s[i]; advances i. Invalid bytes decode to U+FFFD.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
    auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= s.size()) return -1;
        auto b = static_cast<unsigned char>(s[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k < len; ++k) {
        int c = cont(static_cast<std::size_t>(k));
        if (c < 0) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | static_cast<char32_t>(c);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

inline void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Simple case folding for Latin, Greek and Cyrillic blocks.
inline char32_t to_lower(char32_t c) {
    if (c >= 'A' && c <= 'Z') return c + 32;
    if (c < 0x80) return c;
    if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
    if (c >= 0x100 && c <= 0x137) return (c % 2 == 0) ? c + 1 : c;
    if (c >= 0x139 && c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
    if (c >= 0x14A && c <= 0x177) return (c % 2 == 0) ? c + 1 : c;
    if (c == 0x178) return 0xFF;
    if (c >= 0x179 && c <= 0x17E) return (c % 2 == 1) ? c + 1 : c;
    if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
    if (c >= 0x410 && c <= 0x42F) return c + 32;
    if (c >= 0x400 && c <= 0x40F) return c + 80;
    return c;
}

enum class CharClass { separator, word, standalone };

inline CharClass classify(char32_t c) {
    if (c < 0x80) {
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'))
            return CharClass::word;
        return CharClass::separator;
    }
    if (c == 0xFFFD) return CharClass::separator;
    if (c <= 0xBF) return (c == 0xAA || c == 0xB5 || c == 0xBA) ? CharClass::word : CharClass::separator;
    if (c == 0xD7 || c == 0xF7) return CharClass::separator;
    if (c >= 0x2000 && c <= 0x2BFF) return CharClass::separator;  // punctuation, currency, arrows, math symbols
    if (c >= 0x3000 && c <= 0x303F) return CharClass::separator;  // CJK punctuation
    if (c >= 0xFE30 && c <= 0xFE4F) return CharClass::separator;
    if ((c >= 0xFF00 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
        (c >= 0xFF5B && c <= 0xFF65))
        return CharClass::separator;
    if (c >= 0x1F000 && c <= 0x1FAFF) return CharClass::separator;  // emoji and pictographs
    // Ideographic scripts have no spaces between words; each character is its own token.
    if ((c >= 0x3040 && c <= 0x30FF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x4E00 && c <= 0x9FFF) ||
        (c >= 0xAC00 && c <= 0xD7AF))
        return CharClass::standalone;
    return CharClass::word;
}

}  // namespace detail

/// Lowercased word tokens. Words are maximal runs of letters/digits in any script;
/// ideographs are emitted one per token. No stemming, no stopwords.
inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string cur;
    std::size_t i = 0;
    while (i < s.size()) {
        char32_t cp = detail::decode_utf8(s, i);
        switch (detail::classify(cp)) {
            case detail::CharClass::word:
                detail::encode_utf8(detail::to_lower(cp), cur);
                break;
            case detail::CharClass::standalone:
                if (!cur.empty()) tokens.push_back(std::move(cur));
                cur.clear();
                detail::encode_utf8(cp, cur);
                tokens.push_back(std::move(cur));
                cur.clear();
                break;
            case detail::CharClass::separator:
                if (!cur.empty()) tokens.push_back(std::move(cur));
                cur.clear();
                break;
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

/// Whitespace+punctuation word count: each word run counts once, each
/// non-space punctuation character counts once.
inline std::size_t word_punct_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t start = i;
        char32_t cp = detail::decode_utf8(s, i);
        auto cls = detail::classify(cp);
        if (cls == detail::CharClass::word) {
            if (!in_word) ++n;
            in_word = true;
            continue;
        }
        in_word = false;
        if (cls == detail::CharClass::standalone) {
            ++n;
        } else if (!(i - start == 1 && is_space(s[start]))) {
            ++n;
        }
    }
    return n;
}

}  // namespace synthrl::text
