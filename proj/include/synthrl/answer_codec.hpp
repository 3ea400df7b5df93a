#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "synthrl/task_spec.hpp"
#include "synthrl/text.hpp"

namespace synthrl {

struct ExtractedAnswer {
    std::string raw;
    std::string normalized;
    AnswerFormat format = AnswerFormat::tagged_answer;
    bool operator==(const ExtractedAnswer&) const = default;
};

using Rational = boost::multiprecision::cpp_rational;

namespace codec_detail {

inline bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::string strip_wrappers(std::string s) {
    for (bool changed = true; changed;) {
        changed = false;
        s = text::trim(s);
        if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
            s = s.substr(1, s.size() - 2);
            changed = true;
        } else if (s.size() >= 4 && s.starts_with("\\(") && s.ends_with("\\)")) {
            s = s.substr(2, s.size() - 4);
            changed = true;
        } else if (s.starts_with("\\text{") && s.back() == '}') {
            s = s.substr(6, s.size() - 7);
            changed = true;
        }
    }
    return s;
}

// Unsigned decimal "123", "1,234", "12.50", ".5". Returns the exact value.
inline std::optional<Rational> parse_unsigned_decimal(std::string_view s) {
    static const std::regex grouped(R"(^\d{1,3}(,\d{3})+(\.\d+)?$)");
    static const std::regex plain(R"(^(\d+)?(\.\d+)?$)");
    std::string t(s);
    if (t.empty()) return std::nullopt;
    if (std::regex_match(t, grouped)) {
        t.erase(std::remove(t.begin(), t.end(), ','), t.end());
    } else if (!std::regex_match(t, plain) || t == ".") {
        return std::nullopt;
    }
    auto dot = t.find('.');
    std::string ip = t.substr(0, dot);
    std::string fp = dot == std::string::npos ? "" : t.substr(dot + 1);
    if (ip.empty() && fp.empty()) return std::nullopt;
    boost::multiprecision::cpp_int num(ip.empty() ? "0" : ip);
    boost::multiprecision::cpp_int den = 1;
    for (char c : fp) {
        num = num * 10 + (c - '0');
        den *= 10;
    }
    return Rational(num, den);
}

struct ParsedNumber {
    Rational value;
    bool fraction_form = false;
};

inline std::optional<ParsedNumber> parse_number(std::string s) {
    s = text::trim(s);
    bool negative = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        negative = s[0] == '-';
        s = text::trim(s.substr(1));
    }
    // Currency markers in front of amounts.
    if (s.starts_with("\\$")) s = s.substr(2);
    else if (s.starts_with("$")) s = s.substr(1);
    s = text::trim(s);
    if (!s.empty() && s[0] == '-' && !negative) {
        negative = true;
        s = text::trim(s.substr(1));
    }

    static const std::regex frac(R"(^\\[dt]?frac\{\s*([^{}]+?)\s*\}\{\s*([^{}]+?)\s*\}$)");
    static const std::regex frac_short(R"(^\\[dt]?frac(\d)(\d)$)");
    static const std::regex slash(R"(^([^/\s]+)\s*/\s*([^/\s]+)$)");
    std::smatch m;
    std::optional<ParsedNumber> out;
    auto ratio = [](const std::string& a, const std::string& b) -> std::optional<ParsedNumber> {
        auto n = parse_unsigned_decimal(a);
        auto d = parse_unsigned_decimal(b);
        if (!n || !d || *d == 0) return std::nullopt;
        return ParsedNumber{*n / *d, true};
    };
    if (std::regex_match(s, m, frac) || std::regex_match(s, m, frac_short) || std::regex_match(s, m, slash)) {
        out = ratio(m[1].str(), m[2].str());
    } else if (auto v = parse_unsigned_decimal(s)) {
        out = ParsedNumber{*v, false};
    }
    if (out && negative) out->value = -out->value;
    return out;
}

inline std::string decimal_string(const Rational& r) {
    using boost::multiprecision::cpp_int;
    cpp_int num = boost::multiprecision::numerator(r);
    cpp_int den = boost::multiprecision::denominator(r);
    bool neg = num < 0;
    if (neg) num = -num;
    cpp_int ip = num / den;
    cpp_int rem = num % den;
    std::string s = ip.str();
    if (rem != 0) {
        s += '.';
        // Terminates: the value came from a finite decimal.
        for (int guard = 0; rem != 0 && guard < 4096; ++guard) {
            rem *= 10;
            s += static_cast<char>('0' + static_cast<int>(rem / den));
            rem %= den;
        }
    }
    return neg ? "-" + s : s;
}

inline std::string rational_string(const Rational& r) {
    auto num = boost::multiprecision::numerator(r);
    auto den = boost::multiprecision::denominator(r);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

}  // namespace codec_detail

/// Exact numeric value of an answer, when it reads as a number.
inline std::optional<Rational> numeric_value(std::string_view raw) {
    auto p = codec_detail::parse_number(codec_detail::strip_wrappers(std::string(raw)));
    if (!p) return std::nullopt;
    return p->value;
}

/// Canonical text of an answer. Option letters are uppercased; numbers lose
/// separators, sign noise and trailing zeros, and fractions are reduced.
/// Free-text tagged answers are case-folded.
inline std::string normalize(std::string_view raw, AnswerFormat format) {
    std::string s = codec_detail::strip_wrappers(std::string(raw));
    static const std::regex option(R"(^\(?([A-Za-z])[\)\.]?$)");
    std::smatch m;
    if (std::regex_match(s, m, option)) {
        char c = m[1].str()[0];
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
        return std::string(1, c);
    }
    if (auto p = codec_detail::parse_number(s)) {
        const auto& v = p->value;
        if (boost::multiprecision::denominator(v) == 1) return codec_detail::rational_string(v);
        return p->fraction_form ? codec_detail::rational_string(v) : codec_detail::decimal_string(v);
    }
    s = text::collapse_whitespace(s);
    if (format == AnswerFormat::tagged_answer) s = text::ascii_lower(s);
    return s;
}

/// Final answer of a completion, or nullopt when the format's marker is absent.
inline std::optional<ExtractedAnswer> extract_answer(std::string_view completion, AnswerFormat format) {
    std::optional<std::string> raw;
    switch (format) {
        case AnswerFormat::tagged_answer: {
            auto close = completion.rfind("</answer>");
            if (close == std::string_view::npos) break;
            auto open = completion.rfind("<answer>", close);
            if (open == std::string_view::npos) break;
            raw = text::trim(completion.substr(open + 8, close - open - 8));
            break;
        }
        case AnswerFormat::boxed: {
            auto pos = completion.rfind("boxed{");
            if (pos == std::string_view::npos) break;
            std::size_t start = pos + 6;
            int depth = 1;
            std::size_t i = start;
            for (; i < completion.size(); ++i) {
                if (completion[i] == '{') ++depth;
                else if (completion[i] == '}' && --depth == 0) break;
            }
            if (depth != 0) break;
            raw = text::trim(completion.substr(start, i - start));
            break;
        }
        case AnswerFormat::hash_marks: {
            auto pos = completion.rfind("####");
            if (pos == std::string_view::npos) break;
            auto rest = completion.substr(pos + 4);
            auto eol = rest.find('\n');
            raw = text::trim(rest.substr(0, eol));
            break;
        }
    }
    if (!raw || raw->empty()) return std::nullopt;
    return ExtractedAnswer{*raw, normalize(*raw, format), format};
}

/// Key identifying an answer's equivalence class: the exact rational for
/// numeric answers, the normalized text otherwise.
inline std::string equivalence_key(const ExtractedAnswer& a) {
    if (auto v = numeric_value(a.normalized)) return "#" + codec_detail::rational_string(*v);
    return "$" + a.normalized;
}

inline bool answers_equal(const ExtractedAnswer& a, const ExtractedAnswer& b) {
    if (a.format != b.format) throw std::invalid_argument("answers_equal: answer formats differ");
    if (a.normalized == b.normalized) return true;
    return equivalence_key(a) == equivalence_key(b);
}

struct VoteOutcome {
    ExtractedAnswer winner;
    std::size_t count = 0;
};

/// Plurality over equivalence classes. Absent answers never win. Ties go to the
/// class whose smallest normalized member sorts first; the winner is that member.
/// Returns nullopt when nothing was extractable or the top count is below min_votes.
inline std::optional<VoteOutcome> majority_vote(std::span<const std::optional<ExtractedAnswer>> answers,
                                                std::size_t min_votes) {
    struct Bucket {
        std::size_t count = 0;
        const ExtractedAnswer* representative = nullptr;
    };
    std::map<std::string, Bucket> classes;
    for (const auto& a : answers) {
        if (!a) continue;
        auto& b = classes[equivalence_key(*a)];
        ++b.count;
        if (!b.representative || a->normalized < b.representative->normalized) b.representative = &*a;
    }
    const Bucket* best = nullptr;
    for (const auto& [_, b] : classes) {
        if (!best || b.count > best->count ||
            (b.count == best->count && b.representative->normalized < best->representative->normalized))
            best = &b;
    }
    if (!best || best->count < min_votes) return std::nullopt;
    return VoteOutcome{*best->representative, best->count};
}

}  // namespace synthrl
