#pragma once

#include <cctype>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "synthrl/text.hpp"

namespace synthrl {

struct RawRecord {
    std::string input;
    std::string output;
    bool operator==(const RawRecord&) const = default;
};

namespace record_detail {

// End (exclusive) of the balanced {...} starting at open, honoring quoted strings.
inline std::optional<std::size_t> balanced_end(std::string_view s, std::size_t open) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        if (c == '"' || c == '\'') {
            // An apostrophe inside a bare word is not a string delimiter.
            if (c == '\'' && i > 0 && std::isalnum(static_cast<unsigned char>(s[i - 1]))) continue;
            quote = c;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::nullopt;
}

inline void append_json_escaped(std::string& out, char c) {
    switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned char>(c));
                out += buf;
            } else {
                out.push_back(c);
            }
    }
}

// Rewrites a Python-literal / lenient-JSON object into strict JSON: either quote
// style, True/False/None, raw control characters in strings, trailing commas.
inline std::string to_strict_json(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 16);
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == '"' || c == '\'') {
            char q = c;
            out.push_back('"');
            ++i;
            while (i < s.size() && s[i] != q) {
                char d = s[i];
                if (d == '\\' && i + 1 < s.size()) {
                    char e = s[i + 1];
                    i += 2;
                    switch (e) {
                        case 'n': out += "\\n"; break;
                        case 't': out += "\\t"; break;
                        case 'r': out += "\\r"; break;
                        case '\\': out += "\\\\"; break;
                        case '"': out += "\\\""; break;
                        case '\'': out.push_back('\''); break;
                        case '/': out.push_back('/'); break;
                        case 'u':
                            out += "\\u";
                            break;
                        default:
                            // Unknown escapes (e.g. LaTeX "\frac") keep their backslash.
                            out += "\\\\";
                            out.push_back(e);
                    }
                    continue;
                }
                append_json_escaped(out, d);
                ++i;
            }
            out.push_back('"');
            ++i;
            continue;
        }
        if (c == ',') {
            std::size_t j = i + 1;
            while (j < s.size() && text::is_space(s[j])) ++j;
            if (j < s.size() && (s[j] == '}' || s[j] == ']')) {
                i = j;
                continue;
            }
        }
        auto word = [&](std::string_view w) { return s.substr(i, w.size()) == w; };
        if (word("True")) {
            out += "true";
            i += 4;
            continue;
        }
        if (word("False")) {
            out += "false";
            i += 5;
            continue;
        }
        if (word("None")) {
            out += "null";
            i += 4;
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

inline std::optional<nlohmann::json> parse_object(std::string_view span) {
    auto j = nlohmann::json::parse(span, nullptr, false);
    // A strict parse that produced form feeds or backspaces almost always ate a
    // LaTeX command ("\\frac", "\\beta"); fall through to the lenient reading.
    if (!j.is_discarded() && j.is_object()) {
        auto dumped = j.dump();
        if (!text::contains(dumped, "\\f") && !text::contains(dumped, "\\b")) return j;
    }
    j = nlohmann::json::parse(to_strict_json(span), nullptr, false);
    if (!j.is_discarded() && j.is_object()) return j;
    return std::nullopt;
}

inline std::string value_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return {};
    return v.dump();
}

inline std::optional<RawRecord> record_from(const nlohmann::json& obj, int depth = 0) {
    const nlohmann::json* in = nullptr;
    const nlohmann::json* out = nullptr;
    for (const auto& [k, v] : obj.items()) {
        auto key = text::ascii_lower(text::trim(k));
        if (key == "input") in = &v;
        else if (key == "output") out = &v;
    }
    if (in && out) {
        RawRecord r{text::trim(value_text(*in)), text::trim(value_text(*out))};
        if (!r.input.empty() && !r.output.empty()) return r;
        return std::nullopt;
    }
    if (depth > 2) return std::nullopt;
    // Wrapped forms such as {"new_example": {...}} or {"examples": [{...}]}.
    for (const auto& [k, v] : obj.items()) {
        if (v.is_object()) {
            if (auto r = record_from(v, depth + 1)) return r;
        } else if (v.is_array()) {
            for (const auto& e : v)
                if (e.is_object())
                    if (auto r = record_from(e, depth + 1)) return r;
        }
    }
    return std::nullopt;
}

}  // namespace record_detail

/// Extracts the first {input, output} record from a model reply. Accepts code
/// fences, surrounding prose, Python dictionary literals and one level of wrapping.
/// On failure returns nullopt and, if `why` is given, a short reason.
inline std::optional<RawRecord> parse_record(std::string_view reply, std::string* why = nullptr) {
    bool saw_object = false;
    for (std::size_t pos = reply.find('{'); pos != std::string_view::npos; pos = reply.find('{', pos + 1)) {
        auto end = record_detail::balanced_end(reply, pos);
        if (!end) continue;
        auto obj = record_detail::parse_object(reply.substr(pos, *end - pos));
        if (!obj) continue;
        saw_object = true;
        if (auto r = record_detail::record_from(*obj)) return r;
    }
    if (why) *why = saw_object ? "record lacks non-empty input and output keys" : "no dictionary found in reply";
    return std::nullopt;
}

}  // namespace synthrl
