#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthrl/text.hpp"

namespace synthrl {

enum class Provenance { initial, harder, easier };

inline std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::initial: return "initial";
        case Provenance::harder: return "harder";
        case Provenance::easier: return "easier";
    }
    return "initial";
}

inline Provenance parse_provenance(std::string_view s) {
    if (s == "initial") return Provenance::initial;
    if (s == "harder") return Provenance::harder;
    if (s == "easier") return Provenance::easier;
    throw std::invalid_argument("unknown provenance '" + std::string(s) + "'");
}

struct VerificationRecord {
    std::size_t votes_cast = 0;
    std::size_t winning_count = 0;
    double agreement_ratio = 0.0;
    /// Normalized consensus answer.
    std::string consensus;
    bool operator==(const VerificationRecord&) const = default;
};

struct Sample {
    std::string id;
    std::string input;
    std::string output;
    Provenance provenance = Provenance::initial;
    std::optional<std::string> parent_id;
    std::vector<std::string> source_passage_ids;
    VerificationRecord verification;
    bool operator==(const Sample&) const = default;
};

/// Key used for exact-match deduplication: lowercased, whitespace-collapsed input.
inline std::string dedup_key(std::string_view input) { return text::ascii_lower(text::collapse_whitespace(input)); }

inline nlohmann::ordered_json to_json(const Sample& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["input"] = s.input;
    j["output"] = s.output;
    j["provenance"] = std::string(to_string(s.provenance));
    j["parent_id"] = s.parent_id ? nlohmann::ordered_json(*s.parent_id) : nlohmann::ordered_json(nullptr);
    j["source_passage_ids"] = s.source_passage_ids;
    j["verification"] = {{"votes_cast", s.verification.votes_cast},
                         {"winning_count", s.verification.winning_count},
                         {"agreement_ratio", s.verification.agreement_ratio},
                         {"consensus", s.verification.consensus}};
    return j;
}

inline Sample sample_from_json(const nlohmann::json& j) {
    Sample s;
    s.id = j.at("id").get<std::string>();
    s.input = j.at("input").get<std::string>();
    s.output = j.at("output").get<std::string>();
    s.provenance = parse_provenance(j.at("provenance").get<std::string>());
    if (j.contains("parent_id") && !j.at("parent_id").is_null()) s.parent_id = j.at("parent_id").get<std::string>();
    if (j.contains("source_passage_ids"))
        s.source_passage_ids = j.at("source_passage_ids").get<std::vector<std::string>>();
    const auto& v = j.at("verification");
    s.verification.votes_cast = v.at("votes_cast").get<std::size_t>();
    s.verification.winning_count = v.at("winning_count").get<std::size_t>();
    s.verification.agreement_ratio = v.at("agreement_ratio").get<double>();
    s.verification.consensus = v.at("consensus").get<std::string>();
    if ((s.provenance == Provenance::initial) == s.parent_id.has_value())
        throw std::invalid_argument("sample " + s.id + ": parent_id must be set iff provenance is not initial");
    return s;
}

class PersistenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Writes one JSON document per line.
template <typename Range, typename ToJson>
void write_jsonl(const std::filesystem::path& path, const Range& items, ToJson&& to_json_fn) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PersistenceError("cannot write " + path.string());
    for (const auto& it : items) out << to_json_fn(it).dump() << '\n';
    if (!out) throw PersistenceError("failed writing " + path.string());
}

template <typename FromJson>
auto read_jsonl(const std::filesystem::path& path, FromJson&& from_json_fn) {
    using T = decltype(from_json_fn(nlohmann::json{}));
    std::ifstream in(path);
    if (!in) throw PersistenceError("cannot read " + path.string());
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim_view(line).empty()) continue;
        try {
            out.push_back(from_json_fn(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw PersistenceError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples) {
    write_jsonl(path, samples, [](const Sample& s) { return to_json(s); });
}

inline std::vector<Sample> load_samples(const std::filesystem::path& path) {
    return read_jsonl(path, [](const nlohmann::json& j) { return sample_from_json(j); });
}

}  // namespace synthrl
