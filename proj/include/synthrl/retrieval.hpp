#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthrl/gateway.hpp"
#include "synthrl/prompts.hpp"
#include "synthrl/task_spec.hpp"
#include "synthrl/text.hpp"

namespace synthrl {

enum class PassageSource : std::uint8_t { wikipedia, wikihow, stackexchange, custom };

inline std::string_view to_string(PassageSource s) {
    switch (s) {
        case PassageSource::wikipedia: return "wikipedia";
        case PassageSource::wikihow: return "wikihow";
        case PassageSource::stackexchange: return "stackexchange";
        case PassageSource::custom: return "custom";
    }
    return "custom";
}

inline std::optional<PassageSource> parse_passage_source(std::string_view s) {
    if (s == "wikipedia") return PassageSource::wikipedia;
    if (s == "wikihow") return PassageSource::wikihow;
    if (s == "stackexchange") return PassageSource::stackexchange;
    if (s == "custom") return PassageSource::custom;
    return std::nullopt;
}

struct Passage {
    std::string id;
    PassageSource source = PassageSource::custom;
    std::string text;
    std::size_t token_count = 0;
    bool operator==(const Passage&) const = default;
};

struct Posting {
    std::uint32_t doc = 0;  // ordinal into CorpusIndex::passages()
    std::uint32_t tf = 0;
    bool operator==(const Posting&) const = default;
};

class RetrievalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Lucene-style non-negative idf.
inline double bm25_idf(std::size_t doc_count, std::size_t doc_freq) {
    double n = static_cast<double>(doc_count);
    double df = static_cast<double>(doc_freq);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

inline double bm25_term(double idf, double tf, double doc_len, double avg_len, Bm25Params p) {
    return idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * doc_len / avg_len));
}

struct ScoredPassage {
    std::size_t doc = 0;
    double score = 0.0;
};

/// Immutable inverted index over a passage collection.
class CorpusIndex {
public:
    CorpusIndex() = default;

    static CorpusIndex build(std::vector<Passage> passages) {
        if (passages.empty()) throw RetrievalError("corpus is empty; retrieval is impossible");
        CorpusIndex idx;
        std::unordered_map<std::string, std::size_t> seen;
        for (std::size_t d = 0; d < passages.size(); ++d) {
            auto& p = passages[d];
            if (!seen.emplace(p.id, d).second) throw RetrievalError("duplicate passage id '" + p.id + "'");
            auto toks = text::tokenize(p.text);
            p.token_count = toks.size();
            std::map<std::string, std::uint32_t> tf;
            for (auto& t : toks) ++tf[t];
            for (auto& [term, n] : tf) idx.postings_[term].push_back({static_cast<std::uint32_t>(d), n});
        }
        idx.passages_ = std::move(passages);
        idx.finish();
        return idx;
    }

    const std::vector<Passage>& passages() const noexcept { return passages_; }
    std::size_t doc_count() const noexcept { return passages_.size(); }
    double avg_doc_length() const noexcept { return avg_len_; }
    std::size_t doc_length(std::size_t doc) const { return passages_.at(doc).token_count; }
    const std::unordered_map<std::string, std::vector<Posting>>& postings() const noexcept { return postings_; }

    std::size_t document_frequency(const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? 0 : it->second.size();
    }

    std::optional<std::size_t> find(const std::string& passage_id) const {
        auto it = by_id_.find(passage_id);
        if (it == by_id_.end()) return std::nullopt;
        return it->second;
    }

    /// BM25 over query tokens (repeats count). Only documents matching at least
    /// one term are returned, best first, ties by ascending passage id.
    std::vector<ScoredPassage> score(const std::vector<std::string>& query, Bm25Params p = {}) const {
        std::unordered_map<std::size_t, double> acc;
        for (const auto& q : query) {
            auto it = postings_.find(q);
            if (it == postings_.end()) continue;
            double idf = bm25_idf(doc_count(), it->second.size());
            for (const auto& post : it->second)
                acc[post.doc] += bm25_term(idf, post.tf, static_cast<double>(doc_length(post.doc)), avg_len_, p);
        }
        std::vector<ScoredPassage> out;
        out.reserve(acc.size());
        for (auto [d, s] : acc) out.push_back({d, s});
        std::sort(out.begin(), out.end(), [&](const ScoredPassage& a, const ScoredPassage& b) {
            if (a.score != b.score) return a.score > b.score;
            return passages_[a.doc].id < passages_[b.doc].id;
        });
        return out;
    }

    // Binary cache layout (little endian):
    //   "SRLIDX01" | u32 version | u64 content_hash | u64 n_passages
    //   n_passages x { u8 source | str id | str text | u64 token_count }
    //   u64 n_terms | n_terms x { str term | u64 n_postings | n_postings x { u32 doc | u32 tf } }
    // str = u64 byte length + bytes. Terms are written in sorted order.
    static constexpr std::uint32_t cache_version = 1;

    void save(const std::filesystem::path& path, std::uint64_t content_hash) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw RetrievalError("cannot write index cache " + path.string());
        out.write("SRLIDX01", 8);
        put(out, cache_version);
        put(out, content_hash);
        put(out, static_cast<std::uint64_t>(passages_.size()));
        for (const auto& p : passages_) {
            put(out, static_cast<std::uint8_t>(p.source));
            put_str(out, p.id);
            put_str(out, p.text);
            put(out, static_cast<std::uint64_t>(p.token_count));
        }
        std::vector<const std::string*> terms;
        terms.reserve(postings_.size());
        for (const auto& [t, _] : postings_) terms.push_back(&t);
        std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
        put(out, static_cast<std::uint64_t>(terms.size()));
        for (const auto* t : terms) {
            put_str(out, *t);
            const auto& list = postings_.at(*t);
            put(out, static_cast<std::uint64_t>(list.size()));
            for (const auto& p : list) {
                put(out, p.doc);
                put(out, p.tf);
            }
        }
        if (!out) throw RetrievalError("failed writing index cache " + path.string());
    }

    /// Loads a cache written for the same content hash; nullopt on a stale,
    /// missing or unreadable cache.
    static std::optional<CorpusIndex> load(const std::filesystem::path& path, std::uint64_t expected_hash) {
        std::ifstream in(path, std::ios::binary);
        if (!in) return std::nullopt;
        try {
            char magic[8];
            in.read(magic, 8);
            if (!in || std::memcmp(magic, "SRLIDX01", 8) != 0) return std::nullopt;
            if (get<std::uint32_t>(in) != cache_version) return std::nullopt;
            if (get<std::uint64_t>(in) != expected_hash) return std::nullopt;
            CorpusIndex idx;
            auto n = get<std::uint64_t>(in);
            idx.passages_.resize(n);
            for (auto& p : idx.passages_) {
                auto src = get<std::uint8_t>(in);
                if (src > 3) return std::nullopt;
                p.source = static_cast<PassageSource>(src);
                p.id = get_str(in);
                p.text = get_str(in);
                p.token_count = get<std::uint64_t>(in);
            }
            auto terms = get<std::uint64_t>(in);
            for (std::uint64_t i = 0; i < terms; ++i) {
                auto term = get_str(in);
                auto m = get<std::uint64_t>(in);
                auto& list = idx.postings_[term];
                list.resize(m);
                for (auto& p : list) {
                    p.doc = get<std::uint32_t>(in);
                    p.tf = get<std::uint32_t>(in);
                    if (p.doc >= n) return std::nullopt;
                }
            }
            if (n == 0) return std::nullopt;
            idx.finish();
            return idx;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }

private:
    void finish() {
        std::size_t total = 0;
        by_id_.clear();
        for (std::size_t d = 0; d < passages_.size(); ++d) {
            total += passages_[d].token_count;
            by_id_.emplace(passages_[d].id, d);
        }
        avg_len_ = static_cast<double>(total) / static_cast<double>(passages_.size());
    }

    template <typename T>
    static void put(std::ostream& o, T v) {
        unsigned char buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
        o.write(reinterpret_cast<const char*>(buf), sizeof(T));
    }
    static void put_str(std::ostream& o, const std::string& s) {
        put(o, static_cast<std::uint64_t>(s.size()));
        o.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    template <typename T>
    static T get(std::istream& in) {
        unsigned char buf[sizeof(T)];
        in.read(reinterpret_cast<char*>(buf), sizeof(T));
        if (!in) throw std::runtime_error("truncated");
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
        return v;
    }
    static std::string get_str(std::istream& in) {
        auto n = get<std::uint64_t>(in);
        if (n > (1ULL << 32)) throw std::runtime_error("string too long");
        std::string s(n, '\0');
        in.read(s.data(), static_cast<std::streamsize>(n));
        if (!in) throw std::runtime_error("truncated");
        return s;
    }

    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::size_t> by_id_;
    double avg_len_ = 0.0;
};

struct IngestResult {
    CorpusIndex index;
    std::vector<std::string> diagnostics;  // malformed records, by file and record number
    std::uint64_t content_hash = 0;
};

/// Hash over the raw bytes of every corpus file, in order.
inline std::uint64_t corpus_content_hash(const std::vector<std::string>& paths) {
    std::uint64_t h = text::fnv1a("synthrl-corpus-v1");
    for (const auto& p : paths) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw RetrievalError("cannot read corpus file " + p);
        std::stringstream ss;
        ss << in.rdbuf();
        h = text::fnv1a(ss.str(), text::fnv1a("\x1f", h));
    }
    return h;
}

/// Reads line-delimited passage records {"id", "source", "text"}.
/// Malformed records are skipped and reported; duplicate ids and an empty
/// corpus are errors.
inline IngestResult ingest(const std::vector<std::string>& paths) {
    IngestResult r;
    std::vector<Passage> passages;
    for (const auto& path : paths) {
        std::ifstream in(path);
        if (!in) throw RetrievalError("cannot read corpus file " + path);
        std::string line;
        std::size_t record = 0;
        while (std::getline(in, line)) {
            if (text::trim_view(line).empty()) continue;
            ++record;
            auto where = path + " record " + std::to_string(record);
            try {
                auto j = nlohmann::json::parse(line);
                Passage p;
                p.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
                auto src = parse_passage_source(j.value("source", std::string("custom")));
                if (!src) throw std::invalid_argument("unknown source '" + j.value("source", std::string()) + "'");
                p.source = *src;
                p.text = j.at("text").get<std::string>();
                if (p.id.empty()) throw std::invalid_argument("empty id");
                if (text::trim_view(p.text).empty()) throw std::invalid_argument("empty text");
                passages.push_back(std::move(p));
            } catch (const std::exception& e) {
                r.diagnostics.push_back(where + ": malformed: " + e.what());
            }
        }
    }
    r.index = CorpusIndex::build(std::move(passages));
    r.content_hash = corpus_content_hash(paths);
    return r;
}

struct KeywordSet {
    std::vector<std::string> keywords;
};

/// Splits an instructor reply on commas and newlines.
inline KeywordSet parse_keywords(std::string_view reply) {
    KeywordSet ks;
    std::string cur;
    auto flush = [&] {
        auto t = text::trim(cur);
        while (!t.empty() && (t.back() == '.' || t.back() == ';')) t.pop_back();
        t = text::trim(t);
        if (!t.empty()) ks.keywords.push_back(t);
        cur.clear();
    };
    for (char c : reply) {
        if (c == ',' || c == '\n') flush();
        else cur.push_back(c);
    }
    flush();
    if (ks.keywords.empty()) throw RetrievalError("keyword extraction: instructor reply is empty");
    return ks;
}

inline KeywordSet extract_keywords(const TaskDefinition& def, Gateway& instructor, double temperature,
                                   std::size_t max_tokens) {
    PromptContext ctx;
    ctx.task = &def;
    ctx.demos = def.demos;
    CompletionRequest req;
    req.prompt = render_prompt(PromptStage::keyword, ctx);
    req.temperature = temperature;
    req.max_tokens = max_tokens;
    auto res = instructor.complete(req);
    return parse_keywords(res.completions.at(0));
}

/// Top passages for all keywords joined into a single BM25 query.
inline std::vector<Passage> retrieve(const KeywordSet& keywords, const CorpusIndex& index, std::size_t top_k) {
    if (index.doc_count() == 0) throw RetrievalError("retrieve: index is empty");
    auto ranked = index.score(text::tokenize(text::join(keywords.keywords, " ")));
    std::vector<Passage> out;
    for (std::size_t i = 0; i < ranked.size() && i < top_k; ++i) out.push_back(index.passages()[ranked[i].doc]);
    return out;
}

}  // namespace synthrl
