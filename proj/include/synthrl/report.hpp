#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthrl/export.hpp"

namespace synthrl {

using Histogram10 = std::array<std::size_t, 10>;

/// Ten equal-width pass-rate bins over [0,1]; a rate of exactly 1 lands in the top bin.
inline std::size_t pass_rate_bin(std::size_t pass_count, std::size_t L) {
    if (L == 0 || pass_count > L) throw std::invalid_argument("pass_rate_bin: need 0 <= pass_count <= L, L >= 1");
    return std::min<std::size_t>(9, (10 * pass_count) / L);
}

inline Histogram10 pass_rate_histogram(std::span<const std::size_t> pass_counts, std::size_t L) {
    Histogram10 h{};
    for (auto p : pass_counts) ++h[pass_rate_bin(p, L)];
    return h;
}

/// Mass strictly inside (0.1, 0.9): bins 1..8.
inline std::size_t middle_mass(const Histogram10& h) {
    std::size_t m = 0;
    for (std::size_t b = 1; b <= 8; ++b) m += h[b];
    return m;
}

struct Tokenizer {
    std::string name;
    std::function<std::size_t(std::string_view)> count;
};

inline Tokenizer default_tokenizer() { return {"word_punct", [](std::string_view s) { return text::word_punct_count(s); }}; }

struct LengthStats {
    std::string tokenizer;
    std::vector<std::size_t> counts;
    std::size_t min = 0;
    std::size_t max = 0;
    double mean = 0.0;
    double median = 0.0;
};

inline LengthStats length_stats(std::span<const Sample> samples, const Tokenizer& tok = default_tokenizer()) {
    LengthStats s;
    s.tokenizer = tok.name;
    for (const auto& x : samples) s.counts.push_back(tok.count(x.input));
    if (s.counts.empty()) return s;
    auto sorted = s.counts;
    std::sort(sorted.begin(), sorted.end());
    s.min = sorted.front();
    s.max = sorted.back();
    double total = 0;
    for (auto c : sorted) total += static_cast<double>(c);
    s.mean = total / static_cast<double>(sorted.size());
    std::size_t n = sorted.size();
    s.median = n % 2 ? static_cast<double>(sorted[n / 2])
                     : (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2])) / 2.0;
    return s;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// (i, j) with i < j for the k-th pair in row-major order over n items.
inline std::pair<std::size_t, std::size_t> pair_at(std::size_t k, std::size_t n) {
    // Row i starts at i*(2n-i-1)/2.
    auto row_start = [n](std::size_t i) { return i * (2 * n - i - 1) / 2; };
    std::size_t lo = 0, hi = n - 1;
    while (lo + 1 < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (row_start(mid) <= k) lo = mid;
        else hi = mid;
    }
    return {lo, lo + 1 + (k - row_start(lo))};
}

/// All pairs when there are at most `limit`, otherwise `limit` distinct pairs
/// drawn uniformly with a seeded generator. Returned in ascending pair order.
inline std::vector<std::pair<std::size_t, std::size_t>> similarity_pairs(std::size_t n, std::size_t limit,
                                                                         std::uint64_t seed) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (n < 2) return out;
    std::size_t total = n * (n - 1) / 2;
    std::vector<std::size_t> ks;
    if (total <= limit) {
        ks.resize(total);
        for (std::size_t k = 0; k < total; ++k) ks[k] = k;
    } else {
        // Floyd's sampling without replacement.
        std::mt19937_64 rng(seed);
        std::unordered_set<std::size_t> chosen;
        for (std::size_t j = total - limit; j < total; ++j) {
            std::uniform_int_distribution<std::size_t> d(0, j);
            std::size_t t = d(rng);
            chosen.insert(chosen.count(t) ? j : t);
        }
        ks.assign(chosen.begin(), chosen.end());
        std::sort(ks.begin(), ks.end());
    }
    out.reserve(ks.size());
    for (auto k : ks) out.push_back(pair_at(k, n));
    return out;
}

struct SimilarityStats {
    std::size_t total_pairs = 0;
    std::size_t measured_pairs = 0;
    double mean = 0.0;
    /// 20 bins over [-1, 1].
    std::array<std::size_t, 20> histogram{};
    std::vector<double> values;
};

inline std::size_t similarity_bin(double c) {
    auto b = static_cast<long>(std::floor((c + 1.0) * 10.0));
    return static_cast<std::size_t>(std::clamp(b, 0L, 19L));
}

inline SimilarityStats similarity_stats(const std::vector<std::vector<double>>& embeddings, std::size_t limit,
                                        std::uint64_t seed) {
    SimilarityStats s;
    std::size_t n = embeddings.size();
    s.total_pairs = n < 2 ? 0 : n * (n - 1) / 2;
    double sum = 0;
    for (auto [i, j] : similarity_pairs(n, limit, seed)) {
        double c = cosine(embeddings[i], embeddings[j]);
        s.values.push_back(c);
        ++s.histogram[similarity_bin(c)];
        sum += c;
    }
    s.measured_pairs = s.values.size();
    if (s.measured_pairs) s.mean = sum / static_cast<double>(s.measured_pairs);
    return s;
}

struct DatasetReport {
    std::size_t sample_count = 0;
    std::optional<Histogram10> pass_rate_histogram;
    std::size_t pass_samples = 0;
    LengthStats length;
    std::optional<SimilarityStats> similarity;
    /// Sections that could not be produced, with the reason.
    std::vector<std::string> notes;
};

struct ReportInputs {
    std::optional<std::vector<std::size_t>> pass_counts;
    std::size_t pass_samples = 0;
    Gateway* embedder = nullptr;
    std::size_t pair_limit = defaults::similarity_pair_limit;
    std::uint64_t seed = 0;
    Tokenizer tokenizer = default_tokenizer();
};

inline DatasetReport report(std::span<const Sample> samples, const ReportInputs& in) {
    DatasetReport r;
    r.sample_count = samples.size();
    if (in.pass_counts) {
        if (in.pass_counts->size() != samples.size())
            throw std::invalid_argument("report: pass_counts and samples differ in length");
        r.pass_rate_histogram = pass_rate_histogram(*in.pass_counts, in.pass_samples);
        r.pass_samples = in.pass_samples;
    } else {
        r.notes.push_back("difficulty: no pass counts available");
    }
    r.length = length_stats(samples, in.tokenizer);
    if (in.embedder) {
        std::vector<std::string> inputs;
        for (const auto& s : samples) inputs.push_back(s.input);
        try {
            r.similarity = similarity_stats(in.embedder->embed(inputs), in.pair_limit, in.seed);
        } catch (const GatewayError& e) {
            r.notes.push_back(std::string("similarity: ") + e.what());
        }
    } else {
        r.notes.push_back("similarity: no embedding backend configured");
    }
    return r;
}

inline nlohmann::ordered_json to_json(const DatasetReport& r) {
    nlohmann::ordered_json j;
    j["sample_count"] = r.sample_count;
    if (r.pass_rate_histogram) {
        j["difficulty"] = {{"pass_samples", r.pass_samples}, {"bins", *r.pass_rate_histogram}};
    }
    j["length"] = {{"tokenizer", r.length.tokenizer}, {"min", r.length.min},       {"max", r.length.max},
                   {"mean", r.length.mean},           {"median", r.length.median}, {"counts", r.length.counts}};
    if (r.similarity) {
        j["similarity"] = {{"total_pairs", r.similarity->total_pairs},
                           {"measured_pairs", r.similarity->measured_pairs},
                           {"mean", r.similarity->mean},
                           {"histogram", r.similarity->histogram}};
    }
    j["notes"] = r.notes;
    return j;
}

inline std::string summary_text(const DatasetReport& r) {
    std::ostringstream os;
    os << "samples: " << r.sample_count << '\n';
    if (r.pass_rate_histogram) {
        os << "pass-rate histogram (L=" << r.pass_samples << "):\n";
        for (std::size_t b = 0; b < 10; ++b) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "  %.1f-%.1f  %zu\n", b / 10.0, (b + 1) / 10.0, (*r.pass_rate_histogram)[b]);
            os << buf;
        }
    }
    os << "input length (" << r.length.tokenizer << "): min " << r.length.min << ", median " << r.length.median
       << ", mean " << r.length.mean << ", max " << r.length.max << '\n';
    if (r.similarity)
        os << "similarity: mean cosine " << r.similarity->mean << " over " << r.similarity->measured_pairs << " of "
           << r.similarity->total_pairs << " pairs\n";
    for (const auto& n : r.notes) os << "note: " << n << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Evaluation

struct LabeledRecord {
    std::string input;
    std::string answer;  // raw final answer
};

/// Accepts {"input", "answer"} or {"input", "output"} (answer extracted from output).
inline LabeledRecord labeled_from_json(const nlohmann::json& j, AnswerFormat fmt) {
    LabeledRecord r;
    r.input = j.at("input").get<std::string>();
    if (j.contains("answer")) {
        r.answer = j.at("answer").is_string() ? j.at("answer").get<std::string>() : j.at("answer").dump();
    } else {
        auto a = extract_answer(j.at("output").get<std::string>(), fmt);
        if (!a) throw std::invalid_argument("test record output has no extractable answer");
        r.answer = a->raw;
    }
    return r;
}

inline std::vector<LabeledRecord> load_test_set(const std::filesystem::path& path, AnswerFormat fmt) {
    return read_jsonl(path, [fmt](const nlohmann::json& j) { return labeled_from_json(j, fmt); });
}

/// Fraction of records whose greedy completion's answer equals the label.
inline double evaluate(Gateway& model, std::span<const LabeledRecord> test_set, const TaskDefinition& def,
                       std::size_t max_tokens, std::uint64_t seed = 0) {
    if (test_set.empty()) throw std::invalid_argument("evaluate: test set is empty");
    std::vector<CompletionRequest> reqs;
    for (std::size_t i = 0; i < test_set.size(); ++i)
        reqs.push_back(greedy_request(test_set[i].input, def, max_tokens, i, derive_seed(seed, "eval", i)));
    auto batch = model.complete_many(reqs);
    require_ok(batch, "evaluation");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        auto got = extract_answer(batch.results[i].completions.at(0), def.answer_format);
        ExtractedAnswer gold{test_set[i].answer, normalize(test_set[i].answer, def.answer_format), def.answer_format};
        if (got && answers_equal(*got, gold)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

}  // namespace synthrl
