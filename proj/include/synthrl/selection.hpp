#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "synthrl/curriculum.hpp"

namespace synthrl {

/// Pass-rate score: p/L for p > 0, and 1 when the base model never passes.
inline double score(std::size_t pass_count, std::size_t L) {
    if (L == 0) throw std::invalid_argument("score: L must be >= 1");
    if (pass_count > L) throw std::invalid_argument("score: pass_count exceeds L");
    if (pass_count == 0) return 1.0;
    return static_cast<double>(pass_count) / static_cast<double>(L);
}

struct ScoredSample {
    Sample sample;
    std::size_t pass_count = 0;
    std::size_t pass_samples = 0;
    double score = 1.0;
};

inline ScoredSample make_scored(Sample s, std::size_t pass_count, std::size_t L) {
    return ScoredSample{std::move(s), pass_count, L, score(pass_count, L)};
}

inline std::size_t count_passes(const Sample& s, std::span<const std::string> completions, const TaskDefinition& def) {
    std::size_t n = 0;
    for (const auto& c : completions)
        if (is_solved(s, c, def)) ++n;
    return n;
}

inline CompletionRequest pass_request(const Sample& s, const TaskDefinition& def, std::size_t L, double temperature,
                                      std::size_t max_tokens, std::size_t request_index, std::uint64_t seed) {
    if (L < 1) throw std::invalid_argument("pass measurement: L must be >= 1");
    if (!(temperature > 0.0)) throw std::invalid_argument("pass measurement: temperature must be > 0");
    CompletionRequest req;
    req.request_index = request_index;
    req.prompt = solve_prompt(def, s.input);
    req.temperature = temperature;
    req.n_samples = L;
    req.max_tokens = max_tokens;
    req.seed = seed;
    return req;
}

inline std::size_t measure_pass_count(const Sample& s, Gateway& base, const TaskDefinition& def, std::size_t L,
                                      double temperature, std::size_t max_tokens, std::uint64_t seed = 0) {
    auto res = base.complete(pass_request(s, def, L, temperature, max_tokens, 0, seed));
    return count_passes(s, res.completions, def);
}

/// Pass counts for every sample, fanned out through the gateway in chunks.
inline std::vector<std::size_t> measure_pass_counts(std::span<const Sample> samples, Gateway& base,
                                                    const TaskDefinition& def, const PipelineConfig& config,
                                                    std::size_t chunk = 256) {
    std::vector<std::size_t> out(samples.size());
    for (std::size_t lo = 0; lo < samples.size(); lo += chunk) {
        std::size_t hi = std::min(samples.size(), lo + chunk);
        std::vector<CompletionRequest> reqs;
        for (std::size_t i = lo; i < hi; ++i)
            reqs.push_back(pass_request(samples[i], def, config.pass_samples, config.eval_temperature, config.max_tokens,
                                        i, derive_seed(config.seed, "score", i)));
        auto batch = base.complete_many(reqs);
        require_ok(batch, "pass-rate measurement");
        for (std::size_t i = lo; i < hi; ++i)
            out[i] = count_passes(samples[i], batch.results[i - lo].completions, def);
    }
    return out;
}

inline std::vector<ScoredSample> score_samples(std::span<const Sample> samples, Gateway& base, const TaskDefinition& def,
                                               const PipelineConfig& config) {
    auto counts = measure_pass_counts(samples, base, def, config);
    std::vector<ScoredSample> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        out.push_back(make_scored(samples[i], counts[i], config.pass_samples));
    return out;
}

struct SelectionResult {
    /// Indices into the scored list, in selection order.
    std::vector<std::size_t> order;
    /// Selected samples with score 1, split by cause.
    std::size_t padded_perfect = 0;
    std::size_t padded_zero = 0;
    /// Selected samples whose score equals their predecessor's (resolved by input order).
    std::size_t tie_events = 0;
    std::vector<std::string> warnings;
};

namespace selection_detail {

// 0 for everything except zero-pass samples, which go last among score-1 ties.
inline int padding_rank(const ScoredSample& s) { return s.pass_count == 0 ? 1 : 0; }

// Rank key under each strategy; smaller is selected first.
inline double strategy_key(const ScoredSample& s, SelectionStrategy strategy) {
    double rate = static_cast<double>(s.pass_count) / static_cast<double>(s.pass_samples);
    switch (strategy) {
        case SelectionStrategy::high_potential: return s.score;
        case SelectionStrategy::easy: return -rate;
        case SelectionStrategy::hard: return rate;
        case SelectionStrategy::full: return 0.0;
    }
    return s.score;
}

}  // namespace selection_detail

/// Ascending by score, stable in input order; among score-1 samples the
/// perfect-pass ones precede zero-pass ones. The easy/hard/full strategies are
/// the comparison baselines: highest pass rate first, lowest first, input order.
inline SelectionResult select(std::span<const ScoredSample> scored, std::size_t M,
                              SelectionStrategy strategy = SelectionStrategy::high_potential) {
    if (scored.empty()) throw std::invalid_argument("select: scored set is empty");
    if (M < 1) throw std::invalid_argument("select: M must be >= 1");
    std::vector<std::size_t> idx(scored.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto key = [&](std::size_t i) { return selection_detail::strategy_key(scored[i], strategy); };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        double ka = key(a), kb = key(b);
        if (ka != kb) return ka < kb;
        if (strategy == SelectionStrategy::high_potential)
            return selection_detail::padding_rank(scored[a]) < selection_detail::padding_rank(scored[b]);
        return false;
    });

    SelectionResult r;
    std::size_t take = std::min(M, scored.size());
    r.order.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t k = 0; k < take; ++k) {
        const auto& s = scored[r.order[k]];
        if (k > 0 && key(r.order[k]) == key(r.order[k - 1])) ++r.tie_events;
        if (s.score == 1.0) (s.pass_count == 0 ? r.padded_zero : r.padded_perfect) += 1;
    }
    if (M > scored.size())
        r.warnings.push_back("m_train " + std::to_string(M) + " exceeds the " + std::to_string(scored.size()) +
                             " scored samples; selecting all");
    if (strategy == SelectionStrategy::high_potential && r.padded_perfect + r.padded_zero > 0)
        r.warnings.push_back("padded with " + std::to_string(r.padded_perfect + r.padded_zero) +
                             " score-1 samples (" + std::to_string(r.padded_perfect) + " always passed, " +
                             std::to_string(r.padded_zero) + " never passed)");
    return r;
}

inline std::vector<Sample> selected_samples(std::span<const ScoredSample> scored, const SelectionResult& r) {
    std::vector<Sample> out;
    out.reserve(r.order.size());
    for (auto i : r.order) out.push_back(scored[i].sample);
    return out;
}

inline nlohmann::ordered_json to_json(const ScoredSample& s) {
    nlohmann::ordered_json j = to_json(s.sample);
    j["pass_count"] = s.pass_count;
    j["pass_samples"] = s.pass_samples;
    j["score"] = s.score;
    return j;
}

inline ScoredSample scored_from_json(const nlohmann::json& j) {
    ScoredSample s;
    s.sample = sample_from_json(j);
    s.pass_count = j.at("pass_count").get<std::size_t>();
    s.pass_samples = j.at("pass_samples").get<std::size_t>();
    s.score = score(s.pass_count, s.pass_samples);
    if (j.at("score").get<double>() != s.score)
        throw std::invalid_argument("sample " + s.sample.id + ": stored score disagrees with pass_count");
    return s;
}

inline void save_scored(const std::filesystem::path& path, const std::vector<ScoredSample>& v) {
    write_jsonl(path, v, [](const ScoredSample& s) { return to_json(s); });
}

inline std::vector<ScoredSample> load_scored(const std::filesystem::path& path) {
    return read_jsonl(path, [](const nlohmann::json& j) { return scored_from_json(j); });
}

}  // namespace synthrl
