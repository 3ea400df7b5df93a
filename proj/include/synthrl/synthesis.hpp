#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "synthrl/answer_codec.hpp"
#include "synthrl/config.hpp"
#include "synthrl/gateway.hpp"
#include "synthrl/prompts.hpp"
#include "synthrl/record_parser.hpp"
#include "synthrl/retrieval.hpp"
#include "synthrl/sample.hpp"

namespace synthrl {

struct Pattern {
    std::string text;
};

/// A generated (input, output) pair that has not been verified yet.
struct Candidate {
    std::string input;
    std::string output;
    std::vector<std::string> source_passage_ids;
};

enum class RejectionReason { no_majority, consensus_mismatch, unextractable, duplicate, unparseable };

inline std::string_view to_string(RejectionReason r) {
    switch (r) {
        case RejectionReason::no_majority: return "no_majority";
        case RejectionReason::consensus_mismatch: return "consensus_mismatch";
        case RejectionReason::unextractable: return "unextractable";
        case RejectionReason::duplicate: return "duplicate";
        case RejectionReason::unparseable: return "unparseable";
    }
    return "unparseable";
}

struct Rejection {
    RejectionReason reason = RejectionReason::unparseable;
    std::string detail;
};

using Verdict = std::variant<VerificationRecord, Rejection>;

struct VoteSettings {
    std::size_t vote_count = 1;
    std::size_t min_votes = 1;
    double temperature = 0.0;
    std::size_t max_tokens = 0;

    static VoteSettings from(const PipelineConfig& c) {
        return {c.vote_count, c.effective_min_votes(), c.gen_temperature, c.max_tokens};
    }
};

class StageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SynthesisStats {
    std::size_t raw_generations = 0;
    std::size_t accepted = 0;
    std::map<std::string, std::size_t> rejections;  // by reason
};

class BudgetExhausted : public std::runtime_error {
public:
    BudgetExhausted(std::vector<Sample> partial, SynthesisStats stats, std::size_t wanted)
        : std::runtime_error("generation budget exhausted after " + std::to_string(stats.raw_generations) +
                             " raw generations with " + std::to_string(partial.size()) + " of " +
                             std::to_string(wanted) + " samples accepted"),
          partial_(std::move(partial)),
          stats_(std::move(stats)) {}

    const std::vector<Sample>& partial() const noexcept { return partial_; }
    const SynthesisStats& stats() const noexcept { return stats_; }

private:
    std::vector<Sample> partial_;
    SynthesisStats stats_;
};

/// Mixes the run seed with a stage tag and an ordinal so HTTP backends that
/// honour "seed" get reproducible, distinct draws.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage, std::size_t ordinal) {
    auto h = text::fnv1a(stage, text::fnv1a(std::to_string(seed)));
    return text::fnv1a(std::to_string(ordinal), h) >> 1;
}

/// Throws StageError naming every failed request in a batch.
inline void require_ok(const BatchResult& b, std::string_view what) {
    if (b.ok()) return;
    std::string msg = std::string(what) + ": " + std::to_string(b.errors.size()) + " request(s) failed";
    for (std::size_t i = 0; i < b.errors.size() && i < 5; ++i)
        msg += "\n  [" + std::to_string(b.errors[i].request_index) + "] " + b.errors[i].message;
    throw StageError(msg);
}

inline Pattern summarize_pattern(const std::vector<DemoExample>& demos, const TaskDefinition& def, Gateway& instructor,
                                 double temperature, std::size_t max_tokens) {
    if (demos.empty()) throw std::invalid_argument("summarize_pattern: demos must not be empty");
    PromptContext ctx;
    ctx.task = &def;
    ctx.demos = demos;
    CompletionRequest req;
    req.prompt = render_prompt(PromptStage::pattern, ctx);
    req.temperature = temperature;
    req.max_tokens = max_tokens;
    auto res = instructor.complete(req);
    auto text = res.completions.at(0);
    if (text::trim_view(text).empty()) throw StageError("pattern summarization: instructor reply is empty");
    return Pattern{text};
}

/// Passages for the given generation attempt: successive attempts take
/// successive windows of `window` passages, cycling through the list.
inline std::vector<const Passage*> passage_window(std::span<const Passage> passages, std::size_t attempt,
                                                  std::size_t window) {
    std::vector<const Passage*> out;
    if (passages.empty() || window == 0) return out;
    std::size_t n = passages.size();
    std::size_t windows = (n + window - 1) / window;
    std::size_t start = (attempt % windows) * window;
    for (std::size_t k = 0; k < std::min(window, n); ++k) out.push_back(&passages[(start + k) % n]);
    return out;
}

inline std::size_t window_count(std::size_t passages, std::size_t window) {
    if (passages == 0 || window == 0) return 1;
    return (passages + window - 1) / window;
}

inline std::string generation_prompt(const TaskDefinition& def, const std::optional<Pattern>& pattern,
                                     const std::vector<const Passage*>& window) {
    PromptContext ctx;
    ctx.task = &def;
    if (pattern) ctx.pattern = pattern->text;
    // Demos ride along only together with their pattern.
    if (pattern) ctx.demos = def.demos;
    for (const auto* p : window) ctx.passages.push_back(p->text);
    return render_prompt(PromptStage::generate, ctx);
}

inline std::variant<Candidate, Rejection> parse_candidate(std::string_view reply,
                                                          const std::vector<const Passage*>& window) {
    std::string why;
    auto rec = parse_record(reply, &why);
    if (!rec) return Rejection{RejectionReason::unparseable, why};
    Candidate c{rec->input, rec->output, {}};
    for (const auto* p : window) c.source_passage_ids.push_back(p->id);
    return c;
}

/// One generation call. `draw` numbers repeated draws from the same window.
inline std::variant<Candidate, Rejection> generate_raw(std::span<const Passage> passages,
                                                       const std::optional<Pattern>& pattern, const TaskDefinition& def,
                                                       Gateway& instructor, const PipelineConfig& config,
                                                       std::size_t attempt = 0) {
    auto window = passage_window(passages, attempt, config.retrieval_top_k);
    CompletionRequest req;
    req.prompt = generation_prompt(def, pattern, window);
    req.temperature = config.gen_temperature;
    req.max_tokens = config.max_tokens;
    req.first_sample = attempt / window_count(passages.size(), config.retrieval_top_k);
    req.seed = derive_seed(config.seed, "generate", attempt);
    auto res = instructor.complete(req);
    return parse_candidate(res.completions.at(0), window);
}

inline CompletionRequest vote_request(const std::string& input, const TaskDefinition& def, const VoteSettings& v,
                                      std::size_t request_index, std::uint64_t seed) {
    CompletionRequest req;
    req.request_index = request_index;
    req.prompt = solve_prompt(def, input);
    req.temperature = v.temperature;
    req.n_samples = v.vote_count;
    req.max_tokens = v.max_tokens;
    req.seed = seed;
    return req;
}

/// Accepts the candidate iff the vote winner clears min_votes and agrees with
/// the candidate's own final answer.
inline Verdict judge_votes(const std::string& candidate_output, const TaskDefinition& def,
                           std::span<const std::string> votes, std::size_t min_votes) {
    auto own = extract_answer(candidate_output, def.answer_format);
    if (!own) return Rejection{RejectionReason::unextractable, "candidate output has no final answer"};
    std::vector<std::optional<ExtractedAnswer>> answers;
    answers.reserve(votes.size());
    for (const auto& v : votes) answers.push_back(extract_answer(v, def.answer_format));
    auto outcome = majority_vote(answers, min_votes);
    if (!outcome) return Rejection{RejectionReason::no_majority, "no answer reached " + std::to_string(min_votes) + " votes"};
    if (!answers_equal(outcome->winner, *own))
        return Rejection{RejectionReason::consensus_mismatch,
                         "consensus '" + outcome->winner.normalized + "' vs candidate '" + own->normalized + "'"};
    VerificationRecord rec;
    rec.votes_cast = votes.size();
    rec.winning_count = outcome->count;
    rec.agreement_ratio = static_cast<double>(outcome->count) / static_cast<double>(votes.size());
    rec.consensus = own->normalized;
    return rec;
}

/// Votes are drawn from the task input alone; the voter never sees the candidate output.
inline Verdict verify(const Candidate& candidate, const TaskDefinition& def, Gateway& instructor, const VoteSettings& v,
                      std::uint64_t seed = 0) {
    if (v.vote_count < 1) throw std::invalid_argument("verify: vote_count must be >= 1");
    if (!extract_answer(candidate.output, def.answer_format))
        return Rejection{RejectionReason::unextractable, "candidate output has no final answer"};
    auto res = instructor.complete(vote_request(candidate.input, def, v, 0, seed));
    return judge_votes(candidate.output, def, res.completions, v.min_votes);
}

/// Exact-match duplicate check on lowercased, whitespace-collapsed input.
inline bool is_duplicate(const std::string& candidate_input, std::span<const Sample> accepted) {
    auto key = dedup_key(candidate_input);
    for (const auto& s : accepted)
        if (dedup_key(s.input) == key) return true;
    return false;
}

inline std::string initial_sample_id(std::size_t ordinal) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "init-%05zu", ordinal);
    return buf;
}

struct SynthesisResult {
    std::vector<Sample> samples;
    SynthesisStats stats;
};

/// Generates, deduplicates and verifies until n_initial samples are accepted or
/// ceil(budget_multiplier * n_initial) raw generations have been spent.
/// Each round issues its generations as one gateway batch, then its votes as
/// another; acceptance is decided sequentially in attempt order.
inline SynthesisResult synthesize_initial(const TaskDefinition& def, const PipelineConfig& config,
                                          std::span<const Passage> passages, const std::optional<Pattern>& pattern,
                                          Gateway& instructor) {
    const std::size_t want = config.n_initial;
    const auto budget =
        static_cast<std::size_t>(std::ceil(config.generation_budget_multiplier * static_cast<double>(want) - 1e-9));
    const std::size_t windows = window_count(passages.size(), config.retrieval_top_k);
    const auto votes = VoteSettings::from(config);

    SynthesisResult out;
    auto& stats = out.stats;
    std::unordered_set<std::string> accepted_keys;
    auto reject = [&](RejectionReason r) { ++stats.rejections[std::string(to_string(r))]; };

    while (out.samples.size() < want && stats.raw_generations < budget) {
        std::size_t need = std::min(want - out.samples.size(), budget - stats.raw_generations);
        std::size_t first_attempt = stats.raw_generations;

        std::vector<CompletionRequest> gen;
        std::vector<std::vector<const Passage*>> gen_windows;
        for (std::size_t a = first_attempt; a < first_attempt + need; ++a) {
            auto window = passage_window(passages, a, config.retrieval_top_k);
            CompletionRequest req;
            req.request_index = a;
            req.prompt = generation_prompt(def, pattern, window);
            req.temperature = config.gen_temperature;
            req.max_tokens = config.max_tokens;
            req.first_sample = a / windows;
            req.seed = derive_seed(config.seed, "generate", a);
            gen.push_back(std::move(req));
            gen_windows.push_back(std::move(window));
        }
        auto gen_batch = instructor.complete_many(gen);
        require_ok(gen_batch, "generation");
        stats.raw_generations += need;

        std::vector<std::optional<Candidate>> candidates(need);
        std::unordered_set<std::string> pending;
        std::vector<CompletionRequest> vote_reqs;
        for (std::size_t k = 0; k < need; ++k) {
            auto parsed = parse_candidate(gen_batch.results[k].completions.at(0), gen_windows[k]);
            if (auto* rej = std::get_if<Rejection>(&parsed)) {
                reject(rej->reason);
                continue;
            }
            auto& cand = std::get<Candidate>(parsed);
            auto key = dedup_key(cand.input);
            if (accepted_keys.count(key) || pending.count(key)) {
                reject(RejectionReason::duplicate);
                continue;
            }
            if (!extract_answer(cand.output, def.answer_format)) {
                reject(RejectionReason::unextractable);
                continue;
            }
            pending.insert(key);
            vote_reqs.push_back(vote_request(cand.input, def, votes, first_attempt + k,
                                             derive_seed(config.seed, "verify", first_attempt + k)));
            candidates[k] = std::move(cand);
        }
        auto vote_batch = instructor.complete_many(vote_reqs);
        require_ok(vote_batch, "verification");

        std::size_t v = 0;
        for (std::size_t k = 0; k < need; ++k) {
            if (!candidates[k]) continue;
            const auto& votes_for = vote_batch.results[v++].completions;
            auto verdict = judge_votes(candidates[k]->output, def, votes_for, votes.min_votes);
            if (auto* rej = std::get_if<Rejection>(&verdict)) {
                reject(rej->reason);
                continue;
            }
            if (out.samples.size() >= want) continue;
            Sample s;
            s.id = initial_sample_id(out.samples.size());
            s.input = std::move(candidates[k]->input);
            s.output = std::move(candidates[k]->output);
            s.provenance = Provenance::initial;
            s.source_passage_ids = std::move(candidates[k]->source_passage_ids);
            s.verification = std::get<VerificationRecord>(verdict);
            accepted_keys.insert(dedup_key(s.input));
            out.samples.push_back(std::move(s));
        }
    }
    stats.accepted = out.samples.size();
    if (out.samples.size() < want) throw BudgetExhausted(std::move(out.samples), stats, want);
    return out;
}

}  // namespace synthrl
