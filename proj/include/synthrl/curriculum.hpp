#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "synthrl/synthesis.hpp"

namespace synthrl {

struct SolvabilityPartition {
    std::vector<Sample> solved;
    std::vector<Sample> unsolved;
};

/// True iff the greedy completion's extracted answer equals the sample label.
/// Unextractable completions (or labels) count as unsolved.
inline bool is_solved(const Sample& s, std::string_view completion, const TaskDefinition& def) {
    auto got = extract_answer(completion, def.answer_format);
    auto label = extract_answer(s.output, def.answer_format);
    return got && label && answers_equal(*got, *label);
}

inline CompletionRequest greedy_request(const std::string& input, const TaskDefinition& def, std::size_t max_tokens,
                                        std::size_t request_index, std::uint64_t seed) {
    CompletionRequest req;
    req.request_index = request_index;
    req.prompt = solve_prompt(def, input);
    req.temperature = PipelineConfig::solve_temperature;
    req.max_tokens = max_tokens;
    req.seed = seed;
    return req;
}

/// One temperature-0 base-model completion per sample; order within each side
/// follows the input order.
inline SolvabilityPartition classify(std::span<const Sample> samples, Gateway& base, const TaskDefinition& def,
                                     std::size_t max_tokens, std::uint64_t seed = 0) {
    std::vector<CompletionRequest> reqs;
    reqs.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        reqs.push_back(greedy_request(samples[i].input, def, max_tokens, i, derive_seed(seed, "classify", i)));
    auto batch = base.complete_many(reqs);
    require_ok(batch, "classification");
    SolvabilityPartition part;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (is_solved(samples[i], batch.results[i].completions.at(0), def)) part.solved.push_back(samples[i]);
        else part.unsolved.push_back(samples[i]);
    }
    return part;
}

inline std::string rewrite_id(const Sample& parent, Provenance direction) {
    return (direction == Provenance::harder ? "hard-" : "easy-") + parent.id;
}

inline CompletionRequest rewrite_request(const Sample& parent, Provenance direction, const TaskDefinition& def,
                                         const PipelineConfig& config, std::size_t request_index) {
    if (direction == Provenance::initial) throw std::invalid_argument("rewrite direction must be harder or easier");
    PromptContext ctx;
    ctx.task = &def;
    ctx.sample = DemoExample{parent.input, parent.output};
    CompletionRequest req;
    req.request_index = request_index;
    req.prompt = render_prompt(direction == Provenance::harder ? PromptStage::harder : PromptStage::easier, ctx);
    req.temperature = config.gen_temperature;
    req.max_tokens = config.max_tokens;
    req.seed = derive_seed(config.seed, direction == Provenance::harder ? "harder" : "easier", request_index);
    return req;
}

/// Parses a rewrite reply and applies the checks that need no votes.
inline std::variant<Candidate, Rejection> rewrite_candidate(const Sample& parent, std::string_view reply,
                                                            const TaskDefinition& def) {
    std::string why;
    auto rec = parse_record(reply, &why);
    if (!rec) return Rejection{RejectionReason::unparseable, why};
    if (dedup_key(rec->input) == dedup_key(parent.input))
        return Rejection{RejectionReason::duplicate, "rewritten input equals parent input"};
    if (!extract_answer(rec->output, def.answer_format))
        return Rejection{RejectionReason::unextractable, "candidate output has no final answer"};
    return Candidate{rec->input, rec->output, parent.source_passage_ids};
}

inline Sample rewritten_sample(const Sample& parent, Provenance direction, Candidate c, VerificationRecord v) {
    Sample s;
    s.id = rewrite_id(parent, direction);
    s.input = std::move(c.input);
    s.output = std::move(c.output);
    s.provenance = direction;
    s.parent_id = parent.id;
    s.source_passage_ids = std::move(c.source_passage_ids);
    s.verification = std::move(v);
    return s;
}

/// Single-sample rewrite: prompt, parse, parent-duplicate check, verification.
inline std::variant<Sample, Rejection> rewrite(const Sample& sample, Provenance direction, Gateway& instructor,
                                               const TaskDefinition& def, const PipelineConfig& config) {
    auto res = instructor.complete(rewrite_request(sample, direction, def, config, 0));
    auto cand = rewrite_candidate(sample, res.completions.at(0), def);
    if (auto* rej = std::get_if<Rejection>(&cand)) return *rej;
    auto& c = std::get<Candidate>(cand);
    auto verdict = verify(c, def, instructor, VoteSettings::from(config), derive_seed(config.seed, "verify-rewrite", 0));
    if (auto* rej = std::get_if<Rejection>(&verdict)) return *rej;
    return rewritten_sample(sample, direction, std::move(c), std::get<VerificationRecord>(verdict));
}

struct RewriteRejection {
    std::string parent_id;
    Provenance direction = Provenance::harder;
    Rejection rejection;
};

struct AdaptResult {
    SolvabilityPartition partition;
    std::vector<Sample> harder;
    std::vector<Sample> easier;
    std::vector<RewriteRejection> rejections;
};

/// Solved samples are rewritten harder, unsolved easier, one attempt each.
/// Rewrites go out as one batch and their votes as a second batch.
inline AdaptResult adapt(std::span<const Sample> initial, const TaskDefinition& def, const PipelineConfig& config,
                         Gateway& instructor, Gateway& base) {
    AdaptResult out;
    out.partition = classify(initial, base, def, config.max_tokens, config.seed);

    struct Job {
        const Sample* parent;
        Provenance direction;
    };
    std::vector<Job> jobs;
    for (const auto& s : out.partition.solved) jobs.push_back({&s, Provenance::harder});
    for (const auto& s : out.partition.unsolved) jobs.push_back({&s, Provenance::easier});

    std::vector<CompletionRequest> reqs;
    for (std::size_t i = 0; i < jobs.size(); ++i)
        reqs.push_back(rewrite_request(*jobs[i].parent, jobs[i].direction, def, config, i));
    auto batch = instructor.complete_many(reqs);
    require_ok(batch, "rewriting");

    const auto votes = VoteSettings::from(config);
    std::vector<std::optional<Candidate>> cands(jobs.size());
    std::vector<CompletionRequest> vote_reqs;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        auto c = rewrite_candidate(*jobs[i].parent, batch.results[i].completions.at(0), def);
        if (auto* rej = std::get_if<Rejection>(&c)) {
            out.rejections.push_back({jobs[i].parent->id, jobs[i].direction, *rej});
            continue;
        }
        cands[i] = std::move(std::get<Candidate>(c));
        vote_reqs.push_back(vote_request(cands[i]->input, def, votes, i, derive_seed(config.seed, "verify-rewrite", i)));
    }
    auto vote_batch = instructor.complete_many(vote_reqs);
    require_ok(vote_batch, "rewrite verification");

    std::size_t v = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!cands[i]) continue;
        auto verdict = judge_votes(cands[i]->output, def, vote_batch.results[v++].completions, votes.min_votes);
        if (auto* rej = std::get_if<Rejection>(&verdict)) {
            out.rejections.push_back({jobs[i].parent->id, jobs[i].direction, *rej});
            continue;
        }
        auto s = rewritten_sample(*jobs[i].parent, jobs[i].direction, std::move(*cands[i]),
                                  std::get<VerificationRecord>(verdict));
        (jobs[i].direction == Provenance::harder ? out.harder : out.easier).push_back(std::move(s));
    }
    return out;
}

/// Concatenates initial, harder, easier and drops any sample whose normalized
/// input was already seen; ids of dropped samples go to `dropped`.
inline std::vector<Sample> assemble(std::span<const Sample> initial, std::span<const Sample> harder,
                                    std::span<const Sample> easier, std::vector<std::string>* dropped = nullptr) {
    std::vector<Sample> out;
    std::unordered_set<std::string> seen;
    for (auto part : {initial, harder, easier}) {
        for (const auto& s : part) {
            if (seen.insert(dedup_key(s.input)).second) out.push_back(s);
            else if (dropped) dropped->push_back(s.id);
        }
    }
    return out;
}

}  // namespace synthrl
