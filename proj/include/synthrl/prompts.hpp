#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthrl/task_spec.hpp"

namespace synthrl {

enum class PromptStage { keyword, pattern, generate, harder, easier, solve };

inline std::string_view to_string(PromptStage s) {
    switch (s) {
        case PromptStage::keyword: return "keyword";
        case PromptStage::pattern: return "pattern";
        case PromptStage::generate: return "generate";
        case PromptStage::harder: return "harder";
        case PromptStage::easier: return "easier";
        case PromptStage::solve: return "solve";
    }
    return "keyword";
}

class PromptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Slots a template may draw from. Which ones are required depends on the stage.
struct PromptContext {
    const TaskDefinition* task = nullptr;
    std::vector<DemoExample> demos;
    std::optional<std::string> pattern;
    std::vector<std::string> passages;
    std::optional<DemoExample> sample;  // harder / easier: the sample being rewritten
    std::optional<std::string> input;   // solve: the task input to answer
};

namespace prompt_text {

inline constexpr std::string_view kKeyword = "Only output the keyword.";
inline constexpr std::string_view kGeneratorRole = "As a Dataset Generator";
inline constexpr std::string_view kHarder = "significantly more challenging";
inline constexpr std::string_view kEasier = "easier or represents a sub-problem";
inline constexpr std::string_view kPatternTail = "Only output the pattern description.";

}  // namespace prompt_text

namespace detail {

inline std::string render_examples(const std::vector<DemoExample>& demos) {
    std::string out;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        out += "\nExample " + std::to_string(i + 1) + ":\nInput: " + demos[i].input + "\nOutput: " + demos[i].output +
               "\n";
    }
    return out;
}

inline std::string render_passages(const std::vector<std::string>& passages) {
    std::string out;
    for (std::size_t i = 0; i < passages.size(); ++i)
        out += "\n[" + std::to_string(i + 1) + "] " + passages[i];
    return out;
}

// A sample shown to the rewriter, as a dictionary literal.
inline std::string render_sample(const DemoExample& s) {
    nlohmann::ordered_json j;
    j["input"] = s.input;
    j["output"] = s.output;
    return j.dump();
}

inline const TaskDefinition& need_task(const PromptContext& ctx, PromptStage stage) {
    if (!ctx.task) throw PromptError(std::string(to_string(stage)) + " prompt: missing slot 'task'");
    return *ctx.task;
}

inline std::string or_none(const std::string& s) { return s.empty() ? "None" : s; }

}  // namespace detail

/// Substitutes the context into the stage's template. Pure: identical inputs
/// give byte-identical text.
inline std::string render_prompt(PromptStage stage, const PromptContext& ctx) {
    switch (stage) {
        case PromptStage::keyword: {
            const auto& t = detail::need_task(ctx, stage);
            std::string p = "You can summarize the domain of this task: " + t.description_instruction + " into a keyword.";
            if (!ctx.demos.empty())
                p += " You can refer to these task examples " + detail::render_examples(ctx.demos) + ".";
            p += " ";
            p += prompt_text::kKeyword;
            return p;
        }
        case PromptStage::pattern: {
            // Authored wording; documented in the README.
            const auto& t = detail::need_task(ctx, stage);
            if (ctx.demos.empty()) throw PromptError("pattern prompt: missing slot 'demos'");
            std::string p =
                "Summarize the underlying pattern that characterizes the following task examples in a generalized "
                "form. Describe what the input consists of, what the output requires, and how the final answer is "
                "presented, without copying details from any specific example.\n\nHere is the task instruction:" +
                t.description_instruction + "\n\nHere are the examples:" + detail::render_examples(ctx.demos) + "\n";
            p += prompt_text::kPatternTail;
            return p;
        }
        case PromptStage::generate: {
            const auto& t = detail::need_task(ctx, stage);
            if (!ctx.demos.empty() && !ctx.pattern)
                throw PromptError("generate prompt: missing slot 'pattern' (required when demos are given)");
            std::string p =
                "As a Dataset Generator, your task is to generate one new example (`input` and `output`) based on the "
                "[task instruction], [sample pattern] [reference passage], and [few-shot examples]. Please provide a "
                "JSON dictionary response that includes the new `input` and its corresponding `output`. Use the "
                "`input` and `output` keys in the dictionary.\n\n"
                "Try you best to ensure that the input and output you generate are distinct from the provided "
                "examples while maintaining a diverse, detailed, precise, comprehensive, and high-quality response.\n\n"
                "You must consider the task instruction (task knowledge), provided examples (format), and the passage "
                "(domain knowledge) to generate your training data.\n\n"
                "Here is the task instruction:" +
                t.description_instruction +
                "\n\n"
                "Here is the input instruction:" +
                detail::or_none(t.input_format_instruction) +
                ". You should follow the input format in the instruction strictly to generate data!!!\n\n"
                "Here is the output instruction:" +
                t.output_format_instruction +
                ". You should follow the output format in the instruction strictly to generate data!!!\n\n";
            if (!ctx.demos.empty()) {
                p += "Here is the sample pattern " + *ctx.pattern +
                     ". You should follow the input and output pattern strictly to generate data!!!\n"
                     "You can refer to demonstration examples. You should generate examples that are in the same "
                     "difficulty or are harder: " +
                     detail::render_examples(ctx.demos) + "\n\n";
            } else if (ctx.pattern) {
                p += "Here is the sample pattern " + *ctx.pattern +
                     ". You should follow the input and output pattern strictly to generate data!!!\n\n";
            }
            if (!ctx.passages.empty())
                p += "Here are some related objects or passages that you can refer to: " +
                     detail::render_passages(ctx.passages) + "\n\n";
            p += "Before generating the new example, ensure that you strictly adhere to the rules mentioned in the "
                 "[Requirement] and follow the example format. Think twice before generating a new example. New "
                 "example (in JSON):\"";
            return p;
        }
        case PromptStage::harder: {
            if (!ctx.sample) throw PromptError("harder prompt: missing slot 'sample'");
            return "The current sample is overly simplistic and can be solved effortlessly by the model. Please "
                   "generate an alternative and task-similar sample that presents a significantly more challenging "
                   "and intricate problem—one that requires multi-step reasoning, creative problem-solving, and "
                   "deeper analytical thought. Only output the revised sample in the python dictionary form. Current "
                   "sample:" +
                   detail::render_sample(*ctx.sample);
        }
        case PromptStage::easier: {
            if (!ctx.sample) throw PromptError("easier prompt: missing slot 'sample'");
            return "The given sample is too challenging for the model to solve. Please generate a task-similar "
                   "alternative that is easier or represents a sub-problem of the original sample. Output only the "
                   "revised sample in Python dictionary format. Current sample:" +
                   detail::render_sample(*ctx.sample);
        }
        case PromptStage::solve: {
            // Shared by consensus voting, base-model probing and the exported RL prompt.
            const auto& t = detail::need_task(ctx, stage);
            if (!ctx.input) throw PromptError("solve prompt: missing slot 'input'");
            std::string p = t.description_instruction + "\n\n";
            if (!t.input_format_instruction.empty()) p += t.input_format_instruction + "\n\n";
            p += "Input:\n" + *ctx.input + "\n\n" + t.output_format_instruction;
            return p;
        }
    }
    throw PromptError("unknown prompt stage");
}

inline std::string solve_prompt(const TaskDefinition& task, const std::string& input) {
    PromptContext ctx;
    ctx.task = &task;
    ctx.input = input;
    return render_prompt(PromptStage::solve, ctx);
}

}  // namespace synthrl
