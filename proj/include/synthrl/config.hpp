#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthrl/gateway_types.hpp"
#include "synthrl/text.hpp"

namespace synthrl {

// Published experimental settings. Every other module reads these through
// PipelineConfig / TrainerProfile rather than repeating the literals.
namespace defaults {
inline constexpr std::size_t n_initial = 500;
inline constexpr std::size_t m_train = 500;
inline constexpr std::size_t vote_count = 16;
inline constexpr std::size_t pass_samples = 64;
inline constexpr double gen_temperature = 0.7;
inline constexpr double eval_temperature = gen_temperature;
inline constexpr double solve_temperature = 0.0;

inline constexpr double learning_rate = 1e-6;
inline constexpr std::size_t responses_per_prompt = 16;
inline constexpr std::size_t batch_size = 64;
inline constexpr std::size_t max_response_length = 2048;
inline constexpr double kl_coefficient = 0.01;
inline constexpr std::size_t epochs = 5;

inline constexpr std::size_t retrieval_top_k = 20;
inline constexpr std::size_t retrieval_pool_size = 100;
inline constexpr double generation_budget_multiplier = 3.0;
inline constexpr std::size_t max_tokens = max_response_length;
inline constexpr std::size_t similarity_pair_limit = 10000;
}  // namespace defaults

struct TrainerProfile {
    std::string algorithm_name = "grpo";
    double learning_rate = defaults::learning_rate;
    std::size_t responses_per_prompt = defaults::responses_per_prompt;
    std::size_t batch_size = defaults::batch_size;
    std::size_t max_response_length = defaults::max_response_length;
    double kl_coefficient = defaults::kl_coefficient;
    std::size_t epochs = defaults::epochs;
    std::string command_template;

    bool operator==(const TrainerProfile&) const = default;
};

enum class SelectionStrategy { high_potential, easy, hard, full };

inline std::string_view to_string(SelectionStrategy s) {
    switch (s) {
        case SelectionStrategy::high_potential: return "high_potential";
        case SelectionStrategy::easy: return "easy";
        case SelectionStrategy::hard: return "hard";
        case SelectionStrategy::full: return "full";
    }
    return "high_potential";
}

struct PipelineConfig {
    std::size_t n_initial = defaults::n_initial;
    std::size_t m_train = defaults::m_train;
    std::size_t vote_count = defaults::vote_count;
    /// Votes the consensus answer needs; unset means strict majority of vote_count.
    std::optional<std::size_t> min_votes;
    std::size_t pass_samples = defaults::pass_samples;
    double gen_temperature = defaults::gen_temperature;
    double eval_temperature = defaults::eval_temperature;
    std::size_t retrieval_top_k = defaults::retrieval_top_k;
    std::size_t retrieval_pool_size = defaults::retrieval_pool_size;
    double generation_budget_multiplier = defaults::generation_budget_multiplier;
    std::size_t max_tokens = defaults::max_tokens;
    std::uint64_t seed = 0;

    // Component switches.
    bool retrieval_enabled = true;
    bool use_pattern = true;
    bool adaptation_enabled = true;
    SelectionStrategy selection = SelectionStrategy::high_potential;

    std::vector<std::string> corpus;

    BackendDescriptor instructor_backend = backend_for(BackendRole::instructor);
    BackendDescriptor base_backend = backend_for(BackendRole::base);
    std::optional<BackendDescriptor> embedding_backend;
    TrainerProfile trainer_profile;

    static BackendDescriptor backend_for(BackendRole role) {
        BackendDescriptor d;
        d.role = role;
        return d;
    }

    static constexpr double solve_temperature = defaults::solve_temperature;

    std::size_t effective_min_votes() const { return min_votes.value_or(vote_count / 2 + 1); }

    bool operator==(const PipelineConfig&) const = default;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : std::runtime_error(format(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string format(const std::vector<std::string>& p) {
        std::string s = "invalid configuration:";
        for (const auto& x : p) s += "\n  - " + x;
        return s;
    }
    std::vector<std::string> problems_;
};

namespace detail {

inline nlohmann::json backend_to_json(const BackendDescriptor& b) {
    return {{"kind", std::string(to_string(b.kind))},
            {"endpoint_url", b.endpoint_url},
            {"model_name", b.model_name},
            {"credential_env_var", b.credential_env_var},
            {"max_in_flight", b.max_in_flight},
            {"retry_limit", b.retry_limit},
            {"supports_n", b.supports_n},
            {"script", b.script},
            {"timeout_seconds", b.timeout_seconds},
            {"backoff_initial_ms", b.backoff_initial_ms}};
}

// Reads typed fields out of a JSON object, collecting problems instead of throwing
// so one load reports every bad field.
class FieldReader {
public:
    FieldReader(const nlohmann::json& obj, std::string prefix, std::vector<std::string>& problems)
        : obj_(obj), prefix_(std::move(prefix)), problems_(problems) {}

    template <typename T>
    void read(const char* key, T& dst) {
        seen_.emplace_back(key);
        if (!obj_.contains(key)) return;
        const auto& v = obj_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::invalid_argument("expected a string");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw std::invalid_argument("expected a number");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
                if (std::is_unsigned_v<T> && v.get<long long>() < 0)
                    throw std::invalid_argument("expected a non-negative integer");
            }
            dst = v.get<T>();
        } catch (const std::exception& e) {
            problems_.push_back(prefix_ + key + ": " + e.what());
        }
    }

    bool has(const char* key) const { return obj_.contains(key); }
    void mark(const char* key) { seen_.emplace_back(key); }

    void reject_unknown() {
        for (const auto& [k, _] : obj_.items())
            if (std::find(seen_.begin(), seen_.end(), k) == seen_.end())
                problems_.push_back(prefix_ + k + ": unknown field");
    }

private:
    const nlohmann::json& obj_;
    std::string prefix_;
    std::vector<std::string>& problems_;
    std::vector<std::string> seen_;
};

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base_dir) {
    if (p.empty() || base_dir.empty()) return p;
    std::filesystem::path path(p);
    if (path.is_absolute()) return p;
    return (base_dir / path).lexically_normal().string();
}

inline BackendDescriptor backend_from_json(const nlohmann::json& j, BackendRole role, const std::string& prefix,
                                           const std::filesystem::path& base_dir, std::vector<std::string>& problems) {
    BackendDescriptor b;
    b.role = role;
    if (!j.is_object()) {
        problems.push_back(prefix + ": expected an object");
        return b;
    }
    FieldReader r(j, prefix + ".", problems);
    std::string kind = std::string(to_string(b.kind));
    r.read("kind", kind);
    if (kind == "scripted")
        b.kind = BackendKind::scripted;
    else if (kind == "http_openai_compatible")
        b.kind = BackendKind::http_openai_compatible;
    else
        problems.push_back(prefix + ".kind: must be 'scripted' or 'http_openai_compatible'");
    r.read("endpoint_url", b.endpoint_url);
    r.read("model_name", b.model_name);
    r.read("credential_env_var", b.credential_env_var);
    r.read("max_in_flight", b.max_in_flight);
    r.read("retry_limit", b.retry_limit);
    r.read("supports_n", b.supports_n);
    r.read("script", b.script);
    r.read("timeout_seconds", b.timeout_seconds);
    r.read("backoff_initial_ms", b.backoff_initial_ms);
    r.reject_unknown();
    b.script = resolve_path(b.script, base_dir);
    return b;
}

inline void validate_backend(const BackendDescriptor& b, const std::string& name, std::vector<std::string>& problems) {
    if (b.kind == BackendKind::http_openai_compatible) {
        if (b.endpoint_url.empty()) problems.push_back(name + ".endpoint_url: required for http backends");
        if (b.model_name.empty()) problems.push_back(name + ".model_name: required for http backends");
    }
    if (b.max_in_flight < 1) problems.push_back(name + ".max_in_flight: must be >= 1");
    if (b.retry_limit < 1) problems.push_back(name + ".retry_limit: must be >= 1");
    if (!(b.timeout_seconds > 0)) problems.push_back(name + ".timeout_seconds: must be > 0");
}

inline std::pair<std::size_t, std::size_t> line_col(const std::string& s, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < s.size() && i + 1 < byte; ++i) {
        if (s[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace detail

/// Every invariant violation, one entry per failing field. Empty when valid.
inline std::vector<std::string> check_invariants(const PipelineConfig& c) {
    std::vector<std::string> p;
    if (c.n_initial < 1) p.push_back("n_initial: must be >= 1");
    if (c.m_train < 1) p.push_back("m_train: must be >= 1");
    if (c.vote_count < 1) p.push_back("vote_count: must be >= 1");
    if (c.min_votes && (*c.min_votes < 1 || *c.min_votes > c.vote_count))
        p.push_back("min_votes: must be in [1, vote_count]");
    if (c.pass_samples < 1) p.push_back("pass_samples: must be >= 1");
    if (!(c.gen_temperature >= 0.0 && c.gen_temperature <= 2.0)) p.push_back("gen_temperature: must be in [0, 2]");
    if (!(c.eval_temperature > 0.0)) p.push_back("eval_temperature: must be > 0");
    if (c.retrieval_top_k < 1) p.push_back("retrieval_top_k: must be >= 1");
    if (c.retrieval_pool_size < 1) p.push_back("retrieval_pool_size: must be >= 1");
    if (!(c.generation_budget_multiplier >= 1.0))
        p.push_back("generation_budget_multiplier: must be >= 1");
    if (c.max_tokens < 1) p.push_back("max_tokens: must be >= 1");
    detail::validate_backend(c.instructor_backend, "instructor", p);
    detail::validate_backend(c.base_backend, "base", p);
    if (c.embedding_backend) detail::validate_backend(*c.embedding_backend, "embedding", p);
    const auto& t = c.trainer_profile;
    if (!(t.learning_rate > 0)) p.push_back("trainer.learning_rate: must be > 0");
    if (t.responses_per_prompt < 1) p.push_back("trainer.responses_per_prompt: must be > 0");
    if (t.batch_size < 1) p.push_back("trainer.batch_size: must be > 0");
    if (t.max_response_length < 1) p.push_back("trainer.max_response_length: must be > 0");
    if (!(t.kl_coefficient > 0)) p.push_back("trainer.kl_coefficient: must be > 0");
    if (t.epochs < 1) p.push_back("trainer.epochs: must be > 0");
    return p;
}

/// Non-fatal remarks about a valid configuration.
inline std::vector<std::string> config_warnings(const PipelineConfig& c) {
    std::vector<std::string> w;
    if (c.vote_count % 2 == 0)
        w.push_back("vote_count " + std::to_string(c.vote_count) + " is even; an odd count avoids split votes");
    if (c.retrieval_enabled && c.corpus.empty())
        w.push_back("retrieval is enabled but no corpus files are configured");
    return w;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
    nlohmann::json j = {
        {"n_initial", c.n_initial},
        {"m_train", c.m_train},
        {"vote_count", c.vote_count},
        {"pass_samples", c.pass_samples},
        {"gen_temperature", c.gen_temperature},
        {"eval_temperature", c.eval_temperature},
        {"retrieval_top_k", c.retrieval_top_k},
        {"retrieval_pool_size", c.retrieval_pool_size},
        {"generation_budget_multiplier", c.generation_budget_multiplier},
        {"max_tokens", c.max_tokens},
        {"seed", c.seed},
        {"retrieval_enabled", c.retrieval_enabled},
        {"use_pattern", c.use_pattern},
        {"adaptation_enabled", c.adaptation_enabled},
        {"selection", std::string(to_string(c.selection))},
        {"corpus", c.corpus},
        {"instructor", detail::backend_to_json(c.instructor_backend)},
        {"base", detail::backend_to_json(c.base_backend)},
        {"trainer",
         {{"algorithm_name", c.trainer_profile.algorithm_name},
          {"learning_rate", c.trainer_profile.learning_rate},
          {"responses_per_prompt", c.trainer_profile.responses_per_prompt},
          {"batch_size", c.trainer_profile.batch_size},
          {"max_response_length", c.trainer_profile.max_response_length},
          {"kl_coefficient", c.trainer_profile.kl_coefficient},
          {"epochs", c.trainer_profile.epochs},
          {"command_template", c.trainer_profile.command_template}}},
    };
    if (c.min_votes) j["min_votes"] = *c.min_votes;
    if (c.embedding_backend) j["embedding"] = detail::backend_to_json(*c.embedding_backend);
    return j;
}

/// Builds a config from a parsed JSON document. Relative script and corpus
/// paths resolve against base_dir. Throws ConfigError listing every problem.
inline PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    std::vector<std::string> problems;
    PipelineConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw ConfigError({"top level: expected an object"});

    detail::FieldReader r(j, "", problems);
    r.read("n_initial", c.n_initial);
    r.read("m_train", c.m_train);
    r.read("vote_count", c.vote_count);
    if (r.has("min_votes")) {
        std::size_t mv = 0;
        r.read("min_votes", mv);
        c.min_votes = mv;
    } else {
        r.mark("min_votes");
    }
    r.read("pass_samples", c.pass_samples);
    r.read("gen_temperature", c.gen_temperature);
    r.read("eval_temperature", c.eval_temperature);
    r.read("retrieval_top_k", c.retrieval_top_k);
    r.read("retrieval_pool_size", c.retrieval_pool_size);
    r.read("generation_budget_multiplier", c.generation_budget_multiplier);
    r.read("max_tokens", c.max_tokens);
    r.read("seed", c.seed);
    r.read("retrieval_enabled", c.retrieval_enabled);
    r.read("use_pattern", c.use_pattern);
    r.read("adaptation_enabled", c.adaptation_enabled);

    std::string selection(to_string(c.selection));
    r.read("selection", selection);
    if (selection == "high_potential")
        c.selection = SelectionStrategy::high_potential;
    else if (selection == "easy")
        c.selection = SelectionStrategy::easy;
    else if (selection == "hard")
        c.selection = SelectionStrategy::hard;
    else if (selection == "full")
        c.selection = SelectionStrategy::full;
    else
        problems.push_back("selection: must be one of high_potential, easy, hard, full");

    r.mark("corpus");
    if (j.contains("corpus")) {
        const auto& cj = j.at("corpus");
        if (cj.is_string()) {
            c.corpus.push_back(detail::resolve_path(cj.get<std::string>(), base_dir));
        } else if (cj.is_array() && std::all_of(cj.begin(), cj.end(), [](const auto& e) { return e.is_string(); })) {
            for (const auto& e : cj) c.corpus.push_back(detail::resolve_path(e.get<std::string>(), base_dir));
        } else {
            problems.push_back("corpus: expected a path or a list of paths");
        }
    }

    r.mark("instructor");
    r.mark("base");
    r.mark("embedding");
    if (j.contains("instructor"))
        c.instructor_backend =
            detail::backend_from_json(j.at("instructor"), BackendRole::instructor, "instructor", base_dir, problems);
    if (j.contains("base"))
        c.base_backend = detail::backend_from_json(j.at("base"), BackendRole::base, "base", base_dir, problems);
    if (j.contains("embedding") && !j.at("embedding").is_null())
        c.embedding_backend =
            detail::backend_from_json(j.at("embedding"), BackendRole::embedding, "embedding", base_dir, problems);

    r.mark("trainer");
    if (j.contains("trainer")) {
        const auto& tj = j.at("trainer");
        if (!tj.is_object()) {
            problems.push_back("trainer: expected an object");
        } else {
            detail::FieldReader tr(tj, "trainer.", problems);
            auto& t = c.trainer_profile;
            tr.read("algorithm_name", t.algorithm_name);
            tr.read("learning_rate", t.learning_rate);
            tr.read("responses_per_prompt", t.responses_per_prompt);
            tr.read("batch_size", t.batch_size);
            tr.read("max_response_length", t.max_response_length);
            tr.read("kl_coefficient", t.kl_coefficient);
            tr.read("epochs", t.epochs);
            tr.read("command_template", t.command_template);
            tr.reject_unknown();
        }
    }
    r.reject_unknown();

    auto inv = check_invariants(c);
    problems.insert(problems.end(), inv.begin(), inv.end());
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return c;
}

/// Parses JSON text; an empty (or whitespace-only) document yields all defaults.
inline PipelineConfig parse_config(const std::string& content, const std::filesystem::path& base_dir = {},
                                   const std::string& origin = "config") {
    if (text::trim_view(content).empty()) return PipelineConfig{};
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        auto [line, col] = detail::line_col(content, e.byte);
        throw ConfigError({origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": parse error: " +
                           e.what()});
    }
    return config_from_json(j, base_dir);
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path.string() + ": cannot open file"});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path(), path.string());
}

inline std::string config_hash(const PipelineConfig& c) { return text::hex64(text::fnv1a(to_json(c).dump())); }

}  // namespace synthrl
