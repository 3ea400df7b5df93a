#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace synthrl {

enum class BackendRole { instructor, base, embedding };
enum class BackendKind { http_openai_compatible, scripted };

inline std::string_view to_string(BackendRole r) {
    switch (r) {
        case BackendRole::instructor: return "instructor";
        case BackendRole::base: return "base";
        case BackendRole::embedding: return "embedding";
    }
    return "instructor";
}

inline std::string_view to_string(BackendKind k) {
    return k == BackendKind::scripted ? "scripted" : "http_openai_compatible";
}

struct BackendDescriptor {
    BackendRole role = BackendRole::instructor;
    BackendKind kind = BackendKind::scripted;
    std::string endpoint_url;
    std::string model_name;
    /// Name of the environment variable holding the bearer token; the token itself never lives in config.
    std::string credential_env_var;
    std::size_t max_in_flight = 8;
    std::size_t retry_limit = 5;
    /// Send n in one request instead of fanning out n single-sample requests.
    bool supports_n = false;
    /// Script table path for scripted backends.
    std::string script;
    double timeout_seconds = 120.0;
    std::size_t backoff_initial_ms = 500;

    bool operator==(const BackendDescriptor&) const = default;
};

struct CompletionRequest {
    std::size_t request_index = 0;
    std::string prompt;
    double temperature = 0.0;
    std::size_t n_samples = 1;
    std::size_t max_tokens = 0;
    std::optional<std::uint64_t> seed;
    /// Index of the first sample in this request. Lets callers draw further
    /// samples from the same prompt across requests without repeating indices.
    std::size_t first_sample = 0;
};

struct TokenUsage {
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

struct CompletionResult {
    std::size_t request_index = 0;
    std::vector<std::string> completions;
    std::optional<TokenUsage> usage;
};

enum class GatewayErrorKind { transport, malformed_response, authentication, rejected_request, script_miss, invalid_request };

inline std::string_view to_string(GatewayErrorKind k) {
    switch (k) {
        case GatewayErrorKind::transport: return "transport";
        case GatewayErrorKind::malformed_response: return "malformed_response";
        case GatewayErrorKind::authentication: return "authentication";
        case GatewayErrorKind::rejected_request: return "rejected_request";
        case GatewayErrorKind::script_miss: return "script_miss";
        case GatewayErrorKind::invalid_request: return "invalid_request";
    }
    return "transport";
}

class GatewayError : public std::runtime_error {
public:
    GatewayError(GatewayErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    GatewayErrorKind kind() const noexcept { return kind_; }
    bool retryable() const noexcept { return kind_ == GatewayErrorKind::transport; }

private:
    GatewayErrorKind kind_;
};

struct RequestError {
    std::size_t request_index = 0;
    GatewayErrorKind kind = GatewayErrorKind::transport;
    std::string message;
};

struct BatchResult {
    std::vector<CompletionResult> results;  // sorted by request_index
    std::vector<RequestError> errors;       // sorted by request_index

    bool ok() const noexcept { return errors.empty(); }
};

}  // namespace synthrl
