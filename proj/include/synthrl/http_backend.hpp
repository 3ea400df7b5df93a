#pragma once

#include <cstdlib>
#include <memory>
#include <regex>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "synthrl/gateway.hpp"
#include "synthrl/scripted_backend.hpp"

namespace synthrl {

/// OpenAI-compatible chat-completions client.
///   POST {endpoint_url}/chat/completions
///   {"model", "messages": [{"role": "user", "content": prompt}], "temperature", "n", "max_tokens"[, "seed"]}
/// Embeddings use POST {endpoint_url}/embeddings {"model", "input": [...]}.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendDescriptor d) : d_(std::move(d)) {
        static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(d_.endpoint_url, m, url))
            throw GatewayError(GatewayErrorKind::invalid_request, "bad endpoint_url '" + d_.endpoint_url + "'");
        origin_ = m[1].str();
        prefix_ = m[2].str();
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }

    SampleReply sample(const SampleCall& call) override {
        nlohmann::json body = {{"model", d_.model_name},
                               {"messages", {{{"role", "user"}, {"content", *call.prompt}}}},
                               {"temperature", call.temperature},
                               {"n", call.n},
                               {"max_tokens", call.max_tokens}};
        if (call.seed) body["seed"] = *call.seed;
        auto j = post("/chat/completions", body);
        SampleReply r;
        try {
            const auto& choices = j.at("choices");
            if (!choices.is_array()) throw std::invalid_argument("choices is not an array");
            for (const auto& c : choices) {
                const auto& content = c.at("message").at("content");
                r.completions.push_back(content.is_null() ? std::string() : content.get<std::string>());
            }
            if (j.contains("usage") && j["usage"].is_object()) {
                TokenUsage u;
                u.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
                u.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
                r.usage = u;
            }
        } catch (const std::exception& e) {
            throw GatewayError(GatewayErrorKind::malformed_response, std::string("chat completion body: ") + e.what());
        }
        return r;
    }

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        nlohmann::json body = {{"model", d_.model_name}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
        auto j = post("/embeddings", body);
        std::vector<std::vector<double>> out(texts.size());
        try {
            std::size_t pos = 0;
            for (const auto& item : j.at("data")) {
                std::size_t idx = item.value("index", pos);
                if (idx >= out.size()) throw std::out_of_range("embedding index out of range");
                out[idx] = item.at("embedding").get<std::vector<double>>();
                ++pos;
            }
            for (const auto& v : out)
                if (v.empty() || v.size() != out.front().size()) throw std::invalid_argument("missing or ragged embeddings");
        } catch (const std::exception& e) {
            throw GatewayError(GatewayErrorKind::malformed_response, std::string("embeddings body: ") + e.what());
        }
        return out;
    }

    bool batches_samples() const override { return true; }

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body) {
        httplib::Client cli(origin_);
        auto secs = static_cast<time_t>(d_.timeout_seconds);
        auto usecs = static_cast<time_t>((d_.timeout_seconds - static_cast<double>(secs)) * 1e6);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        if (!d_.credential_env_var.empty()) {
            const char* token = std::getenv(d_.credential_env_var.c_str());
            if (!token || !*token)
                throw GatewayError(GatewayErrorKind::authentication,
                                   "environment variable " + d_.credential_env_var + " is not set");
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
        auto res = cli.Post(prefix_ + path, headers, body.dump(), "application/json");
        if (!res)
            throw GatewayError(GatewayErrorKind::transport,
                               origin_ + prefix_ + path + ": " + httplib::to_string(res.error()));
        if (res->status == 401 || res->status == 403)
            throw GatewayError(GatewayErrorKind::authentication, "HTTP " + std::to_string(res->status));
        if (res->status == 429 || res->status >= 500)
            throw GatewayError(GatewayErrorKind::transport, "HTTP " + std::to_string(res->status));
        if (res->status < 200 || res->status >= 300)
            throw GatewayError(GatewayErrorKind::rejected_request,
                               "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw GatewayError(GatewayErrorKind::malformed_response, std::string("response is not JSON: ") + e.what());
        }
    }

    BackendDescriptor d_;
    std::string origin_;
    std::string prefix_;
};

inline std::shared_ptr<Backend> make_backend(const BackendDescriptor& d) {
    if (d.kind == BackendKind::http_openai_compatible) return std::make_shared<HttpBackend>(d);
    if (d.script.empty())
        throw GatewayError(GatewayErrorKind::invalid_request,
                           std::string(to_string(d.role)) + " backend is scripted but no script file is configured");
    return std::make_shared<ScriptedBackend>(std::make_shared<const ScriptTable>(ScriptTable::load(d.script)));
}

inline std::unique_ptr<Gateway> make_gateway(const BackendDescriptor& d) {
    return std::make_unique<Gateway>(make_backend(d), d);
}

}  // namespace synthrl
