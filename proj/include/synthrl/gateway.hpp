#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <thread>
#include <unordered_set>
#include <vector>

#include "synthrl/gateway_types.hpp"

namespace synthrl {

enum class TemperatureBand { zero, nonzero };

inline TemperatureBand band_of(double temperature) {
    return temperature == 0.0 ? TemperatureBand::zero : TemperatureBand::nonzero;
}

/// One backend call: n samples of one prompt, numbered first_index..first_index+n-1.
struct SampleCall {
    const std::string* prompt = nullptr;
    double temperature = 0.0;
    std::size_t first_index = 0;
    std::size_t n = 1;
    std::size_t max_tokens = 0;
    std::optional<std::uint64_t> seed;
};

struct SampleReply {
    std::vector<std::string> completions;
    std::optional<TokenUsage> usage;
};

/// A model endpoint. Implementations throw GatewayError on failure and must be
/// safe to call from several threads at once.
class Backend {
public:
    virtual ~Backend() = default;
    virtual SampleReply sample(const SampleCall& call) = 0;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) {
        (void)texts;
        throw GatewayError(GatewayErrorKind::invalid_request, "backend does not provide embeddings");
    }
    /// Whether one call may carry n > 1.
    virtual bool batches_samples() const { return false; }
};

struct GatewayStats {
    std::size_t backend_calls = 0;
    std::size_t retries = 0;
    std::size_t peak_in_flight = 0;
};

/// Bounded, retrying front end over a Backend. At most max_in_flight backend
/// calls are outstanding at any instant across all callers.
class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, BackendDescriptor descriptor)
        : backend_(std::move(backend)),
          descriptor_(std::move(descriptor)),
          slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, descriptor_.max_in_flight))) {}

    const BackendDescriptor& descriptor() const noexcept { return descriptor_; }

    GatewayStats stats() const {
        return {calls_.load(), retries_.load(), peak_.load()};
    }

    CompletionResult complete(const CompletionRequest& req) {
        if (req.n_samples < 1) throw GatewayError(GatewayErrorKind::invalid_request, "n_samples must be >= 1");
        if (req.temperature < 0.0) throw GatewayError(GatewayErrorKind::invalid_request, "temperature must be >= 0");

        CompletionResult out;
        out.request_index = req.request_index;
        // Greedy decoding is deterministic: one call, replicated.
        if (req.temperature == 0.0) {
            auto reply = call_with_retry(req, req.first_sample, 1);
            out.completions.assign(req.n_samples, reply.completions.at(0));
            out.usage = reply.usage;
            return out;
        }
        bool batched = descriptor_.supports_n && backend_->batches_samples();
        if (batched) {
            auto reply = call_with_retry(req, req.first_sample, req.n_samples);
            out.completions = std::move(reply.completions);
            out.usage = reply.usage;
            return out;
        }
        out.completions.reserve(req.n_samples);
        TokenUsage total;
        bool any_usage = false;
        for (std::size_t i = 0; i < req.n_samples; ++i) {
            auto reply = call_with_retry(req, req.first_sample + i, 1);
            out.completions.push_back(std::move(reply.completions.at(0)));
            if (reply.usage) {
                any_usage = true;
                total.prompt_tokens += reply.usage->prompt_tokens;
                total.completion_tokens += reply.usage->completion_tokens;
            }
        }
        if (any_usage) out.usage = total;
        return out;
    }

    /// Runs every request; successes come back ordered by request_index, failures
    /// in a per-index error list.
    BatchResult complete_many(std::span<const CompletionRequest> reqs) {
        {
            std::unordered_set<std::size_t> seen;
            for (const auto& r : reqs)
                if (!seen.insert(r.request_index).second)
                    throw GatewayError(GatewayErrorKind::invalid_request,
                                       "duplicate request_index " + std::to_string(r.request_index));
        }
        std::vector<std::optional<CompletionResult>> slots(reqs.size());
        std::vector<std::optional<RequestError>> failures(reqs.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < reqs.size(); i = next++) {
                try {
                    slots[i] = complete(reqs[i]);
                } catch (const GatewayError& e) {
                    failures[i] = RequestError{reqs[i].request_index, e.kind(), e.what()};
                } catch (const std::exception& e) {
                    failures[i] = RequestError{reqs[i].request_index, GatewayErrorKind::transport, e.what()};
                }
            }
        };
        std::size_t workers = std::min(reqs.size(), std::max<std::size_t>(1, descriptor_.max_in_flight));
        if (workers <= 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        }

        BatchResult out;
        for (std::size_t i = 0; i < reqs.size(); ++i) {
            if (slots[i]) out.results.push_back(std::move(*slots[i]));
            if (failures[i]) out.errors.push_back(std::move(*failures[i]));
        }
        auto by_index = [](const auto& a, const auto& b) { return a.request_index < b.request_index; };
        std::sort(out.results.begin(), out.results.end(), by_index);
        std::sort(out.errors.begin(), out.errors.end(), by_index);
        return out;
    }

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) {
        if (texts.empty()) return {};
        return with_retry([&] { return backend_->embed(texts); });
    }

private:
    SampleReply call_with_retry(const CompletionRequest& req, std::size_t first, std::size_t n) {
        SampleCall call{&req.prompt, req.temperature, first, n, req.max_tokens, req.seed};
        if (call.seed) *call.seed += first;
        auto reply = with_retry([&] { return backend_->sample(call); });
        if (reply.completions.size() != n)
            throw GatewayError(GatewayErrorKind::malformed_response,
                               "expected " + std::to_string(n) + " completions, got " +
                                   std::to_string(reply.completions.size()));
        return reply;
    }

    template <typename F>
    auto with_retry(F&& f) -> decltype(f()) {
        std::size_t attempts = std::max<std::size_t>(1, descriptor_.retry_limit);
        auto delay = std::chrono::milliseconds(descriptor_.backoff_initial_ms);
        for (std::size_t attempt = 1;; ++attempt) {
            try {
                InFlight guard(*this);
                return f();
            } catch (const GatewayError& e) {
                if (!e.retryable() || attempt >= attempts) throw;
            }
            ++retries_;
            std::this_thread::sleep_for(delay);
            delay = std::min(delay * 2, std::chrono::milliseconds(30000));
        }
    }

    struct InFlight {
        explicit InFlight(Gateway& g) : g_(g) {
            g_.slots_.acquire();
            ++g_.calls_;
            auto now = ++g_.in_flight_;
            auto peak = g_.peak_.load();
            while (now > peak && !g_.peak_.compare_exchange_weak(peak, now)) {
            }
        }
        ~InFlight() {
            --g_.in_flight_;
            g_.slots_.release();
        }
        Gateway& g_;
    };

    std::shared_ptr<Backend> backend_;
    BackendDescriptor descriptor_;
    std::counting_semaphore<> slots_;
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> peak_{0};
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> retries_{0};
};

}  // namespace synthrl
