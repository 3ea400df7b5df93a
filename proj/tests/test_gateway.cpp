#include <fstream>
#include <mutex>
#include <random>
#include <set>

#include "test_support.hpp"

using namespace synthrl;

namespace {

std::string echo(std::string_view prompt, std::size_t idx, TemperatureBand band) {
    return std::string(prompt) + "#" + std::to_string(idx) + (band == TemperatureBand::zero ? "z" : "n");
}

/// Fails the first `failures` calls per prompt with the given kind, then echoes.
class FlakyBackend : public Backend {
public:
    FlakyBackend(std::size_t failures, GatewayErrorKind kind) : failures_(failures), kind_(kind) {}

    SampleReply sample(const SampleCall& call) override {
        {
            std::lock_guard lock(mu_);
            if (seen_[*call.prompt]++ < failures_) throw GatewayError(kind_, "flaky");
        }
        SampleReply r;
        for (std::size_t i = 0; i < call.n; ++i)
            r.completions.push_back(echo(*call.prompt, call.first_index + i, band_of(call.temperature)));
        return r;
    }

    std::size_t calls(const std::string& p) {
        std::lock_guard lock(mu_);
        return seen_[p];
    }

private:
    std::size_t failures_;
    GatewayErrorKind kind_;
    std::mutex mu_;
    std::map<std::string, std::size_t> seen_;
};

BackendDescriptor fast(std::size_t in_flight = 4, std::size_t retries = 3) {
    BackendDescriptor d;
    d.max_in_flight = in_flight;
    d.retry_limit = retries;
    d.backoff_initial_ms = 1;
    return d;
}

std::vector<CompletionRequest> requests(std::size_t count, double temperature = 0.7, std::size_t n = 1) {
    std::vector<CompletionRequest> out;
    for (std::size_t i = 0; i < count; ++i) {
        CompletionRequest r;
        r.request_index = 100 + count - i;  // descending, to check ordering by index not position
        r.prompt = "p" + std::to_string(i);
        r.temperature = temperature;
        r.n_samples = n;
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST(Gateway, ResultsOrderedByIndexUnderRandomLatency) {
    auto backend = std::make_shared<ScriptedBackend>(Responder(echo));
    std::mt19937 rng(3);
    std::vector<int> delays(64);
    for (auto& d : delays) d = std::uniform_int_distribution<int>(0, 3000)(rng);
    backend->set_latency([&](std::string_view p, std::size_t) {
        return std::chrono::microseconds(delays[std::stoul(std::string(p.substr(1))) % delays.size()]);
    });
    Gateway g(backend, fast(8));
    auto reqs = requests(64);
    auto res = g.complete_many(reqs);
    ASSERT_TRUE(res.ok());
    ASSERT_EQ(res.results.size(), 64u);
    for (std::size_t i = 1; i < res.results.size(); ++i)
        EXPECT_LT(res.results[i - 1].request_index, res.results[i].request_index);
    for (const auto& r : reqs) {
        auto it = std::find_if(res.results.begin(), res.results.end(),
                               [&](const auto& x) { return x.request_index == r.request_index; });
        ASSERT_NE(it, res.results.end());
        EXPECT_EQ(it->completions.at(0), r.prompt + "#0n");
    }
}

TEST(Gateway, InFlightNeverExceedsLimit) {
    for (std::size_t limit : {1u, 3u, 6u}) {
        auto backend = std::make_shared<ScriptedBackend>(Responder(echo));
        backend->set_latency([](std::string_view, std::size_t) { return std::chrono::microseconds(500); });
        Gateway g(backend, fast(limit));
        auto res = g.complete_many(requests(30, 0.7, 2));
        ASSERT_TRUE(res.ok());
        EXPECT_LE(g.stats().peak_in_flight, limit);
        EXPECT_GE(g.stats().peak_in_flight, 1u);
    }
}

TEST(Gateway, SharedGatewayBoundsConcurrentCallers) {
    auto backend = std::make_shared<ScriptedBackend>(Responder(echo));
    backend->set_latency([](std::string_view, std::size_t) { return std::chrono::microseconds(300); });
    Gateway g(backend, fast(2));
    {
        std::vector<std::jthread> callers;
        for (int t = 0; t < 4; ++t) callers.emplace_back([&] { g.complete_many(requests(10)); });
    }
    EXPECT_LE(g.stats().peak_in_flight, 2u);
}

TEST(Gateway, PartialFailureKeepsSuccesses) {
    auto backend = std::make_shared<ScriptedBackend>(Responder([](std::string_view p, std::size_t i, TemperatureBand b) {
        if (p == "p3" || p == "p7") throw GatewayError(GatewayErrorKind::rejected_request, "no");
        return echo(p, i, b);
    }));
    Gateway g(backend, fast());
    auto reqs = requests(10);
    auto res = g.complete_many(reqs);
    EXPECT_FALSE(res.ok());
    EXPECT_EQ(res.results.size(), 8u);
    ASSERT_EQ(res.errors.size(), 2u);
    EXPECT_EQ(res.errors[0].request_index, reqs[7].request_index);
    EXPECT_EQ(res.errors[1].request_index, reqs[3].request_index);
    EXPECT_EQ(res.errors[0].kind, GatewayErrorKind::rejected_request);
}

TEST(Gateway, GreedyRequestIsOneCallReplicated) {
    auto backend = std::make_shared<ScriptedBackend>(Responder(echo));
    Gateway g(backend, fast());
    CompletionRequest r;
    r.prompt = "q";
    r.temperature = 0.0;
    r.n_samples = 5;
    auto out = g.complete(r);
    EXPECT_EQ(out.completions, std::vector<std::string>(5, "q#0z"));
    EXPECT_EQ(g.stats().backend_calls, 1u);
}

TEST(Gateway, SampledRequestUsesDistinctIndices) {
    auto d = fast();
    Gateway fan(std::make_shared<ScriptedBackend>(Responder(echo)), d);
    d.supports_n = true;
    Gateway batched(std::make_shared<ScriptedBackend>(Responder(echo)), d);
    CompletionRequest r;
    r.prompt = "q";
    r.temperature = 0.7;
    r.n_samples = 4;
    r.first_sample = 10;
    std::vector<std::string> expected{"q#10n", "q#11n", "q#12n", "q#13n"};
    EXPECT_EQ(fan.complete(r).completions, expected);
    EXPECT_EQ(fan.stats().backend_calls, 4u);
    EXPECT_EQ(batched.complete(r).completions, expected);
    EXPECT_EQ(batched.stats().backend_calls, 1u);
}

TEST(Gateway, TransportErrorsAreRetried) {
    auto backend = std::make_shared<FlakyBackend>(2, GatewayErrorKind::transport);
    Gateway g(backend, fast(4, 3));
    CompletionRequest r;
    r.prompt = "x";
    r.temperature = 0.5;
    EXPECT_EQ(g.complete(r).completions.at(0), "x#0n");
    EXPECT_EQ(backend->calls("x"), 3u);
    EXPECT_EQ(g.stats().retries, 2u);
}

TEST(Gateway, RetryLimitCountsTotalAttempts) {
    auto backend = std::make_shared<FlakyBackend>(3, GatewayErrorKind::transport);
    Gateway g(backend, fast(4, 3));
    CompletionRequest r;
    r.prompt = "x";
    r.temperature = 0.5;
    try {
        g.complete(r);
        FAIL() << "expected GatewayError";
    } catch (const GatewayError& e) {
        EXPECT_EQ(e.kind(), GatewayErrorKind::transport);
    }
    EXPECT_EQ(backend->calls("x"), 3u);
}

TEST(Gateway, NonTransportErrorsAreNotRetried) {
    for (auto kind : {GatewayErrorKind::authentication, GatewayErrorKind::malformed_response,
                      GatewayErrorKind::rejected_request}) {
        auto backend = std::make_shared<FlakyBackend>(1, kind);
        Gateway g(backend, fast(4, 5));
        CompletionRequest r;
        r.prompt = "x";
        r.temperature = 0.5;
        EXPECT_THROW(g.complete(r), GatewayError);
        EXPECT_EQ(backend->calls("x"), 1u);
    }
}

TEST(Gateway, EmptyBatchAndInvalidRequests) {
    Gateway g(std::make_shared<ScriptedBackend>(Responder(echo)), fast());
    auto res = g.complete_many({});
    EXPECT_TRUE(res.ok());
    EXPECT_TRUE(res.results.empty());

    CompletionRequest r;
    r.prompt = "x";
    r.n_samples = 0;
    EXPECT_THROW(g.complete(r), GatewayError);
    r.n_samples = 1;
    r.temperature = -1;
    EXPECT_THROW(g.complete(r), GatewayError);

    std::vector<CompletionRequest> dup(2);
    EXPECT_THROW(g.complete_many(dup), GatewayError);
}

TEST(Gateway, EmbedPreservesOrder) {
    auto backend = std::make_shared<ScriptedBackend>(Responder(echo), [](std::string_view t) {
        return std::vector<double>{static_cast<double>(t.size()), 1.0};
    });
    Gateway g(backend, fast());
    std::vector<std::string> texts{"a", "bbb", "cc"};
    auto v = g.embed(texts);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0][0], 1.0);
    EXPECT_EQ(v[1][0], 3.0);
    EXPECT_EQ(v[2][0], 2.0);
    EXPECT_TRUE(g.embed({}).empty());

    Gateway none(std::make_shared<ScriptedBackend>(Responder(echo)), fast());
    EXPECT_THROW(none.embed(texts), GatewayError);
}

TEST(ScriptedBackend, TableLookupKeysOnHashIndexAndBand) {
    ScriptTable t;
    auto h = text::content_hash("prompt  one");
    t.add(h, 0, TemperatureBand::zero, "greedy");
    t.add(h, 0, std::nullopt, "any0");
    t.add(h, 1, TemperatureBand::nonzero, "sampled1");
    auto g = test::table_gateway(std::move(t));

    CompletionRequest r;
    r.prompt = "prompt one";  // whitespace layout does not matter
    r.temperature = 0;
    EXPECT_EQ(g->complete(r).completions.at(0), "greedy");
    r.temperature = 0.7;
    r.n_samples = 2;
    EXPECT_EQ(g->complete(r).completions, (std::vector<std::string>{"any0", "sampled1"}));
    r.n_samples = 3;
    try {
        g->complete(r);
        FAIL() << "expected script miss";
    } catch (const GatewayError& e) {
        EXPECT_EQ(e.kind(), GatewayErrorKind::script_miss);
        EXPECT_TRUE(text::contains(e.what(), h));
    }
}

TEST(ScriptedBackend, ScriptFileRoundTrip) {
    auto dir = test::temp_dir("script");
    {
        std::ofstream out(dir / "s.jsonl");
        out << R"({"prompt": "hello", "index": 0, "band": "zero", "completion": "hi"})" << "\n\n";
        out << R"({"prompt": "hello", "index": 2, "completion": "yo"})" << "\n";
        out << R"({"text": "hello", "embedding": [1, 0]})" << "\n";
    }
    auto t = ScriptTable::load(dir / "s.jsonl");
    EXPECT_EQ(t.size(), 3u);
    t.save(dir / "copy.jsonl");
    auto u = ScriptTable::load(dir / "copy.jsonl");
    EXPECT_EQ(u.find(text::content_hash("hello"), 0, TemperatureBand::zero), "hi");
    EXPECT_EQ(u.find(text::content_hash("hello"), 2, TemperatureBand::zero), "yo");
    EXPECT_FALSE(u.find(text::content_hash("hello"), 0, TemperatureBand::nonzero));
    EXPECT_EQ(u.find_embedding(text::content_hash("hello")), (std::vector<double>{1, 0}));

    std::ofstream(dir / "bad.jsonl") << R"({"prompt": "x", "band": "warm", "completion": "c"})" << "\n";
    EXPECT_THROW(ScriptTable::load(dir / "bad.jsonl"), GatewayError);
    EXPECT_THROW(ScriptTable::load(dir / "nope.jsonl"), GatewayError);
}

TEST(ScriptedBackend, RecordingReplaysIdentically) {
    auto table = std::make_shared<ScriptTable>();
    auto rec = std::make_shared<RecordingBackend>(Responder(echo), table);
    Gateway g(rec, fast());
    auto reqs = requests(5, 0.7, 3);
    auto live = g.complete_many(reqs);
    auto dir = test::temp_dir("recording");
    table->save(dir / "r.jsonl");
    auto replay = test::table_gateway(ScriptTable::load(dir / "r.jsonl"));
    auto again = replay->complete_many(reqs);
    ASSERT_TRUE(again.ok());
    ASSERT_EQ(again.results.size(), live.results.size());
    for (std::size_t i = 0; i < live.results.size(); ++i)
        EXPECT_EQ(again.results[i].completions, live.results[i].completions);
}
