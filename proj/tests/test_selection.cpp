#include <random>
#include <regex>
#include <tuple>

#include "test_support.hpp"

using namespace synthrl;

namespace {

ScoredSample scored(std::string id, std::size_t p, std::size_t L = 64) {
    Sample s;
    s.id = std::move(id);
    s.input = "Problem " + s.id;
    s.output = "#### 1";
    return make_scored(std::move(s), p, L);
}

std::vector<std::string> ids(std::span<const ScoredSample> v, const SelectionResult& r) {
    std::vector<std::string> out;
    for (auto i : r.order) out.push_back(v[i].sample.id);
    return out;
}

/// Reference ordering written from the definition: sort the full list by
/// (score, never-passed, position) and keep the first M.
std::vector<std::size_t> reference_order(std::span<const ScoredSample> v, std::size_t M) {
    std::vector<std::tuple<double, int, std::size_t>> keys;
    for (std::size_t i = 0; i < v.size(); ++i) {
        double s = v[i].pass_count == 0 ? 1.0 : static_cast<double>(v[i].pass_count) / static_cast<double>(v[i].pass_samples);
        keys.emplace_back(s, v[i].pass_count == 0 ? 1 : 0, i);
    }
    std::sort(keys.begin(), keys.end());
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < std::min(M, keys.size()); ++k) out.push_back(std::get<2>(keys[k]));
    return out;
}

}  // namespace

TEST(Score, Examples) {
    EXPECT_EQ(score(0, 64), 1.0);
    EXPECT_EQ(score(64, 64), 1.0);
    EXPECT_EQ(score(16, 64), 0.25);
    EXPECT_EQ(score(1, 64), 1.0 / 64);
    EXPECT_THROW(score(1, 0), std::invalid_argument);
    EXPECT_THROW(score(65, 64), std::invalid_argument);
}

TEST(Select, LowestScoresFirstWithStableTies) {
    std::vector<ScoredSample> v{scored("a", 32), scored("b", 8), scored("c", 0), scored("d", 8), scored("e", 64),
                                scored("f", 16)};
    auto r = synthrl::select(v, 4);
    EXPECT_EQ(ids(v, r), (std::vector<std::string>{"b", "d", "f", "a"}));
    EXPECT_EQ(r.tie_events, 1u);
    EXPECT_EQ(r.padded_perfect + r.padded_zero, 0u);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Select, PaddingPutsAlwaysPassedBeforeNeverPassed) {
    std::vector<ScoredSample> v{scored("zero1", 0), scored("perfect1", 64), scored("mid", 10), scored("zero2", 0),
                                scored("perfect2", 64)};
    auto r = synthrl::select(v, 4);
    EXPECT_EQ(ids(v, r), (std::vector<std::string>{"mid", "perfect1", "perfect2", "zero1"}));
    EXPECT_EQ(r.padded_perfect, 2u);
    EXPECT_EQ(r.padded_zero, 1u);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_TRUE(text::contains(r.warnings[0], "padded with 3"));
}

TEST(Select, MLargerThanSetSelectsAllAndWarns) {
    std::vector<ScoredSample> v{scored("a", 3), scored("b", 2)};
    auto r = synthrl::select(v, 10);
    EXPECT_EQ(ids(v, r), (std::vector<std::string>{"b", "a"}));
    ASSERT_FALSE(r.warnings.empty());
    EXPECT_TRUE(text::contains(r.warnings[0], "exceeds"));
    EXPECT_THROW(synthrl::select({}, 1), std::invalid_argument);
    EXPECT_THROW(synthrl::select(v, 0), std::invalid_argument);
}

TEST(Select, BaselineStrategies) {
    std::vector<ScoredSample> v{scored("a", 32), scored("b", 0), scored("c", 64), scored("d", 8)};
    EXPECT_EQ(ids(v, synthrl::select(v, 4, SelectionStrategy::easy)), (std::vector<std::string>{"c", "a", "d", "b"}));
    EXPECT_EQ(ids(v, synthrl::select(v, 4, SelectionStrategy::hard)), (std::vector<std::string>{"b", "d", "a", "c"}));
    EXPECT_EQ(ids(v, synthrl::select(v, 2, SelectionStrategy::full)), (std::vector<std::string>{"a", "b"}));
}

TEST(Select, MatchesReferenceAndIsMonotoneOnRandomInputs) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
        std::size_t L = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
        std::vector<ScoredSample> v;
        for (std::size_t i = 0; i < n; ++i)
            v.push_back(scored("s" + std::to_string(i), std::uniform_int_distribution<std::size_t>(0, L)(rng), L));
        std::size_t M = std::uniform_int_distribution<std::size_t>(1, n + 5)(rng);
        auto r = synthrl::select(v, M);
        ASSERT_EQ(r.order, reference_order(v, M)) << "trial " << trial;

        // Every selected score is <= every unselected score.
        std::vector<bool> chosen(n);
        double worst_selected = 0;
        for (auto i : r.order) {
            chosen[i] = true;
            worst_selected = std::max(worst_selected, v[i].score);
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!chosen[i]) EXPECT_GE(v[i].score, worst_selected);
        for (std::size_t k = 1; k < r.order.size(); ++k) EXPECT_LE(v[r.order[k - 1]].score, v[r.order[k]].score);

        EXPECT_EQ(synthrl::select(v, M).order, r.order);  // deterministic
    }
}

TEST(PassRate, CountsPassesOverLSamples) {
    // The base model answers correctly on the first k sampled draws, k being the problem number.
    auto base = test::scripted_gateway([](std::string_view p, std::size_t idx, TemperatureBand band) {
        EXPECT_EQ(band, TemperatureBand::nonzero);
        static const std::regex re(R"(Problem (\d+))");
        std::cmatch m;
        std::regex_search(p.begin(), p.end(), m, re);
        std::size_t k = std::stoul(m[1].str());
        return std::string(idx < k ? "#### 1" : "#### 2");
    });
    PipelineConfig c;
    c.pass_samples = 8;
    std::vector<Sample> samples;
    for (int k : {0, 3, 8}) samples.push_back(scored(std::to_string(k), 0).sample);
    auto counts = measure_pass_counts(samples, *base, presets::gsm8k(), c, 2);
    EXPECT_EQ(counts, (std::vector<std::size_t>{0, 3, 8}));
    auto s = score_samples(samples, *base, presets::gsm8k(), c);
    EXPECT_EQ(s[0].score, 1.0);
    EXPECT_EQ(s[1].score, 3.0 / 8);
    EXPECT_EQ(s[2].score, 1.0);
    EXPECT_EQ(measure_pass_count(samples[1], *base, presets::gsm8k(), 8, 0.7, 64), 3u);
    EXPECT_THROW(measure_pass_count(samples[1], *base, presets::gsm8k(), 8, 0.0, 64), std::invalid_argument);
    EXPECT_THROW(measure_pass_count(samples[1], *base, presets::gsm8k(), 0, 0.7, 64), std::invalid_argument);
}

TEST(PassRate, ScoredJsonRoundTripValidatesScore) {
    auto dir = test::temp_dir("scored");
    std::vector<ScoredSample> v{scored("a", 5, 16), scored("b", 0, 16)};
    save_scored(dir / "s.jsonl", v);
    auto back = load_scored(dir / "s.jsonl");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].sample, v[0].sample);
    EXPECT_EQ(back[0].score, 5.0 / 16);
    EXPECT_EQ(back[1].score, 1.0);

    auto j = nlohmann::json::parse(to_json(v[0]).dump());
    j["score"] = 0.9;
    EXPECT_THROW(scored_from_json(j), std::invalid_argument);
}
