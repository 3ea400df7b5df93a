#include <fstream>

#include "test_support.hpp"

using namespace synthrl;

TEST(Config, EmptyDocumentYieldsDefaults) {
    auto c = parse_config("");
    EXPECT_EQ(c.n_initial, 500u);
    EXPECT_EQ(c.m_train, 500u);
    EXPECT_EQ(c.vote_count, 16u);
    EXPECT_EQ(c.pass_samples, 64u);
    EXPECT_EQ(c.gen_temperature, 0.7);
    EXPECT_EQ(c.eval_temperature, 0.7);
    EXPECT_EQ(PipelineConfig::solve_temperature, 0.0);
    EXPECT_EQ(c.retrieval_top_k, 20u);
    EXPECT_EQ(c.generation_budget_multiplier, 3.0);
    EXPECT_EQ(c.effective_min_votes(), 9u);
    EXPECT_EQ(c.trainer_profile.algorithm_name, "grpo");
    EXPECT_EQ(c.trainer_profile.learning_rate, 1e-6);
    EXPECT_EQ(c.trainer_profile.responses_per_prompt, 16u);
    EXPECT_EQ(c.trainer_profile.batch_size, 64u);
    EXPECT_EQ(c.trainer_profile.max_response_length, 2048u);
    EXPECT_EQ(c.trainer_profile.kl_coefficient, 0.01);
    EXPECT_EQ(c.trainer_profile.epochs, 5u);
    EXPECT_EQ(parse_config("  \n\t"), c);
    EXPECT_EQ(parse_config("{}"), c);
}

TEST(Config, SingleOverrideLeavesOtherDefaults) {
    auto c = parse_config(R"({"m_train": 100})");
    PipelineConfig expected;
    expected.m_train = 100;
    EXPECT_EQ(c, expected);
}

TEST(Config, InvariantViolationNamesTheField) {
    try {
        parse_config(R"({"pass_samples": 0})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        ASSERT_EQ(e.problems().size(), 1u);
        EXPECT_TRUE(e.problems()[0].starts_with("pass_samples"));
    }
}

TEST(Config, EveryFailingFieldIsListed) {
    try {
        parse_config(R"({"pass_samples": 0, "eval_temperature": 0, "vote_count": 0, "trainer": {"epochs": 0}})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        std::string all;
        for (const auto& p : e.problems()) all += p + "\n";
        EXPECT_TRUE(text::contains(all, "pass_samples"));
        EXPECT_TRUE(text::contains(all, "eval_temperature"));
        EXPECT_TRUE(text::contains(all, "vote_count"));
        EXPECT_TRUE(text::contains(all, "trainer.epochs"));
    }
}

TEST(Config, ParseErrorsReportLineAndColumn) {
    try {
        parse_config("{\n  \"n_initial\": 5,\n  oops\n}", {}, "cfg.json");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_TRUE(text::contains(e.what(), "cfg.json:3:")) << e.what();
    }
}

TEST(Config, UnknownAndMistypedFieldsAreErrors) {
    EXPECT_THROW(parse_config(R"({"n_inital": 5})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"n_initial": "five"})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"instructor": {"kind": "grpc"}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"selection": "random"})"), ConfigError);
}

TEST(Config, HttpBackendNeedsEndpointAndModel) {
    EXPECT_THROW(parse_config(R"({"base": {"kind": "http_openai_compatible"}})"), ConfigError);
    auto c = parse_config(R"({"base": {"kind": "http_openai_compatible", "endpoint_url": "http://h/v1",
                                       "model_name": "m", "credential_env_var": "API_KEY"}})");
    EXPECT_EQ(c.base_backend.kind, BackendKind::http_openai_compatible);
    EXPECT_EQ(c.base_backend.role, BackendRole::base);
    EXPECT_EQ(c.base_backend.credential_env_var, "API_KEY");
}

TEST(Config, EvenVoteCountWarns) {
    auto c = parse_config(R"({"vote_count": 4, "retrieval_enabled": false})");
    auto w = config_warnings(c);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_TRUE(text::contains(w[0], "even"));
}

TEST(Config, DefaultsRoundTripThroughJson) {
    PipelineConfig c;
    auto back = config_from_json(nlohmann::json::parse(to_json(c).dump()));
    EXPECT_EQ(back, c);
    EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, FullRoundTripAndHashSensitivity) {
    auto c = parse_config(R"({"n_initial": 20, "min_votes": 3, "vote_count": 5, "selection": "hard",
                              "corpus": ["/a.jsonl", "/b.jsonl"], "embedding": {"kind": "scripted", "script": "/e"},
                              "trainer": {"command_template": "echo {data_path}"}})");
    auto back = config_from_json(nlohmann::json::parse(to_json(c).dump()));
    EXPECT_EQ(back, c);
    auto d = c;
    d.seed += 1;
    EXPECT_NE(config_hash(c), config_hash(d));
}

TEST(Config, RelativePathsResolveAgainstConfigDirectory) {
    auto dir = test::temp_dir("config");
    std::ofstream(dir / "c.json") << R"({"corpus": "data/x.jsonl", "base": {"script": "s.jsonl"}})";
    auto c = load_config(dir / "c.json");
    EXPECT_EQ(c.corpus.at(0), (dir / "data/x.jsonl").string());
    EXPECT_EQ(c.base_backend.script, (dir / "s.jsonl").string());
    EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}
