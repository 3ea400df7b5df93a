#include <fstream>
#include <random>

#include "test_support.hpp"

using namespace synthrl;

namespace {

std::optional<ExtractedAnswer> ans(const std::string& raw, AnswerFormat f = AnswerFormat::hash_marks) {
    return ExtractedAnswer{raw, normalize(raw, f), f};
}

std::string wrap(const std::string& a, AnswerFormat f) {
    switch (f) {
        case AnswerFormat::tagged_answer: return "Reasoning first.\n<answer> " + a + " </answer>";
        case AnswerFormat::boxed: return "So the result is \\boxed{" + a + "}.";
        case AnswerFormat::hash_marks: return "Step 1.\nStep 2.\n#### " + a;
    }
    return {};
}

}  // namespace

// Expected values come from tests/data/make_rational_fixture.py (Python fractions/decimal).
TEST(AnswerCodec, RationalFixtureMatchesIndependentOracle) {
    std::ifstream in(std::string(SYNTHRL_TEST_DATA) + "/rational_fixture.json");
    ASSERT_TRUE(in) << "missing rational_fixture.json";
    auto cases = nlohmann::json::parse(in);
    ASSERT_EQ(cases.size(), 50u);
    for (const auto& c : cases) {
        const auto raw = c.at("raw").get<std::string>();
        auto v = numeric_value(raw);
        if (c.at("value").is_null()) {
            EXPECT_FALSE(v) << "'" << raw << "' parsed as " << v->str();
            continue;
        }
        ASSERT_TRUE(v) << "'" << raw << "' did not parse";
        EXPECT_EQ(*v, Rational(c.at("value").get<std::string>())) << raw;
        EXPECT_EQ(normalize(raw, AnswerFormat::hash_marks), c.at("normalized").get<std::string>()) << raw;
    }
}

TEST(AnswerCodec, ExtractionPerFormat) {
    auto t = extract_answer("I think <answer>a</answer> no wait <answer> (C) </answer>", AnswerFormat::tagged_answer);
    ASSERT_TRUE(t);
    EXPECT_EQ(t->raw, "(C)");
    EXPECT_EQ(t->normalized, "C");

    auto b = extract_answer("\\boxed{1} then \\boxed{\\frac{6}{8}}", AnswerFormat::boxed);
    ASSERT_TRUE(b);
    EXPECT_EQ(b->raw, "\\frac{6}{8}");
    EXPECT_EQ(b->normalized, "3/4");

    auto h = extract_answer("work\n#### 1,200\ntrailing note", AnswerFormat::hash_marks);
    ASSERT_TRUE(h);
    EXPECT_EQ(h->normalized, "1200");
}

TEST(AnswerCodec, MissingOrEmptyMarkerIsAbsent) {
    EXPECT_FALSE(extract_answer("no tags here", AnswerFormat::tagged_answer));
    EXPECT_FALSE(extract_answer("<answer>   </answer>", AnswerFormat::tagged_answer));
    EXPECT_FALSE(extract_answer("</answer> <answer>", AnswerFormat::tagged_answer));
    EXPECT_FALSE(extract_answer("\\boxed{unbalanced", AnswerFormat::boxed));
    EXPECT_FALSE(extract_answer("#### \n", AnswerFormat::hash_marks));
    EXPECT_FALSE(extract_answer("", AnswerFormat::hash_marks));
}

TEST(AnswerCodec, TaggedFreeTextIsCaseFolded) {
    EXPECT_EQ(normalize("  Yes  Indeed ", AnswerFormat::tagged_answer), "yes indeed");
    EXPECT_EQ(normalize("Yes  Indeed", AnswerFormat::boxed), "Yes Indeed");
    EXPECT_EQ(normalize("b.", AnswerFormat::tagged_answer), "B");
}

TEST(AnswerCodec, EquivalentNumbersCompareEqual) {
    EXPECT_TRUE(answers_equal(*ans("0.5"), *ans("1/2")));
    EXPECT_TRUE(answers_equal(*ans("\\frac{2}{4}"), *ans("0.50")));
    EXPECT_TRUE(answers_equal(*ans("$1,000"), *ans("1000.0")));
    EXPECT_FALSE(answers_equal(*ans("0.33"), *ans("1/3")));
    EXPECT_FALSE(answers_equal(*ans("12"), *ans("21")));
    EXPECT_THROW(answers_equal(*ans("1"), *ans("1", AnswerFormat::boxed)), std::invalid_argument);
}

TEST(AnswerCodec, ExtractOfWrappedAnswerIsNormalizedAnswer) {
    std::mt19937_64 rng(91);
    std::uniform_int_distribution<int> kind(0, 4), num(-5000, 5000), den(1, 40), letter(0, 25);
    for (auto f : {AnswerFormat::tagged_answer, AnswerFormat::boxed, AnswerFormat::hash_marks}) {
        for (int i = 0; i < 300; ++i) {
            std::string a;
            switch (kind(rng)) {
                case 0: a = std::to_string(num(rng)); break;
                case 1: a = std::to_string(num(rng)) + "/" + std::to_string(den(rng)); break;
                case 2: a = "\\frac{" + std::to_string(num(rng)) + "}{" + std::to_string(den(rng)) + "}"; break;
                case 3: a = std::to_string(num(rng)) + "." + std::to_string(den(rng)); break;
                default: a = std::string(1, static_cast<char>('a' + letter(rng))); break;
            }
            auto e = extract_answer(wrap(a, f), f);
            ASSERT_TRUE(e) << a;
            EXPECT_EQ(e->raw, a);
            EXPECT_EQ(e->normalized, normalize(a, f)) << a;
            EXPECT_EQ(normalize(e->normalized, f), e->normalized) << "normalize not idempotent on " << a;
        }
    }
}

TEST(AnswerCodec, EqualityIsAnEquivalenceRelation) {
    std::vector<std::string> pool = {"1/2", "0.5", "\\frac{3}{6}", ".50", "2", "2.0", "4/2", "$2",
                                     "x", "X", "1/3", "0.333", "-1/2", "-0.5", "abc", "ABC"};
    std::vector<ExtractedAnswer> v;
    for (const auto& p : pool) v.push_back(*ans(p));
    for (const auto& a : v) {
        EXPECT_TRUE(answers_equal(a, a));
        for (const auto& b : v) {
            EXPECT_EQ(answers_equal(a, b), answers_equal(b, a)) << a.raw << " " << b.raw;
            for (const auto& c : v)
                if (answers_equal(a, b) && answers_equal(b, c)) EXPECT_TRUE(answers_equal(a, c));
        }
    }
}

TEST(AnswerCodec, MajorityVoteExamples) {
    std::vector<std::optional<ExtractedAnswer>> v{ans("4"), ans("4"), ans("5")};
    auto r = majority_vote(v, 2);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->winner.normalized, "4");
    EXPECT_EQ(r->count, 2u);

    std::vector<std::optional<ExtractedAnswer>> tie{ans("5"), ans("4")};
    r = majority_vote(tie, 1);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->winner.normalized, "4");
    EXPECT_EQ(r->count, 1u);

    std::vector<std::optional<ExtractedAnswer>> split;
    for (int i = 0; i < 7; ++i) split.push_back(ans("A", AnswerFormat::tagged_answer));
    for (int i = 0; i < 6; ++i) split.push_back(ans("B", AnswerFormat::tagged_answer));
    for (int i = 0; i < 3; ++i) split.push_back(std::nullopt);
    EXPECT_FALSE(majority_vote(split, 8));
    r = majority_vote(split, 7);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->winner.normalized, "A");
}

TEST(AnswerCodec, VotePoolsEquivalentSpellings) {
    std::vector<std::optional<ExtractedAnswer>> v{ans("0.5"), ans("1/2"), ans("\\frac{1}{2}"), ans("3"), ans("3")};
    auto r = majority_vote(v, 3);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->count, 3u);
    EXPECT_TRUE(answers_equal(r->winner, *ans("0.5")));
}

TEST(AnswerCodec, AllAbsentHasNoWinner) {
    std::vector<std::optional<ExtractedAnswer>> v(5);
    EXPECT_FALSE(majority_vote(v, 0));
    EXPECT_FALSE(majority_vote(std::span<const std::optional<ExtractedAnswer>>{}, 0));
}
