#include <cmath>
#include <fstream>
#include <random>

#include "test_support.hpp"

using namespace synthrl;

namespace {

Passage passage(std::string id, std::string body) {
    Passage p;
    p.id = std::move(id);
    p.text = std::move(body);
    return p;
}

std::string words(std::size_t n, const std::string& w = "filler") {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += w + " ";
    return s;
}

/// Brute-force Okapi BM25 straight from the textbook definition, recounting
/// everything per query.
double oracle_bm25(const std::vector<std::vector<std::string>>& docs, std::size_t d,
                   const std::vector<std::string>& query, double k1 = 1.2, double b = 0.75) {
    double total = 0;
    for (const auto& doc : docs) total += static_cast<double>(doc.size());
    double avgdl = total / static_cast<double>(docs.size());
    double N = static_cast<double>(docs.size());
    double score = 0;
    for (const auto& q : query) {
        double n_q = 0;
        for (const auto& doc : docs)
            if (std::find(doc.begin(), doc.end(), q) != doc.end()) n_q += 1;
        double f = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), q));
        if (f == 0) continue;
        double idf = std::log((N - n_q + 0.5) / (n_q + 0.5) + 1.0);
        double len = static_cast<double>(docs[d].size());
        score += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len / avgdl));
    }
    return score;
}

}  // namespace

TEST(Retrieval, AverageLengthExample) {
    auto idx = CorpusIndex::build({passage("a", words(10)), passage("b", words(20)), passage("c", words(30))});
    EXPECT_DOUBLE_EQ(idx.avg_doc_length(), 20.0);
    EXPECT_EQ(idx.doc_length(1), 20u);
}

TEST(Retrieval, ScoresMatchBruteForceOracle) {
    std::mt19937 rng(17);
    std::vector<std::string> vocab = {"sun", "moon", "star", "tax", "loan", "bread", "salt", "root", "leaf", "orbit"};
    std::vector<Passage> ps;
    std::vector<std::vector<std::string>> docs;
    for (int i = 0; i < 40; ++i) {
        std::string body;
        int len = std::uniform_int_distribution<int>(3, 25)(rng);
        for (int w = 0; w < len; ++w) body += vocab[std::uniform_int_distribution<std::size_t>(0, vocab.size() - 1)(rng)] + " ";
        char id[8];
        std::snprintf(id, sizeof id, "d%02d", i);
        ps.push_back(passage(id, body));
        docs.push_back(text::tokenize(body));
    }
    auto idx = CorpusIndex::build(ps);
    for (const std::vector<std::string>& q : {std::vector<std::string>{"sun"}, {"moon", "orbit"}, {"tax", "tax", "loan"},
                                              {"bread", "salt", "unknownword"}}) {
        auto ranked = idx.score(q);
        std::size_t matching = 0;
        for (std::size_t d = 0; d < docs.size(); ++d)
            if (oracle_bm25(docs, d, q) > 0) ++matching;
        EXPECT_EQ(ranked.size(), matching);
        for (const auto& r : ranked) EXPECT_NEAR(r.score, oracle_bm25(docs, r.doc, q), 1e-9);
        for (std::size_t i = 1; i < ranked.size(); ++i) EXPECT_GE(ranked[i - 1].score, ranked[i].score);
    }
}

TEST(Retrieval, TiesBreakByPassageId) {
    auto idx = CorpusIndex::build({passage("z", "apple pie"), passage("a", "apple tart"), passage("m", "plain")});
    auto r = retrieve({{"apple"}}, idx, 5);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].id, "a");
    EXPECT_EQ(r[1].id, "z");
}

TEST(Retrieval, NoMatchingTermsGivesEmptyResult) {
    auto idx = CorpusIndex::build({passage("a", "apple"), passage("b", "pear")});
    EXPECT_TRUE(retrieve({{"zebra"}}, idx, 5).empty());
}

TEST(Retrieval, TopKTruncatesAndKeywordsJoin) {
    auto idx = CorpusIndex::build({passage("a", "orbit moon"), passage("b", "orbit"), passage("c", "moon"),
                                   passage("d", "bread")});
    auto r = retrieve({{"orbit", "moon"}}, idx, 2);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].id, "a");
}

TEST(Retrieval, EmptyCorpusAndDuplicateIdsAreErrors) {
    EXPECT_THROW(CorpusIndex::build({}), RetrievalError);
    EXPECT_THROW(CorpusIndex::build({passage("a", "x"), passage("a", "y")}), RetrievalError);
    EXPECT_THROW(retrieve({{"x"}}, CorpusIndex{}, 3), RetrievalError);
}

TEST(Retrieval, IngestSkipsMalformedRecords) {
    auto dir = test::temp_dir("ingest");
    {
        std::ofstream out(dir / "c.jsonl");
        out << R"({"id": "p1", "source": "wikipedia", "text": "The moon orbits."})" << "\n";
        out << "not json\n";
        out << R"({"id": "p2", "source": "mars", "text": "x"})" << "\n";
        out << R"({"id": "p3", "text": "   "})" << "\n";
        out << R"({"id": 4, "text": "numeric id"})" << "\n";
    }
    auto r = ingest({(dir / "c.jsonl").string()});
    EXPECT_EQ(r.index.doc_count(), 2u);
    EXPECT_EQ(r.index.passages()[0].source, PassageSource::wikipedia);
    EXPECT_EQ(r.index.passages()[1].id, "4");
    ASSERT_EQ(r.diagnostics.size(), 3u);
    EXPECT_TRUE(text::contains(r.diagnostics[0], "record 2"));
    EXPECT_THROW(ingest({(dir / "missing.jsonl").string()}), RetrievalError);
}

TEST(Retrieval, CacheRoundTripAndStaleness) {
    auto dir = test::temp_dir("cache");
    auto idx = CorpusIndex::build({passage("a", "orbit moon moon"), passage("b", "bread salt")});
    idx.save(dir / "i.bin", 42);
    auto back = CorpusIndex::load(dir / "i.bin", 42);
    ASSERT_TRUE(back);
    EXPECT_EQ(back->passages(), idx.passages());
    EXPECT_DOUBLE_EQ(back->avg_doc_length(), idx.avg_doc_length());
    auto q = std::vector<std::string>{"moon", "salt"};
    auto s1 = idx.score(q), s2 = back->score(q);
    ASSERT_EQ(s1.size(), s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) EXPECT_EQ(s1[i].score, s2[i].score);

    EXPECT_FALSE(CorpusIndex::load(dir / "i.bin", 43));
    EXPECT_FALSE(CorpusIndex::load(dir / "none.bin", 42));
    std::filesystem::resize_file(dir / "i.bin", 30);
    EXPECT_FALSE(CorpusIndex::load(dir / "i.bin", 42));
}

TEST(Retrieval, ToyCorpusRetrievesOnTopic) {
    auto r = ingest({SYNTHRL_CORPUS});
    EXPECT_EQ(r.index.doc_count(), 200u);
    EXPECT_TRUE(r.diagnostics.empty());
    auto top = retrieve(parse_keywords("arithmetic, addition word problems"), r.index, 10);
    ASSERT_EQ(top.size(), 10u);
    // Topics are assigned round-robin; arithmetic passages are every sixth id.
    int on_topic = 0;
    for (const auto& p : top) on_topic += std::stoi(p.id.substr(1)) % 6 == 0;
    EXPECT_GE(on_topic, 8);
}

TEST(Keywords, ParseSplitsOnCommasAndNewlines) {
    auto k = parse_keywords(" logic, reasoning.\n\nreading comprehension ;");
    EXPECT_EQ(k.keywords, (std::vector<std::string>{"logic", "reasoning", "reading comprehension"}));
    EXPECT_THROW(parse_keywords(" , \n"), RetrievalError);
}

TEST(Keywords, ExtractionUsesKeywordPrompt) {
    auto def = presets::logiqa();
    std::string seen;
    auto g = test::scripted_gateway([&](std::string_view p, std::size_t, TemperatureBand) {
        seen = p;
        return std::string("Logical reasoning");
    });
    auto k = extract_keywords(def, *g, 0.7, 64);
    EXPECT_EQ(k.keywords, std::vector<std::string>{"Logical reasoning"});
    EXPECT_TRUE(text::contains(seen, def.description_instruction));
    EXPECT_TRUE(seen.ends_with("Only output the keyword."));
}
