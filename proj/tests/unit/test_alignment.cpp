#include <doctest.h>

#include <random>

#include "htp/alignment.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace htp;
using htp::testing::expert_summary_rows;

namespace {

double cos(std::vector<double> u, std::vector<double> v) { return cosine_similarity(std::span<const double>(u), std::span<const double>(v)); }

const PromptTemplate kStudyPrompt{"alignment_v1", "Give a psychological interpretation of this HTP drawing."};

GenerateRequest study_request(const CaseRecord& c) {
    return GenerateRequest::make(c.image, kStudyPrompt.text, kStudyPrompt.id);
}

}  // namespace

TEST_CASE("cosine similarity examples") {
    CHECK(cos({3, 4}, {3, 4}) == doctest::Approx(1.0));
    CHECK(cos({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(cos({1, 2, 2}, {2, 1, 2}) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
    CHECK(std::abs(cos({1, 2, 2}, {2, 1, 2}) - 0.888889) <= 1e-6);
    CHECK(cos({1, 1}, {-1, -1}) == doctest::Approx(-1.0));
}

TEST_CASE("cosine similarity errors") {
    CHECK_THROWS_AS(cos({1, 2}, {1, 2, 3}), Error);
    try {
        cos({0, 0}, {1, 0});
        FAIL("expected zero norm");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ZeroNorm);
    }
}

TEST_CASE("cosine symmetry, scale invariance and range on random vectors") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t dim = std::array<std::size_t, 3>{2, 3, 64}[trial % 3];
        std::vector<double> u(dim), v(dim);
        for (auto& x : u) x = g(rng);
        for (auto& x : v) x = g(rng);
        const double c = cos(u, v);
        REQUIRE(c >= -1.0);
        REQUIRE(c <= 1.0);
        REQUIRE(std::abs(c - cos(v, u)) <= 1e-9);
        const double a = scale(rng), b = scale(rng);
        auto au = u, bv = v;
        for (auto& x : au) x *= a;
        for (auto& x : bv) x *= b;
        REQUIRE(std::abs(c - cos(au, bv)) <= 1e-9);
        REQUIRE(std::abs(c - oracle::brute_cosine(u, v)) <= 1e-12);
    }
}

TEST_CASE("aggregate of the per-expert summary rows") {
    const auto agg = aggregate_rows(expert_summary_rows());
    CHECK(agg.total_cases == 307);
    // 228.469 / 307, recomputed by hand from the row means
    CHECK(agg.weighted_mean == doctest::Approx(228.469 / 307.0).epsilon(1e-12));
    CHECK(std::abs(agg.weighted_mean - 0.7441) <= 0.001);
}

TEST_CASE("aggregate edge cases") {
    CHECK(aggregate_rows(std::vector<StatsRow>{{"g", 5, 0.5}}).weighted_mean == 0.5);
    const auto sym = aggregate_rows(std::vector<StatsRow>{{"a", 1, 0.0}, {"b", 1, 1.0}});
    CHECK(sym.weighted_mean == 0.5);
    CHECK(sym.total_cases == 2);
    CHECK_THROWS_AS(aggregate_rows(std::vector<StatsRow>{}), Error);
    CHECK_THROWS_AS(aggregate_rows(std::vector<StatsRow>{{"a", 0, 0.3}}), Error);
}

TEST_CASE("group statistics with OVERALL last") {
    std::vector<SimilarityRecord> records{{"HTR-30-M-20240101", "A", 0.6}, {"HTR-31-M-20240101", "A", 0.7},
                                          {"HTR-32-M-20240101", "A", 0.8}, {"HTR-33-F-20240101", "B", 0.5}};
    const auto rows = group_statistics(records);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].group == "A");
    CHECK(rows[0].sd == doctest::Approx(0.1));
    CHECK(rows[1].group == "B");
    CHECK(rows[1].sd == 0.0);
    CHECK(rows[2].group == "OVERALL");
    CHECK(rows[2].cases == 4);
    CHECK_THROWS_AS(group_statistics(std::vector<SimilarityRecord>{}), Error);
}

TEST_CASE("single group: OVERALL equals the group row") {
    std::vector<SimilarityRecord> records;
    for (int i = 0; i < 10; ++i) records.push_back({"id", "only", 0.5 + 0.03 * i});
    const auto rows = group_statistics(records);
    REQUIRE(rows.size() == 2);
    const auto &g = rows[0], &o = rows[1];
    CHECK(g.cases == o.cases);
    CHECK(g.mean == o.mean);
    CHECK(g.median == o.median);
    CHECK(g.q1 == o.q1);
    CHECK(g.q3 == o.q3);
    CHECK(g.min == o.min);
    CHECK(g.max == o.max);
    CHECK(g.sd == o.sd);
}

TEST_CASE("group sizes sum to OVERALL and pooled mean matches") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> sim(0.4, 0.95);
    std::uniform_int_distribution<int> group(0, 5), size(1, 600);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<SimilarityRecord> records(static_cast<std::size_t>(size(rng)));
        for (auto& r : records) r = {"id", "expert" + std::to_string(group(rng)), sim(rng)};
        auto rows = group_statistics(records);
        const auto overall = rows.back();
        rows.pop_back();
        std::size_t total = 0;
        for (const auto& r : rows) {
            total += r.cases;
            REQUIRE(r.min <= r.q1);
            REQUIRE(r.q1 <= r.median);
            REQUIRE(r.median <= r.q3);
            REQUIRE(r.q3 <= r.max);
            REQUIRE(r.sd >= 0.0);
        }
        REQUIRE(total == overall.cases);
        REQUIRE(std::abs(aggregate_rows(rows).weighted_mean - overall.mean) <= 1e-12);
    }
}

TEST_CASE("threshold share over records") {
    std::vector<SimilarityRecord> r{{"a", "g", 0.71}, {"b", "g", 0.69}, {"c", "g", 0.75}, {"d", "g", 0.80}};
    CHECK(threshold_share(r, 0.70) == doctest::Approx(0.75));
}

TEST_CASE("evaluate_corpus with identical embeddings scores 1.0") {
    ScriptedMock gen("gen"), emb("emb");
    std::vector<CaseRecord> cases;
    for (int i = 0; i < 3; ++i) {
        cases.push_back(testing::make_case("HTR-" + std::to_string(30 + i) + "-F-20240301", "Wang Long",
                                           "expert text " + std::to_string(i)));
        gen.on_generate(study_request(cases.back()), "ai text " + std::to_string(i));
        emb.on_embed("ai text " + std::to_string(i), {1.0, 2.0, 3.0});
        emb.on_embed("expert text " + std::to_string(i), {2.0, 4.0, 6.0});
    }
    const auto result = evaluate_corpus(cases, gen, emb, kStudyPrompt, 4);
    CHECK(result.errors.empty());
    REQUIRE(result.records.size() == 3);
    for (const auto& r : result.records) {
        CHECK(r.similarity == doctest::Approx(1.0));
        CHECK(r.expert_label == "Wang Long");
    }
    CHECK(result.records[0].ai_text_ref == "eval/interpretations/HTR-30-F-20240301.json");
    CHECK(result.ai_texts.at("HTR-31-F-20240301").text == "ai text 1");
}

TEST_CASE("evaluate_corpus: orthogonal case, missing expert text and backend failure") {
    ScriptedMock gen("gen"), emb("emb");
    std::vector<CaseRecord> cases{testing::make_case("HTR-40-M-20240101", "A", "agree"),
                                  testing::make_case("HTR-41-M-20240101", "A", "disagree"),
                                  testing::make_case("HTR-42-M-20240101", "A", std::nullopt),
                                  testing::make_case("HTR-43-M-20240101", std::nullopt, "unscripted")};
    gen.on_generate(study_request(cases[0]), "same");
    gen.on_generate(study_request(cases[1]), "orthogonal");
    emb.on_embed("same", {1, 1});
    emb.on_embed("agree", {1, 1});
    emb.on_embed("orthogonal", {1, 0});
    emb.on_embed("disagree", {0, 1});

    const auto result = evaluate_corpus(cases, gen, emb, kStudyPrompt, 2);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].similarity == doctest::Approx(1.0));
    CHECK(result.records[1].similarity == doctest::Approx(0.0));
    REQUIRE(result.errors.size() == 2);
    CHECK(result.errors[0].case_id == "HTR-42-M-20240101");
    CHECK(result.errors[0].stage == "input");
    CHECK(result.errors[1].case_id == "HTR-43-M-20240101");
    CHECK(result.errors[1].stage == "generate");
}

TEST_CASE("evaluate_corpus conserves 307 generated cases") {
    ScriptedMock gen("gen", MockFallback::EchoHash), emb("emb", MockFallback::EchoHash);
    std::vector<CaseRecord> cases;
    const char* experts[] = {"Wang Long", "Min Baoquan", "Yan Hu"};
    for (int i = 0; i < 307; ++i) {
        const int age = 18 + i % 60;
        const int day = 1 + i % 28;
        char id[40];
        std::snprintf(id, sizeof id, "HTR-%d-%c-202401%02d", age, "MFU"[i % 3], day);
        cases.push_back(testing::make_case(id, experts[i % 3], "expert interpretation " + std::to_string(i)));
        cases.back().image = DrawingArtifact(testing::tiny_png(static_cast<std::uint8_t>(i)), MediaType::Png);
        cases.back().subject_note = std::to_string(i);
    }
    const auto result = evaluate_corpus(cases, gen, emb, kStudyPrompt, 8);
    CHECK(result.errors.empty());
    CHECK(result.records.size() == 307);
    for (const auto& r : result.records) {
        REQUIRE(r.similarity >= -1.0);
        REQUIRE(r.similarity <= 1.0);
    }
}

TEST_CASE("plot data products") {
    std::vector<SimilarityRecord> records{{"a", "X", 0.61}, {"b", "X", 0.72}, {"c", "X", 0.78}, {"d", "Y", 0.7}};
    const auto plots = build_plot_data(records, 0.1, 0.6, 64);
    std::size_t total = 0;
    for (const auto& b : plots.histogram) total += b.count;
    CHECK(total == 4);
    CHECK(plots.five_number.size() == 3);
    CHECK(plots.density.contains("X"));
    CHECK(plots.density.contains("OVERALL"));
    REQUIRE(plots.density_skipped.size() == 1);
    CHECK(plots.density_skipped[0] == "Y");
    CHECK(histogram_json(plots)["bins"].size() == plots.histogram.size());
    CHECK(box_json(plots)["groups"].size() == 3);
    CHECK(violin_json(plots)["groups"].size() == 2);
}

TEST_CASE("similarity records round-trip and reject out-of-range values") {
    const SimilarityRecord r{"HTR-38-M-20240520", "Wang Long", 0.75, "x", "y"};
    const auto back = similarity_record_from_json(to_json(r));
    CHECK(back.case_id == r.case_id);
    CHECK(back.similarity == r.similarity);
    auto bad = to_json(r);
    bad["similarity"] = 1.5;
    CHECK_THROWS_AS(similarity_record_from_json(bad), Error);
}
