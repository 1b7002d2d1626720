#include "htp/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace htp {

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "cosine of vectors with dims " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    }
    double dot = 0.0;
    double uu = 0.0;
    double vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) throw Error(ErrorKind::ZeroNorm, "cosine of a zero-norm vector");
    return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
    return cosine_similarity(std::span<const double>(u.values), std::span<const double>(v.values));
}

Json to_json(const SimilarityRecord& record) {
    return Json{{"case_id", record.case_id},
                {"expert_label", record.expert_label},
                {"similarity", record.similarity},
                {"ai_text_ref", record.ai_text_ref},
                {"expert_text_ref", record.expert_text_ref}};
}

SimilarityRecord similarity_record_from_json(const Json& j) {
    SimilarityRecord r{j.at("case_id").get<std::string>(), j.at("expert_label").get<std::string>(),
                       j.at("similarity").get<double>(), j.value("ai_text_ref", ""), j.value("expert_text_ref", "")};
    if (!std::isfinite(r.similarity) || r.similarity < -1.0 || r.similarity > 1.0) {
        throw Error(ErrorKind::ValueOutOfRange, "similarity for " + r.case_id + " outside [-1, 1]");
    }
    return r;
}

Json to_json(const StatsRow& row) {
    return Json{{"group", row.group}, {"cases", row.cases}, {"mean", row.mean}, {"median", row.median},
                {"q1", row.q1},       {"q3", row.q3},       {"min", row.min},   {"max", row.max},
                {"sd", row.sd}};
}

StatsRow stats_row(std::string group, const Summary& s) {
    return StatsRow{std::move(group), s.count, s.mean, s.median, s.q1, s.q3, s.min, s.max, s.sd};
}

std::vector<StatsRow> group_statistics(std::span<const SimilarityRecord> records) {
    if (records.empty()) throw Error(ErrorKind::EmptyInput, "group statistics of no records");
    std::map<std::string, std::vector<double>> groups;
    std::vector<double> all;
    all.reserve(records.size());
    for (const auto& r : records) {
        groups[r.expert_label].push_back(r.similarity);
        all.push_back(r.similarity);
    }
    std::vector<StatsRow> rows;
    rows.reserve(groups.size() + 1);
    for (const auto& [label, values] : groups) rows.push_back(stats_row(label, summarize(values)));
    rows.push_back(stats_row(std::string(kOverallGroup), summarize(all)));
    return rows;
}

Aggregate aggregate_rows(std::span<const StatsRow> rows) {
    if (rows.empty()) throw Error(ErrorKind::EmptyInput, "aggregate of no rows");
    Aggregate agg;
    double weighted = 0.0;
    for (const auto& row : rows) {
        agg.total_cases += row.cases;
        weighted += static_cast<double>(row.cases) * row.mean;
    }
    if (agg.total_cases == 0) throw Error(ErrorKind::InvalidArgument, "aggregate over zero cases");
    agg.weighted_mean = weighted / static_cast<double>(agg.total_cases);
    return agg;
}

double threshold_share(std::span<const SimilarityRecord> records, double threshold) {
    std::vector<double> values;
    values.reserve(records.size());
    for (const auto& r : records) values.push_back(r.similarity);
    return threshold_share(std::span<const double>(values), threshold);
}

Json to_json(const CaseFailure& failure) {
    return Json{{"case_id", failure.case_id}, {"stage", failure.stage}, {"kind", failure.kind},
                {"message", failure.message}};
}

std::string ai_text_ref(const std::string& case_id) { return "eval/interpretations/" + case_id + ".json"; }

std::string expert_text_ref(const std::string& case_id) { return "cases/" + case_id + "/case.json#expert_text"; }

CorpusEvaluation evaluate_corpus(std::span<const CaseRecord> cases, const Backend& generator,
                                 const Backend& embedder, const PromptTemplate& prompt, int parallelism) {
    CorpusEvaluation result;
    std::vector<const CaseRecord*> eligible;
    std::vector<GenerateRequest> requests;
    for (const auto& c : cases) {
        if (!c.expert_text || trim(*c.expert_text).empty()) {
            result.errors.push_back({c.id.raw(), "input", std::string(to_string(ErrorKind::EmptyText)),
                                     "case has no expert interpretation text"});
            continue;
        }
        try {
            const auto text = prompt.render({{"case_id", c.id.raw()},
                                             {"age", std::to_string(c.id.age())},
                                             {"sex", std::string(to_string(c.id.sex()))},
                                             {"subject_note", c.subject_note}});
            requests.push_back(GenerateRequest::make(c.image, text, prompt.id));
            eligible.push_back(&c);
        } catch (const Error& e) {
            result.errors.push_back({c.id.raw(), "prompt", std::string(to_string(e.kind())), e.what()});
        }
    }

    const auto generated = run_batch(generator, requests, parallelism);

    std::vector<std::size_t> scored;  // indices into eligible
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        if (!generated[i]) {
            const auto& e = generated[i].error();
            result.errors.push_back({eligible[i]->id.raw(), "generate", std::string(to_string(e.kind())), e.what()});
            continue;
        }
        scored.push_back(i);
        texts.push_back(generated[i].value().text.text);
        texts.push_back(*eligible[i]->expert_text);
    }

    const auto embedded = run_embed_batch(embedder, texts, parallelism);

    for (std::size_t k = 0; k < scored.size(); ++k) {
        const CaseRecord& c = *eligible[scored[k]];
        const auto& ai = embedded[2 * k];
        const auto& expert = embedded[2 * k + 1];
        if (!ai || !expert) {
            const auto& e = !ai ? ai.error() : expert.error();
            result.errors.push_back({c.id.raw(), "embed", std::string(to_string(e.kind())), e.what()});
            continue;
        }
        try {
            const double sim = cosine_similarity(ai.value(), expert.value());
            result.records.push_back({c.id.raw(), c.expert_label.value_or(std::string(kUnlabeledGroup)), sim,
                                      ai_text_ref(c.id.raw()), expert_text_ref(c.id.raw())});
            result.ai_texts.emplace(c.id.raw(), generated[scored[k]].value().text);
        } catch (const Error& e) {
            result.errors.push_back({c.id.raw(), "similarity", std::string(to_string(e.kind())), e.what()});
        }
    }
    return result;
}

PlotData build_plot_data(std::span<const SimilarityRecord> records, double bin_width, double anchor,
                         int grid_points) {
    if (records.empty()) throw Error(ErrorKind::EmptyInput, "plot data of no records");
    std::map<std::string, std::vector<double>> groups;
    std::vector<double> all;
    for (const auto& r : records) {
        groups[r.expert_label].push_back(r.similarity);
        all.push_back(r.similarity);
    }
    groups.emplace(std::string(kOverallGroup), all);

    PlotData plots;
    plots.histogram = histogram(all, bin_width, anchor);
    for (const auto& [label, values] : groups) {
        plots.five_number.emplace(label, summarize(values));
        const std::set<double> distinct(values.begin(), values.end());
        if (distinct.size() < 2) {
            plots.density_skipped.push_back(label);
            continue;
        }
        plots.density.emplace(label, density_estimate(values, grid_points));
    }
    return plots;
}

Json histogram_json(const PlotData& plots) {
    Json bins = Json::array();
    for (const auto& b : plots.histogram) bins.push_back(to_json(b));
    return Json{{"bins", bins}};
}

Json box_json(const PlotData& plots) {
    Json groups = Json::array();
    for (const auto& [label, s] : plots.five_number) {
        groups.push_back(Json{{"group", label}, {"cases", s.count}, {"min", s.min}, {"q1", s.q1},
                              {"median", s.median}, {"q3", s.q3}, {"max", s.max}});
    }
    return Json{{"groups", groups}};
}

Json violin_json(const PlotData& plots) {
    Json groups = Json::array();
    for (const auto& [label, curve] : plots.density) {
        Json points = Json::array();
        for (const auto& p : curve) points.push_back(to_json(p));
        groups.push_back(Json{{"group", label}, {"curve", points}});
    }
    return Json{{"groups", groups}, {"skipped", plots.density_skipped}};
}

}  // namespace htp
