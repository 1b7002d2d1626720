#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "htp/case_model.hpp"
#include "htp/gateway.hpp"
#include "htp/prompts.hpp"
#include "htp/stats.hpp"

namespace htp {

/// dot(u, v) / (|u| |v|), clamped to [-1, 1]. Throws DimensionMismatch or
/// ZeroNorm.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

inline constexpr std::string_view kOverallGroup = "OVERALL";
inline constexpr std::string_view kUnlabeledGroup = "UNLABELED";

struct SimilarityRecord {
    std::string case_id;
    std::string expert_label;
    double similarity = 0.0;
    std::string ai_text_ref;
    std::string expert_text_ref;
};

Json to_json(const SimilarityRecord& record);
SimilarityRecord similarity_record_from_json(const Json& j);

struct StatsRow {
    std::string group;
    std::size_t cases = 0;
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
    double sd = 0.0;
};

Json to_json(const StatsRow& row);
StatsRow stats_row(std::string group, const Summary& summary);

/// One row per expert label (sorted by label) followed by the OVERALL row.
std::vector<StatsRow> group_statistics(std::span<const SimilarityRecord> records);

struct Aggregate {
    std::size_t total_cases = 0;
    double weighted_mean = 0.0;
};

/// Case-weighted pooling of group rows (OVERALL excluded by the caller).
Aggregate aggregate_rows(std::span<const StatsRow> rows);

double threshold_share(std::span<const SimilarityRecord> records, double threshold);

struct CaseFailure {
    std::string case_id;
    std::string stage;
    std::string kind;
    std::string message;
};

Json to_json(const CaseFailure& failure);

struct CorpusEvaluation {
    std::vector<SimilarityRecord> records;
    /// AI interpretation per successfully evaluated case, keyed by case id.
    std::map<std::string, InterpretationText> ai_texts;
    /// Cases that could not be scored; never silently dropped.
    std::vector<CaseFailure> errors;
};

/// Stored-text references recorded in SimilarityRecords.
std::string ai_text_ref(const std::string& case_id);
std::string expert_text_ref(const std::string& case_id);

/// Generates one interpretation per case with the shared prompt, embeds the
/// AI and expert texts and scores them. Backend calls fan out through
/// run_batch; the reduction into records is sequential and in case order.
CorpusEvaluation evaluate_corpus(std::span<const CaseRecord> cases, const Backend& generator,
                                 const Backend& embedder, const PromptTemplate& prompt, int parallelism);

struct PlotData {
    std::vector<HistogramBin> histogram;
    std::map<std::string, Summary> five_number;
    std::map<std::string, std::vector<DensityPoint>> density;
    /// Groups without a density curve (fewer than two distinct values).
    std::vector<std::string> density_skipped;
};

PlotData build_plot_data(std::span<const SimilarityRecord> records, double bin_width, double anchor,
                         int grid_points = 256);

Json histogram_json(const PlotData& plots);
Json box_json(const PlotData& plots);
Json violin_json(const PlotData& plots);

}  // namespace htp
