#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "htp/canonical_json.hpp"
#include "htp/case_model.hpp"
#include "htp/error.hpp"
#include "htp/gateway.hpp"
#include "htp/prompts.hpp"

namespace htp {

// --- interpretations ----------------------------------------------------------

struct InterpretationSlot {
    std::string backend;
    std::optional<InterpretationText> text;
    /// Set when the backend failed; the slot is then a labeled gap.
    std::optional<std::string> error_kind;
    std::optional<std::string> error_message;
};

struct FusionInterpretations {
    std::vector<InterpretationSlot> slots;  // backend order

    std::vector<InterpretationText> texts() const;
};

Json to_json(const FusionInterpretations& interpretations);

/// Interprets the drawing once per backend, concurrently. Needs at least three
/// distinct backends (PreconditionFailed) and `min_survivors` successful
/// replies (InsufficientInterpretations).
FusionInterpretations parallel_interpret(const CaseRecord& record,
                                         std::span<const std::shared_ptr<const Backend>> backends,
                                         const PromptTemplate& prompt, int min_survivors = 2, int parallelism = 4);

// --- viewpoints ---------------------------------------------------------------

inline constexpr std::array<std::string_view, 6> kViewpointDimensions = {
    "house", "tree", "person", "overall_layout", "stroke_features", "special_symbols_omissions",
};

enum class Stance { Positive, Concern, Neutral };

std::string_view to_string(Stance stance);

struct Viewpoint {
    std::string id;  // "<source_model>#<k>", k from 1
    std::string source_model;
    std::string dimension;
    std::string statement;
    Stance stance = Stance::Neutral;

    friend bool operator==(const Viewpoint&, const Viewpoint&) = default;
};

Json to_json(const Viewpoint& viewpoint);
/// Throws UnknownDimension, EmptyText or StructureViolation.
Viewpoint viewpoint_from_json(const Json& j);

/// Asks the extractor for {"viewpoints": [{dimension, statement, stance}]}.
std::vector<Viewpoint> extract_viewpoints(const InterpretationText& interpretation, const Backend& extractor,
                                          const PromptTemplate& prompt);

// --- classification -------------------------------------------------------------

enum class SupportTier { HighlyConsistent, PartiallySupported, Divergent };

std::string_view to_string(SupportTier tier);

struct ConsensusFinding {
    std::string id;  // C1, C2, ...
    std::string dimension;
    std::string merged_statement;
    std::vector<std::string> members;
    std::vector<std::string> sources;  // distinct source models
    std::size_t support = 0;
    Stance stance = Stance::Neutral;
};

struct UnverifiedFinding {
    std::string id;  // V1, V2, ...
    std::string viewpoint;
    std::string dimension;
    std::string statement;
    std::string source;
    Stance stance = Stance::Neutral;
};

struct ConflictSide {
    Stance stance = Stance::Neutral;
    std::vector<std::string> members;
};

struct ConflictFinding {
    std::string id;  // X1, X2, ...
    std::string dimension;
    /// Positive side, concern side, then neutral members when present.
    std::vector<ConflictSide> sides;
    std::vector<std::string> sources;
    std::string summary;
};

struct ClassifiedViewpoints {
    double tau = 0.8;
    std::vector<Viewpoint> viewpoints;  // normalized order
    /// Member ids of every similarity cluster.
    std::vector<std::vector<std::string>> clusters;
    std::vector<ConsensusFinding> consensus;
    std::vector<UnverifiedFinding> to_be_verified;
    std::vector<ConflictFinding> conflicts;

    bool contains(const std::string& finding_id) const;
    /// Tier implied by the bucket holding `finding_id`.
    std::optional<SupportTier> tier_of(const std::string& finding_id) const;
    const Viewpoint* viewpoint(const std::string& id) const;
};

Json to_json(const ClassifiedViewpoints& classified);

inline constexpr double kDefaultTau = 0.8;

/// Single-linkage clustering per dimension on statement embeddings with
/// cosine >= tau. Clusters holding both positive and concern stances become
/// conflicts; clusters spanning two or more models become consensus; the
/// members of any other cluster are individually to be verified. The result
/// does not depend on input order.
ClassifiedViewpoints classify_viewpoints(std::span<const Viewpoint> viewpoints, const Backend& embedder,
                                         double tau = kDefaultTau);

// --- risk -----------------------------------------------------------------------

inline constexpr std::array<std::string_view, 5> kRiskFocuses = {
    "emotional_distress", "self_perception", "interpersonal_difficulties", "developmental_concerns", "red_flags",
};

enum class Severity { Watch, Elevated, Urgent };

std::string_view to_string(Severity severity);

struct RiskRule {
    std::string focus;
    std::vector<std::string> keywords;  // case-insensitive substrings
    /// Only consensus findings may raise a red flag; the justification is
    /// recorded with the entry.
    bool red_flag = false;
    std::string justification;
};

struct RiskRules {
    std::vector<RiskRule> keyword_rules;
    /// Focus used when no keyword rule matches.
    std::map<std::string, std::string> dimension_defaults;
};

RiskRules default_risk_rules();
/// Throws Config for unknown focuses or dimensions.
RiskRules risk_rules_from_json(const Json& j);
Json to_json(const RiskRules& rules);

struct RiskEntry {
    std::string finding_ref;
    Severity severity = Severity::Watch;
    SupportTier support_tier = SupportTier::PartiallySupported;
    std::string justification;
};

struct RiskAssessment {
    std::map<std::string, std::vector<RiskEntry>> entries;  // every focus present

    bool empty() const;
    const std::vector<RiskEntry>& red_flags() const { return entries.at("red_flags"); }
};

Json to_json(const RiskAssessment& risk);

/// Routes concern-stance findings to focuses. Consensus concerns are
/// elevated; single-source and conflicting concerns are watched.
RiskAssessment assess_risk(const ClassifiedViewpoints& classified, const RiskRules& rules = default_risk_rules());

// --- report -----------------------------------------------------------------------

inline constexpr std::array<std::string_view, 5> kReportSections = {
    "executive_summary", "detailed_analysis", "priority_concerns_and_warnings", "support_recommendations",
    "limitations",
};

/// Human-readable heading for a section name.
std::string_view section_title(std::string_view section);

inline constexpr std::string_view kProfessionalAttention = "requires professional attention";

struct FindingRef {
    std::string id;
    std::string dimension;
    std::string statement;
    SupportTier support_tier = SupportTier::PartiallySupported;
    std::vector<std::string> sources;     // source models
    std::vector<std::string> viewpoints;  // viewpoint ids
};

struct ReportSection {
    std::string name;
    std::string text;
    std::vector<FindingRef> findings;
};

struct IntegratedReport {
    std::string case_id;
    std::vector<ReportSection> sections;  // fixed order
    std::vector<std::string> immediate;   // support recommendations
    std::vector<std::string> long_term;
    std::vector<std::string> red_flags;  // finding ids

    const ReportSection* section(std::string_view name) const;
    ReportSection* section(std::string_view name);
};

Json to_json(const IntegratedReport& report);

/// Reference to `finding_id` with tier and citations taken from the classification.
FindingRef finding_ref(const ClassifiedViewpoints& classified, const std::string& finding_id);

/// The merger drafts prose per section and may only cite classified finding
/// ids (UnknownFinding otherwise). Finding references, tiers and citations are
/// attached from the classification and risk assessment.
IntegratedReport synthesize_report(const std::string& case_id, const ClassifiedViewpoints& classified,
                                   const RiskAssessment& risk, const Backend& merger, const PromptTemplate& prompt);

struct PrincipleResult {
    std::string principle;
    bool passed = true;
    std::vector<std::string> violations;
};

struct Compliance {
    std::vector<PrincipleResult> results;  // Directness, Evidence, Caution, Practicality

    bool passed() const;
    const PrincipleResult& get(std::string_view principle) const;
};

Json to_json(const Compliance& compliance);

Compliance check_principles(const IntegratedReport& report, const ClassifiedViewpoints& classified);

/// Empty when the report has exactly the five sections in order, each with
/// non-blank text.
std::vector<std::string> structure_violations(const IntegratedReport& report);

std::string render_report_text(const IntegratedReport& report);

// --- end to end ---------------------------------------------------------------------

struct FusionBackends {
    std::vector<std::shared_ptr<const Backend>> interpreters;
    std::shared_ptr<const Backend> extractor;
    std::shared_ptr<const Backend> embedder;
    std::shared_ptr<const Backend> merger;
};

struct FusionConfig {
    double tau = kDefaultTau;
    int min_survivors = 2;
    int parallelism = 4;
    RiskRules risk_rules = default_risk_rules();
    std::string interpret_prompt = "fusion_interpret_v1";
    std::string extract_prompt = "fusion_extract_v1";
    std::string merge_prompt = "fusion_merge_v1";
};

struct FusionRun {
    FusionInterpretations interpretations;
    std::vector<Viewpoint> viewpoints;
    ClassifiedViewpoints classified;
    RiskAssessment risk;
    IntegratedReport report;
    Compliance compliance;
};

FusionRun run_fusion(const CaseRecord& record, const FusionBackends& backends, const PromptLibrary& prompts,
                     const FusionConfig& config);

}  // namespace htp
