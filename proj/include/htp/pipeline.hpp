#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "htp/canonical_json.hpp"
#include "htp/case_model.hpp"
#include "htp/error.hpp"
#include "htp/gateway.hpp"
#include "htp/prompts.hpp"
#include "htp/schema.hpp"

namespace htp {

/// Stage names in execution order.
inline constexpr std::array<std::string_view, 4> kStages = {"observer", "interpreter", "zeitgeist", "listener"};

struct ObservationRecord {
    std::string case_id;
    std::string schema_version;
    Json values = Json::object();  // leaf path -> typed value
    std::string source;
    std::string prompt_id;
};

enum class Confidence { Low, Medium, High };

std::string_view to_string(Confidence confidence);

struct EvidenceChain {
    std::string claim;
    std::vector<std::string> observations;  // leaf paths
    std::string theory_basis;
    Confidence confidence = Confidence::Medium;
};

struct DefenceMechanism {
    std::string tag;
    std::string note;
};

struct InterpretationDossier {
    std::string case_id;
    std::vector<EvidenceChain> strengths;
    std::vector<EvidenceChain> growth_areas;
    std::vector<DefenceMechanism> defence_mechanisms;
    RadarScores radar;
    std::string source;
    std::string prompt_id;
};

struct ContextFinding {
    std::string observation;
    std::string societal_frame;
    std::string source_note;
};

struct ContextBrief {
    std::string case_id;
    std::vector<ContextFinding> contextual_findings;
    std::string destigmatising_note;
    std::string source;
    std::string prompt_id;
};

struct GoalHorizons {
    std::vector<std::string> short_term;
    std::vector<std::string> medium_term;
    std::vector<std::string> long_term;
    /// Horizons deliberately left empty.
    std::vector<std::string> flagged_empty;
};

struct EmpathicReport {
    std::string case_id;
    std::string strengths_first_narrative;
    std::vector<std::string> actions;
    GoalHorizons goals;
    std::string support_network_note;
    std::string source;
    std::string prompt_id;
};

// Stage payloads are the backend-facing JSON shapes (no case metadata). The
// *_from_payload functions parse and enforce each stage's output invariants.

Json payload_json(const ObservationRecord& record);
Json payload_json(const InterpretationDossier& dossier);
Json payload_json(const ContextBrief& brief);
Json payload_json(const EmpathicReport& report);

/// Accepts {"values": {...}} or a flat path -> value object. Throws
/// SchemaViolation listing every offending path.
ObservationRecord observation_from_payload(const Json& payload, const std::string& case_id,
                                           const ObservationSchema& schema, std::string source,
                                           std::string prompt_id);
/// Throws StructureViolation, DanglingEvidence or a radar error.
InterpretationDossier dossier_from_payload(const Json& payload, const ObservationRecord& observation,
                                           std::string source, std::string prompt_id);
/// Throws MissingSourceNote or StructureViolation.
ContextBrief context_from_payload(const Json& payload, const std::string& case_id, std::string source,
                                  std::string prompt_id);
/// Throws StructureViolation.
EmpathicReport report_from_payload(const Json& payload, const std::string& case_id, std::string source,
                                   std::string prompt_id);

// Persisted forms carry case_id, source and prompt_id. The report body is an
// ordered array so the narrative precedes the actions.
Json to_json(const ObservationRecord& record);
Json to_json(const EvidenceChain& chain);
Json to_json(const InterpretationDossier& dossier);
Json to_json(const ContextBrief& brief);
Json to_json(const EmpathicReport& report);

/// Parses a backend reply as a JSON object, tolerating a surrounding
/// markdown code fence. Throws BadResponse.
Json parse_reply(const std::string& text, const std::string& stage);

// Stage requests. Only the observer request carries the image.
GenerateRequest observer_request(const CaseRecord& record, const ObservationSchema& schema,
                                 const PromptTemplate& prompt);
GenerateRequest interpreter_request(const ObservationRecord& observation, const PromptTemplate& prompt);
GenerateRequest zeitgeist_request(const InterpretationDossier& dossier, const std::string& subject_note,
                                  const PromptTemplate& prompt);
GenerateRequest listener_request(const InterpretationDossier& dossier, const ContextBrief& context,
                                 const PromptTemplate& prompt);

ObservationRecord run_observer(const CaseRecord& record, const Backend& backend, const ObservationSchema& schema,
                               const PromptTemplate& prompt);
InterpretationDossier run_interpreter(const ObservationRecord& observation, const Backend& backend,
                                      const PromptTemplate& prompt);
ContextBrief run_zeitgeist(const InterpretationDossier& dossier, const std::string& subject_note,
                           const Backend& backend, const PromptTemplate& prompt);
EmpathicReport run_listener(const InterpretationDossier& dossier, const ContextBrief& context,
                            const Backend& backend, const PromptTemplate& prompt);

// --- critique ---------------------------------------------------------------

struct CritiqueEntry {
    int round = 0;
    std::string stage;
    std::string reviewer;
    std::string critique;
    /// sha256 of the canonical revision, empty when none was proposed.
    std::string revision_ref;
    /// approved | accepted | rejected | reviewer_error
    std::string outcome;
};

Json to_json(const CritiqueEntry& entry);

struct CritiqueResult {
    Json output;
    std::vector<CritiqueEntry> transcript;
};

/// Normalizes a proposed revision or throws when it breaks the stage's
/// output invariants.
using RevisionGate = std::function<Json(const Json&)>;

/// Up to `max_rounds` review/revise cycles. The reviewer replies with
/// {"verdict": "approve"|"revise", "critique": ..., "revision": {...}}.
/// Approval ends the loop; a revision failing the gate is rejected and the
/// prior version kept; a reviewer failure keeps the prior version and ends
/// the loop.
CritiqueResult critique_round(const std::string& stage, Json output, const Backend& reviewer, int max_rounds,
                              const PromptTemplate& prompt, const RevisionGate& gate);

// --- pipeline ---------------------------------------------------------------

struct AssessmentBundle {
    ObservationRecord observation;
    InterpretationDossier dossier;
    ContextBrief context;
    EmpathicReport report;
    std::vector<CritiqueEntry> critique_transcript;
};

Json to_json(const AssessmentBundle& bundle);

struct StageBackends {
    std::shared_ptr<const Backend> observer;
    std::shared_ptr<const Backend> interpreter;
    std::shared_ptr<const Backend> zeitgeist;
    std::shared_ptr<const Backend> listener;
};

struct PipelineConfig {
    int max_critique_rounds = 1;
    std::string observer_prompt = "observer_v1";
    std::string interpreter_prompt = "interpreter_v1";
    std::string zeitgeist_prompt = "zeitgeist_v1";
    std::string listener_prompt = "listener_v1";
    std::string critique_prompt = "critique_v1";
};

struct PipelineRun {
    std::string case_id;
    /// Persisted form of every completed stage, keyed by stage name.
    std::map<std::string, Json> outputs;
    std::optional<AssessmentBundle> bundle;
    std::optional<std::string> failed_at;
    std::optional<Error> error;
    std::vector<CritiqueEntry> transcript;
};

/// {case_id, completed, failed_at, error: {kind, message}} for a failed run.
Json partial_json(const PipelineRun& run);

/// Runs Observer -> Interpreter -> Zeitgeist -> Listener. Each stage output
/// is reviewed by the next stage's backend; the listener output is final.
/// The first failing stage stops the run with earlier outputs retained.
PipelineRun run_pipeline(const CaseRecord& record, const StageBackends& backends, const ObservationSchema& schema,
                         const PromptLibrary& prompts, const PipelineConfig& config);

// Deterministic formatters.
Json radar_json(const InterpretationDossier& dossier);
std::string render_report_text(const AssessmentBundle& bundle);

}  // namespace htp
