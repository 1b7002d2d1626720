#include "htp/pipeline.hpp"

#include <set>
#include <sstream>

namespace htp {
namespace {

std::map<std::string, std::string> case_vars(const std::string& case_id) {
    const auto id = parse_case_id(case_id);
    return {{"case_id", id.raw()}, {"age", std::to_string(id.age())}, {"sex", std::string(to_string(id.sex()))}};
}

std::string pretty(const Json& j) { return canonical_dump(j, true); }

[[noreturn]] void structure(const std::string& what) { throw Error(ErrorKind::StructureViolation, what); }

const Json& field(const Json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) structure(where + ": missing '" + key + "'");
    return obj.at(key);
}

std::string text_field(const Json& obj, const char* key, const std::string& where, bool allow_empty = false) {
    const Json& v = field(obj, key, where);
    if (!v.is_string()) structure(where + ": '" + key + "' must be a string");
    auto s = v.get<std::string>();
    if (!allow_empty && trim(s).empty()) structure(where + ": '" + key + "' is empty");
    return s;
}

std::vector<std::string> text_list(const Json& obj, const char* key, const std::string& where) {
    const Json& v = field(obj, key, where);
    if (!v.is_array()) structure(where + ": '" + key + "' must be a list");
    std::vector<std::string> out;
    for (const auto& item : v) {
        if (!item.is_string() || trim(item.get<std::string>()).empty()) {
            structure(where + ": '" + key + "' holds a blank or non-text item");
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

Confidence confidence_from(const std::string& s, const std::string& where) {
    if (s == "low") return Confidence::Low;
    if (s == "medium") return Confidence::Medium;
    if (s == "high") return Confidence::High;
    structure(where + ": confidence '" + s + "' is not low, medium or high");
}

std::vector<EvidenceChain> chains(const Json& payload, const char* key, const ObservationRecord& observation) {
    std::vector<EvidenceChain> out;
    const Json& list = field(payload, key, "dossier");
    if (!list.is_array()) structure(std::string("dossier: '") + key + "' must be a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = std::string("dossier.") + key + "[" + std::to_string(i) + "]";
        EvidenceChain chain;
        chain.claim = text_field(list[i], "claim", where);
        chain.observations = text_list(list[i], "observations", where);
        if (chain.observations.empty()) structure(where + ": evidence chain cites no observations");
        for (const auto& path : chain.observations) {
            if (!observation.values.contains(path)) {
                throw Error(ErrorKind::DanglingEvidence,
                            where + " cites " + path + ", which the observation record does not contain");
            }
        }
        chain.theory_basis = text_field(list[i], "theory_basis", where);
        chain.confidence = confidence_from(text_field(list[i], "confidence", where), where);
        out.push_back(std::move(chain));
    }
    return out;
}

Json chains_json(const std::vector<EvidenceChain>& list) {
    Json out = Json::array();
    for (const auto& c : list) out.push_back(to_json(c));
    return out;
}

void require_kind(const Backend& backend) {
    if (!backend.supports(BackendKind::Generate)) {
        throw Error(ErrorKind::WrongBackendKind, "backend " + backend.name() + " cannot generate text");
    }
}

Json ask(const Backend& backend, const GenerateRequest& request, const std::string& stage) {
    require_kind(backend);
    const auto reply = generate_interpretation(backend, request);
    return parse_reply(reply.text.text, stage);
}

}  // namespace

std::string_view to_string(Confidence confidence) {
    switch (confidence) {
        case Confidence::Low: return "low";
        case Confidence::Medium: return "medium";
        case Confidence::High: return "high";
    }
    return "medium";
}

// --- payloads ---------------------------------------------------------------

Json payload_json(const ObservationRecord& record) { return Json{{"values", record.values}}; }

Json payload_json(const InterpretationDossier& d) {
    Json defences = Json::array();
    for (const auto& m : d.defence_mechanisms) defences.push_back(Json{{"tag", m.tag}, {"note", m.note}});
    return Json{{"strengths", chains_json(d.strengths)},
                {"growth_areas", chains_json(d.growth_areas)},
                {"defence_mechanisms", defences},
                {"radar", to_json(d.radar)}};
}

Json payload_json(const ContextBrief& b) {
    Json findings = Json::array();
    for (const auto& f : b.contextual_findings) {
        findings.push_back(
            Json{{"observation", f.observation}, {"societal_frame", f.societal_frame}, {"source_note", f.source_note}});
    }
    return Json{{"contextual_findings", findings}, {"destigmatising_note", b.destigmatising_note}};
}

Json payload_json(const EmpathicReport& r) {
    return Json{{"strengths_first_narrative", r.strengths_first_narrative},
                {"actions", r.actions},
                {"goals", Json{{"short_term", r.goals.short_term},
                               {"medium_term", r.goals.medium_term},
                               {"long_term", r.goals.long_term},
                               {"flagged_empty", r.goals.flagged_empty}}},
                {"support_network_note", r.support_network_note}};
}

ObservationRecord observation_from_payload(const Json& payload, const std::string& case_id,
                                           const ObservationSchema& schema, std::string source,
                                           std::string prompt_id) {
    if (!payload.is_object()) throw Error(ErrorKind::SchemaViolation, "observation payload must be an object");
    const Json& values = payload.contains("values") && payload.at("values").is_object() ? payload.at("values") : payload;
    const auto violations = validate_observation(values, schema);
    if (!violations.empty()) {
        throw Error(ErrorKind::SchemaViolation, "observation for " + case_id + " violates schema " +
                                                    schema.version() + ": " + describe(violations));
    }
    return ObservationRecord{case_id, schema.version(), values, std::move(source), std::move(prompt_id)};
}

InterpretationDossier dossier_from_payload(const Json& payload, const ObservationRecord& observation,
                                           std::string source, std::string prompt_id) {
    if (!payload.is_object()) structure("dossier payload must be an object");
    InterpretationDossier d;
    d.case_id = observation.case_id;
    d.strengths = chains(payload, "strengths", observation);
    d.growth_areas = chains(payload, "growth_areas", observation);
    if (d.strengths.empty() && d.growth_areas.empty()) structure("dossier has neither strengths nor growth areas");
    if (payload.contains("defence_mechanisms")) {
        const Json& list = payload.at("defence_mechanisms");
        if (!list.is_array()) structure("dossier: 'defence_mechanisms' must be a list");
        for (const auto& m : list) {
            d.defence_mechanisms.push_back(
                DefenceMechanism{text_field(m, "tag", "defence mechanism"), m.value("note", std::string())});
        }
    }
    d.radar = validate_radar(field(payload, "radar", "dossier"));
    d.source = std::move(source);
    d.prompt_id = std::move(prompt_id);
    return d;
}

ContextBrief context_from_payload(const Json& payload, const std::string& case_id, std::string source,
                                  std::string prompt_id) {
    if (!payload.is_object()) structure("context payload must be an object");
    ContextBrief b;
    b.case_id = case_id;
    const Json& list = field(payload, "contextual_findings", "context");
    if (!list.is_array()) structure("context: 'contextual_findings' must be a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = "context.contextual_findings[" + std::to_string(i) + "]";
        ContextFinding f;
        f.observation = text_field(list[i], "observation", where);
        f.societal_frame = text_field(list[i], "societal_frame", where);
        const Json note = list[i].is_object() ? list[i].value("source_note", Json()) : Json();
        if (!note.is_string() || trim(note.get<std::string>()).empty()) {
            throw Error(ErrorKind::MissingSourceNote, where + " has no source note");
        }
        f.source_note = note.get<std::string>();
        b.contextual_findings.push_back(std::move(f));
    }
    b.destigmatising_note = text_field(payload, "destigmatising_note", "context");
    b.source = std::move(source);
    b.prompt_id = std::move(prompt_id);
    return b;
}

EmpathicReport report_from_payload(const Json& payload, const std::string& case_id, std::string source,
                                   std::string prompt_id) {
    if (!payload.is_object()) structure("report payload must be an object");
    EmpathicReport r;
    r.case_id = case_id;
    r.strengths_first_narrative = text_field(payload, "strengths_first_narrative", "report");
    r.actions = text_list(payload, "actions", "report");
    const Json& goals = field(payload, "goals", "report");
    r.goals.short_term = text_list(goals, "short_term", "report.goals");
    r.goals.medium_term = text_list(goals, "medium_term", "report.goals");
    r.goals.long_term = text_list(goals, "long_term", "report.goals");
    if (goals.contains("flagged_empty")) r.goals.flagged_empty = text_list(goals, "flagged_empty", "report.goals");
    const std::set<std::string> flagged(r.goals.flagged_empty.begin(), r.goals.flagged_empty.end());
    const std::pair<const char*, const std::vector<std::string>*> horizons[] = {
        {"short_term", &r.goals.short_term}, {"medium_term", &r.goals.medium_term}, {"long_term", &r.goals.long_term}};
    for (const auto& [name, list] : horizons) {
        if (list->empty() && !flagged.contains(name)) {
            structure(std::string("report.goals: '") + name + "' is empty without being flagged");
        }
    }
    for (const auto& name : flagged) {
        if (name != "short_term" && name != "medium_term" && name != "long_term") {
            structure("report.goals: unknown horizon '" + name + "' flagged empty");
        }
    }
    r.support_network_note = text_field(payload, "support_network_note", "report", true);
    r.source = std::move(source);
    r.prompt_id = std::move(prompt_id);
    return r;
}

// --- persisted forms --------------------------------------------------------

Json to_json(const ObservationRecord& r) {
    return Json{{"case_id", r.case_id}, {"schema_version", r.schema_version}, {"values", r.values},
                {"source", r.source},   {"prompt_id", r.prompt_id}};
}

Json to_json(const EvidenceChain& c) {
    return Json{{"claim", c.claim},
                {"observations", c.observations},
                {"theory_basis", c.theory_basis},
                {"confidence", std::string(to_string(c.confidence))}};
}

Json to_json(const InterpretationDossier& d) {
    Json j = payload_json(d);
    j["case_id"] = d.case_id;
    j["source"] = d.source;
    j["prompt_id"] = d.prompt_id;
    return j;
}

Json to_json(const ContextBrief& b) {
    Json j = payload_json(b);
    j["case_id"] = b.case_id;
    j["source"] = b.source;
    j["prompt_id"] = b.prompt_id;
    return j;
}

Json to_json(const EmpathicReport& r) {
    Json body = Json::array();
    body.push_back(Json{{"section", "strengths_first_narrative"}, {"text", r.strengths_first_narrative}});
    body.push_back(Json{{"section", "actions"}, {"items", r.actions}});
    body.push_back(Json{{"section", "goals"},
                        {"short_term", r.goals.short_term},
                        {"medium_term", r.goals.medium_term},
                        {"long_term", r.goals.long_term},
                        {"flagged_empty", r.goals.flagged_empty}});
    body.push_back(Json{{"section", "support_network_note"}, {"text", r.support_network_note}});
    return Json{{"case_id", r.case_id}, {"body", body}, {"source", r.source}, {"prompt_id", r.prompt_id}};
}

Json parse_reply(const std::string& text, const std::string& stage) {
    std::string body = trim(text);
    if (body.starts_with("```")) {
        const auto first_newline = body.find('\n');
        const auto closing = body.rfind("```");
        if (first_newline != std::string::npos && closing > first_newline) {
            body = body.substr(first_newline + 1, closing - first_newline - 1);
        }
    }
    try {
        Json j = Json::parse(body);
        if (!j.is_object()) throw Error(ErrorKind::BadResponse, stage + " reply is not a JSON object");
        return j;
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::BadResponse, stage + " reply is not JSON: " + e.what());
    }
}

// --- stage requests ---------------------------------------------------------

GenerateRequest observer_request(const CaseRecord& record, const ObservationSchema& schema,
                                 const PromptTemplate& prompt) {
    std::ostringstream leaves;
    for (const auto& leaf : schema.leaves()) {
        leaves << leaf.path << ": " << to_string(leaf.type);
        if (leaf.type == LeafType::Enum) {
            leaves << " [";
            for (std::size_t i = 0; i < leaf.values.size(); ++i) leaves << (i ? "|" : "") << leaf.values[i];
            leaves << "]";
        }
        if (leaf.type == LeafType::Number && !leaf.unit.empty()) leaves << " (" << leaf.unit << ")";
        leaves << "\n";
    }
    auto vars = case_vars(record.id.raw());
    vars["subject_note"] = record.subject_note;
    vars["schema_version"] = schema.version();
    vars["schema_leaves"] = leaves.str();
    return GenerateRequest::make(record.image, prompt.render(vars), prompt.id);
}

GenerateRequest interpreter_request(const ObservationRecord& observation, const PromptTemplate& prompt) {
    auto vars = case_vars(observation.case_id);
    vars["observation_json"] = pretty(payload_json(observation));
    return GenerateRequest::make(std::nullopt, prompt.render(vars), prompt.id);
}

GenerateRequest zeitgeist_request(const InterpretationDossier& dossier, const std::string& subject_note,
                                  const PromptTemplate& prompt) {
    auto vars = case_vars(dossier.case_id);
    vars["subject_note"] = subject_note;
    vars["dossier_json"] = pretty(payload_json(dossier));
    return GenerateRequest::make(std::nullopt, prompt.render(vars), prompt.id);
}

GenerateRequest listener_request(const InterpretationDossier& dossier, const ContextBrief& context,
                                 const PromptTemplate& prompt) {
    auto vars = case_vars(dossier.case_id);
    vars["dossier_json"] = pretty(payload_json(dossier));
    vars["context_json"] = pretty(payload_json(context));
    return GenerateRequest::make(std::nullopt, prompt.render(vars), prompt.id);
}

ObservationRecord run_observer(const CaseRecord& record, const Backend& backend, const ObservationSchema& schema,
                               const PromptTemplate& prompt) {
    const Json reply = ask(backend, observer_request(record, schema, prompt), "observer");
    return observation_from_payload(reply, record.id.raw(), schema, backend.name(), prompt.id);
}

InterpretationDossier run_interpreter(const ObservationRecord& observation, const Backend& backend,
                                      const PromptTemplate& prompt) {
    const Json reply = ask(backend, interpreter_request(observation, prompt), "interpreter");
    return dossier_from_payload(reply, observation, backend.name(), prompt.id);
}

ContextBrief run_zeitgeist(const InterpretationDossier& dossier, const std::string& subject_note,
                           const Backend& backend, const PromptTemplate& prompt) {
    const Json reply = ask(backend, zeitgeist_request(dossier, subject_note, prompt), "zeitgeist");
    return context_from_payload(reply, dossier.case_id, backend.name(), prompt.id);
}

EmpathicReport run_listener(const InterpretationDossier& dossier, const ContextBrief& context,
                            const Backend& backend, const PromptTemplate& prompt) {
    const Json reply = ask(backend, listener_request(dossier, context, prompt), "listener");
    return report_from_payload(reply, dossier.case_id, backend.name(), prompt.id);
}

// --- critique ---------------------------------------------------------------

Json to_json(const CritiqueEntry& e) {
    return Json{{"round", e.round},       {"stage", e.stage},
                {"reviewer", e.reviewer}, {"critique", e.critique},
                {"revision_ref", e.revision_ref.empty() ? Json() : Json(e.revision_ref)},
                {"outcome", e.outcome}};
}

CritiqueResult critique_round(const std::string& stage, Json output, const Backend& reviewer, int max_rounds,
                              const PromptTemplate& prompt, const RevisionGate& gate) {
    if (max_rounds < 0) throw Error(ErrorKind::InvalidArgument, "max_rounds must be >= 0");
    CritiqueResult result{std::move(output), {}};
    for (int round = 1; round <= max_rounds; ++round) {
        CritiqueEntry entry{round, stage, reviewer.name(), "", "", ""};
        Json reply;
        try {
            const auto request = GenerateRequest::make(
                std::nullopt, prompt.render({{"stage", stage}, {"output_json", pretty(result.output)}}), prompt.id);
            reply = ask(reviewer, request, "critique");
        } catch (const Error& e) {
            entry.critique = e.what();
            entry.outcome = "reviewer_error";
            result.transcript.push_back(std::move(entry));
            break;
        }
        entry.critique = reply.value("critique", Json("")).is_string() ? reply.value("critique", "") : "";
        const std::string verdict = reply.value("verdict", Json("")).is_string() ? reply.value("verdict", "") : "";
        if (verdict == "approve") {
            entry.outcome = "approved";
            result.transcript.push_back(std::move(entry));
            break;
        }
        if (verdict != "revise" || !reply.contains("revision")) {
            entry.critique = "reviewer reply has no usable verdict";
            entry.outcome = "reviewer_error";
            result.transcript.push_back(std::move(entry));
            break;
        }
        const Json& revision = reply.at("revision");
        entry.revision_ref = sha256_hex(canonical_dump(revision));
        try {
            result.output = gate(revision);
            entry.outcome = "accepted";
        } catch (const Error& e) {
            entry.outcome = "rejected";
            entry.critique += entry.critique.empty() ? "" : "\n";
            entry.critique += std::string("revision rejected: ") + e.what();
        }
        result.transcript.push_back(std::move(entry));
    }
    return result;
}

// --- pipeline ---------------------------------------------------------------

Json to_json(const AssessmentBundle& b) {
    Json transcript = Json::array();
    for (const auto& e : b.critique_transcript) transcript.push_back(to_json(e));
    return Json{{"case_id", b.observation.case_id},
                {"observation", to_json(b.observation)},
                {"dossier", to_json(b.dossier)},
                {"context", to_json(b.context)},
                {"report", to_json(b.report)},
                {"critique_transcript", transcript}};
}

Json partial_json(const PipelineRun& run) {
    Json completed = Json::array();
    for (auto stage : kStages) {
        if (run.outputs.contains(std::string(stage))) completed.push_back(std::string(stage));
    }
    Json j{{"case_id", run.case_id}, {"completed", completed}, {"failed_at", run.failed_at ? Json(*run.failed_at) : Json()}};
    if (run.error) {
        j["error"] = Json{{"kind", std::string(to_string(run.error->kind()))}, {"message", run.error->what()}};
    }
    return j;
}

PipelineRun run_pipeline(const CaseRecord& record, const StageBackends& backends, const ObservationSchema& schema,
                         const PromptLibrary& prompts, const PipelineConfig& config) {
    if (!backends.observer || !backends.interpreter || !backends.zeitgeist || !backends.listener) {
        throw Error(ErrorKind::Config, "all four stage backends must be configured");
    }
    if (config.max_critique_rounds < 0) throw Error(ErrorKind::Config, "max_critique_rounds must be >= 0");
    const auto& critique = prompts.get(config.critique_prompt);
    const std::string case_id = record.id.raw();

    PipelineRun run;
    run.case_id = case_id;
    std::string stage;
    try {
        stage = "observer";
        auto observation = run_observer(record, *backends.observer, schema, prompts.get(config.observer_prompt));
        {
            auto reviewed = critique_round(stage, payload_json(observation), *backends.interpreter,
                                           config.max_critique_rounds, critique, [&](const Json& r) {
                                               return payload_json(observation_from_payload(
                                                   r, case_id, schema, observation.source, observation.prompt_id));
                                           });
            observation = observation_from_payload(reviewed.output, case_id, schema, observation.source,
                                                   observation.prompt_id);
            run.transcript.insert(run.transcript.end(), reviewed.transcript.begin(), reviewed.transcript.end());
        }
        run.outputs[stage] = to_json(observation);

        stage = "interpreter";
        auto dossier = run_interpreter(observation, *backends.interpreter, prompts.get(config.interpreter_prompt));
        {
            auto reviewed = critique_round(stage, payload_json(dossier), *backends.zeitgeist,
                                           config.max_critique_rounds, critique, [&](const Json& r) {
                                               return payload_json(
                                                   dossier_from_payload(r, observation, dossier.source, dossier.prompt_id));
                                           });
            dossier = dossier_from_payload(reviewed.output, observation, dossier.source, dossier.prompt_id);
            run.transcript.insert(run.transcript.end(), reviewed.transcript.begin(), reviewed.transcript.end());
        }
        run.outputs[stage] = to_json(dossier);

        stage = "zeitgeist";
        auto context = run_zeitgeist(dossier, record.subject_note, *backends.zeitgeist,
                                     prompts.get(config.zeitgeist_prompt));
        {
            auto reviewed = critique_round(stage, payload_json(context), *backends.listener,
                                           config.max_critique_rounds, critique, [&](const Json& r) {
                                               return payload_json(
                                                   context_from_payload(r, case_id, context.source, context.prompt_id));
                                           });
            context = context_from_payload(reviewed.output, case_id, context.source, context.prompt_id);
            run.transcript.insert(run.transcript.end(), reviewed.transcript.begin(), reviewed.transcript.end());
        }
        run.outputs[stage] = to_json(context);

        stage = "listener";
        auto report = run_listener(dossier, context, *backends.listener, prompts.get(config.listener_prompt));
        run.outputs[stage] = to_json(report);

        run.bundle = AssessmentBundle{std::move(observation), std::move(dossier), std::move(context),
                                      std::move(report), run.transcript};
    } catch (const Error& e) {
        run.failed_at = stage;
        run.error = e;
    }
    return run;
}

Json radar_json(const InterpretationDossier& dossier) {
    return Json{{"case_id", dossier.case_id},
                {"scale", Json{{"min", 0}, {"max", 100}}},
                {"dimensions", to_json(dossier.radar)}};
}

std::string render_report_text(const AssessmentBundle& bundle) {
    const auto& r = bundle.report;
    std::ostringstream out;
    out << "Assessment report for " << r.case_id << "\n\n";
    out << r.strengths_first_narrative << "\n\n";
    out << "Radar profile\n";
    const auto values = bundle.dossier.radar.values();
    for (std::size_t i = 0; i < kRadarDimensions.size(); ++i) {
        out << "  " << kRadarDimensions[i] << ": " << values[i] << "\n";
    }
    out << "\nActions\n";
    for (const auto& a : r.actions) out << "  - " << a << "\n";
    const std::pair<const char*, const std::vector<std::string>*> horizons[] = {
        {"Short-term goals", &r.goals.short_term},
        {"Medium-term goals", &r.goals.medium_term},
        {"Long-term goals", &r.goals.long_term}};
    for (const auto& [title, list] : horizons) {
        out << "\n" << title << "\n";
        if (list->empty()) out << "  (none set)\n";
        for (const auto& g : *list) out << "  - " << g << "\n";
    }
    if (!r.support_network_note.empty()) out << "\nSupport network\n  " << r.support_network_note << "\n";
    if (!bundle.context.contextual_findings.empty()) {
        out << "\nContext\n";
        for (const auto& f : bundle.context.contextual_findings) {
            out << "  - " << f.observation << " " << f.societal_frame << " [" << f.source_note << "]\n";
        }
        out << "  " << bundle.context.destigmatising_note << "\n";
    }
    return out.str();
}

}  // namespace htp
