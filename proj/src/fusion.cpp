#include "htp/fusion.hpp"

#include <algorithm>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "htp/alignment.hpp"
#include "htp/batch.hpp"
#include "htp/pipeline.hpp"

namespace htp {
namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool known_dimension(std::string_view d) {
    return std::find(kViewpointDimensions.begin(), kViewpointDimensions.end(), d) != kViewpointDimensions.end();
}

std::size_t dimension_rank(std::string_view d) {
    return static_cast<std::size_t>(std::find(kViewpointDimensions.begin(), kViewpointDimensions.end(), d) -
                                    kViewpointDimensions.begin());
}

bool known_focus(std::string_view f) {
    return std::find(kRiskFocuses.begin(), kRiskFocuses.end(), f) != kRiskFocuses.end();
}

Stance stance_from(const std::string& s) {
    if (s == "positive") return Stance::Positive;
    if (s == "concern") return Stance::Concern;
    if (s == "neutral") return Stance::Neutral;
    throw Error(ErrorKind::StructureViolation, "stance '" + s + "' is not positive, concern or neutral");
}

/// Orders "<source>#<k>" ids by source, then numerically by k.
std::pair<std::string, long long> id_key(const std::string& id) {
    const auto hash = id.rfind('#');
    if (hash == std::string::npos) return {id, -1};
    try {
        return {id.substr(0, hash), std::stoll(id.substr(hash + 1))};
    } catch (const std::exception&) {
        return {id, -1};
    }
}

bool id_less(const std::string& a, const std::string& b) {
    const auto ka = id_key(a), kb = id_key(b);
    return ka != kb ? ka < kb : a < b;
}

struct DisjointSet {
    std::vector<std::size_t> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

std::vector<std::string> distinct_sources(const std::vector<const Viewpoint*>& members) {
    std::set<std::string> s;
    for (const auto* v : members) s.insert(v->source_model);
    return {s.begin(), s.end()};
}

Json string_list(const std::vector<std::string>& v) { return Json(v); }

}  // namespace

// --- interpretations ----------------------------------------------------------

std::vector<InterpretationText> FusionInterpretations::texts() const {
    std::vector<InterpretationText> out;
    for (const auto& s : slots) {
        if (s.text) out.push_back(*s.text);
    }
    return out;
}

Json to_json(const FusionInterpretations& interpretations) {
    Json slots = Json::array();
    for (const auto& s : interpretations.slots) {
        Json j{{"backend", s.backend}};
        if (s.text) {
            j["status"] = "ok";
            j["interpretation"] = to_json(*s.text);
        } else {
            j["status"] = "gap";
            j["error"] = Json{{"kind", s.error_kind.value_or("")}, {"message", s.error_message.value_or("")}};
        }
        slots.push_back(std::move(j));
    }
    return Json{{"slots", slots}};
}

FusionInterpretations parallel_interpret(const CaseRecord& record,
                                         std::span<const std::shared_ptr<const Backend>> backends,
                                         const PromptTemplate& prompt, int min_survivors, int parallelism) {
    if (min_survivors < 2) throw Error(ErrorKind::InvalidArgument, "fusion needs at least 2 surviving interpretations");
    std::set<std::string> names;
    for (const auto& b : backends) {
        if (!b) throw Error(ErrorKind::PreconditionFailed, "fusion backend list holds an empty entry");
        if (!names.insert(b->name()).second) {
            throw Error(ErrorKind::PreconditionFailed, "fusion backend " + b->name() + " is listed twice");
        }
    }
    if (names.size() < 3) {
        throw Error(ErrorKind::PreconditionFailed,
                    "fusion needs at least 3 distinct backends, got " + std::to_string(names.size()));
    }
    const auto id = record.id;
    const auto request = GenerateRequest::make(
        record.image,
        prompt.render({{"case_id", id.raw()},
                       {"age", std::to_string(id.age())},
                       {"sex", std::string(to_string(id.sex()))},
                       {"subject_note", record.subject_note}}),
        prompt.id);
    auto outcomes = parallel_map(backends, parallelism, [&](const std::shared_ptr<const Backend>& b) {
        return generate_interpretation(*b, request);
    });

    FusionInterpretations out;
    int survivors = 0;
    for (std::size_t i = 0; i < backends.size(); ++i) {
        InterpretationSlot slot{backends[i]->name(), std::nullopt, std::nullopt, std::nullopt};
        if (outcomes[i]) {
            slot.text = outcomes[i].value().text;
            ++survivors;
        } else {
            slot.error_kind = std::string(to_string(outcomes[i].error().kind()));
            slot.error_message = outcomes[i].error().what();
        }
        out.slots.push_back(std::move(slot));
    }
    if (survivors < min_survivors) {
        std::string detail;
        for (const auto& s : out.slots) {
            if (!s.text) detail += " " + s.backend + " (" + *s.error_kind + ")";
        }
        throw Error(ErrorKind::InsufficientInterpretations,
                    std::to_string(survivors) + " of " + std::to_string(backends.size()) +
                        " interpretations succeeded; failed:" + detail);
    }
    return out;
}

// --- viewpoints ---------------------------------------------------------------

std::string_view to_string(Stance stance) {
    switch (stance) {
        case Stance::Positive: return "positive";
        case Stance::Concern: return "concern";
        case Stance::Neutral: return "neutral";
    }
    return "neutral";
}

Json to_json(const Viewpoint& v) {
    return Json{{"id", v.id},
                {"source_model", v.source_model},
                {"dimension", v.dimension},
                {"statement", v.statement},
                {"stance", std::string(to_string(v.stance))}};
}

Viewpoint viewpoint_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorKind::StructureViolation, "viewpoint must be an object");
    Viewpoint v;
    v.id = j.value("id", "");
    v.source_model = j.value("source_model", "");
    v.dimension = j.value("dimension", "");
    if (!known_dimension(v.dimension)) {
        throw Error(ErrorKind::UnknownDimension, "viewpoint dimension '" + v.dimension + "' is not one of the six");
    }
    v.statement = j.value("statement", "");
    if (trim(v.statement).empty()) throw Error(ErrorKind::EmptyText, "viewpoint statement is empty");
    v.stance = stance_from(j.value("stance", ""));
    return v;
}

std::vector<Viewpoint> extract_viewpoints(const InterpretationText& interpretation, const Backend& extractor,
                                          const PromptTemplate& prompt) {
    if (trim(interpretation.text).empty()) throw Error(ErrorKind::EmptyText, "interpretation to extract is empty");
    const auto request =
        GenerateRequest::make(std::nullopt, prompt.render({{"interpretation", interpretation.text}}), prompt.id);
    const auto reply = parse_reply(generate_interpretation(extractor, request).text.text, "extraction");
    if (!reply.contains("viewpoints") || !reply.at("viewpoints").is_array()) {
        throw Error(ErrorKind::StructureViolation, "extraction reply has no viewpoints list");
    }
    std::vector<Viewpoint> out;
    for (const auto& item : reply.at("viewpoints")) {
        Json j = item;
        if (j.is_object()) {
            j["id"] = interpretation.source + "#" + std::to_string(out.size() + 1);
            j["source_model"] = interpretation.source;
        }
        out.push_back(viewpoint_from_json(j));
    }
    return out;
}

// --- classification -------------------------------------------------------------

std::string_view to_string(SupportTier tier) {
    switch (tier) {
        case SupportTier::HighlyConsistent: return "highly_consistent";
        case SupportTier::PartiallySupported: return "partially_supported";
        case SupportTier::Divergent: return "divergent";
    }
    return "divergent";
}

bool ClassifiedViewpoints::contains(const std::string& finding_id) const { return tier_of(finding_id).has_value(); }

std::optional<SupportTier> ClassifiedViewpoints::tier_of(const std::string& finding_id) const {
    for (const auto& c : consensus) {
        if (c.id == finding_id) return SupportTier::HighlyConsistent;
    }
    for (const auto& v : to_be_verified) {
        if (v.id == finding_id) return SupportTier::PartiallySupported;
    }
    for (const auto& x : conflicts) {
        if (x.id == finding_id) return SupportTier::Divergent;
    }
    return std::nullopt;
}

const Viewpoint* ClassifiedViewpoints::viewpoint(const std::string& id) const {
    for (const auto& v : viewpoints) {
        if (v.id == id) return &v;
    }
    return nullptr;
}

Json to_json(const ClassifiedViewpoints& c) {
    Json consensus = Json::array(), unverified = Json::array(), conflicts = Json::array(), viewpoints = Json::array();
    for (const auto& v : c.viewpoints) viewpoints.push_back(to_json(v));
    for (const auto& f : c.consensus) {
        consensus.push_back(Json{{"id", f.id},
                                 {"dimension", f.dimension},
                                 {"merged_statement", f.merged_statement},
                                 {"members", f.members},
                                 {"sources", f.sources},
                                 {"support", f.support},
                                 {"stance", std::string(to_string(f.stance))}});
    }
    for (const auto& f : c.to_be_verified) {
        unverified.push_back(Json{{"id", f.id},
                                  {"viewpoint", f.viewpoint},
                                  {"dimension", f.dimension},
                                  {"statement", f.statement},
                                  {"source", f.source},
                                  {"stance", std::string(to_string(f.stance))}});
    }
    for (const auto& f : c.conflicts) {
        Json sides = Json::array();
        for (const auto& s : f.sides) sides.push_back(Json{{"stance", std::string(to_string(s.stance))}, {"members", s.members}});
        conflicts.push_back(Json{{"id", f.id},
                                 {"dimension", f.dimension},
                                 {"sides", sides},
                                 {"sources", f.sources},
                                 {"summary", f.summary}});
    }
    return Json{{"tau", c.tau},
                {"viewpoints", viewpoints},
                {"clusters", c.clusters},
                {"consensus", consensus},
                {"to_be_verified", unverified},
                {"conflicts", conflicts}};
}

ClassifiedViewpoints classify_viewpoints(std::span<const Viewpoint> input, const Backend& embedder, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::InvalidArgument, "tau must lie in (0, 1)");
    ClassifiedViewpoints out;
    out.tau = tau;
    out.viewpoints.assign(input.begin(), input.end());
    std::sort(out.viewpoints.begin(), out.viewpoints.end(),
              [](const Viewpoint& a, const Viewpoint& b) { return id_less(a.id, b.id); });
    std::set<std::string> ids, sources;
    for (const auto& v : out.viewpoints) {
        if (!known_dimension(v.dimension)) {
            throw Error(ErrorKind::UnknownDimension, "viewpoint " + v.id + " has dimension '" + v.dimension + "'");
        }
        if (!ids.insert(v.id).second) throw Error(ErrorKind::DuplicateId, "viewpoint id " + v.id + " repeats");
        sources.insert(v.source_model);
    }
    if (sources.size() < 2) {
        throw Error(ErrorKind::PreconditionFailed, "classification needs viewpoints from at least 2 source models");
    }

    std::map<std::string, EmbeddingVector> vectors;
    for (const auto& v : out.viewpoints) {
        if (!vectors.contains(v.statement)) vectors.emplace(v.statement, embed_text(embedder, v.statement));
    }

    const std::size_t n = out.viewpoints.size();
    DisjointSet sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& a = out.viewpoints[i];
            const auto& b = out.viewpoints[j];
            if (a.dimension != b.dimension) continue;
            if (cosine_similarity(vectors.at(a.statement), vectors.at(b.statement)) >= tau) sets.unite(i, j);
        }
    }

    // Clusters ordered by dimension, then by their first member.
    std::map<std::size_t, std::vector<const Viewpoint*>> by_root;
    for (std::size_t i = 0; i < n; ++i) by_root[sets.find(i)].push_back(&out.viewpoints[i]);
    std::vector<std::vector<const Viewpoint*>> clusters;
    for (auto& [root, members] : by_root) clusters.push_back(std::move(members));
    std::stable_sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
        return dimension_rank(a.front()->dimension) < dimension_rank(b.front()->dimension);
    });

    for (const auto& members : clusters) {
        auto& ids_of_cluster = out.clusters.emplace_back();
        for (const auto* v : members) ids_of_cluster.push_back(v->id);
        const auto has = [&](Stance s) {
            return std::any_of(members.begin(), members.end(), [s](const Viewpoint* v) { return v->stance == s; });
        };
        const auto cluster_sources = distinct_sources(members);
        if (has(Stance::Positive) && has(Stance::Concern)) {
            ConflictFinding f;
            f.id = "X" + std::to_string(out.conflicts.size() + 1);
            f.dimension = members.front()->dimension;
            f.sources = cluster_sources;
            const Viewpoint* first_positive = nullptr;
            const Viewpoint* first_concern = nullptr;
            for (Stance s : {Stance::Positive, Stance::Concern, Stance::Neutral}) {
                ConflictSide side{s, {}};
                for (const auto* v : members) {
                    if (v->stance != s) continue;
                    side.members.push_back(v->id);
                    if (s == Stance::Positive && !first_positive) first_positive = v;
                    if (s == Stance::Concern && !first_concern) first_concern = v;
                }
                if (!side.members.empty()) f.sides.push_back(std::move(side));
            }
            f.summary = "Interpretations disagree on " + f.dimension + ": \"" + first_positive->statement +
                        "\" versus \"" + first_concern->statement + "\"";
            out.conflicts.push_back(std::move(f));
        } else if (cluster_sources.size() >= 2) {
            ConsensusFinding f;
            f.id = "C" + std::to_string(out.consensus.size() + 1);
            f.dimension = members.front()->dimension;
            f.merged_statement = members.front()->statement;
            for (const auto* v : members) f.members.push_back(v->id);
            f.sources = cluster_sources;
            f.support = cluster_sources.size();
            f.stance = has(Stance::Concern) ? Stance::Concern : has(Stance::Positive) ? Stance::Positive : Stance::Neutral;
            out.consensus.push_back(std::move(f));
        } else {
            for (const auto* v : members) {
                out.to_be_verified.push_back(UnverifiedFinding{"V" + std::to_string(out.to_be_verified.size() + 1),
                                                               v->id, v->dimension, v->statement, v->source_model,
                                                               v->stance});
            }
        }
    }
    return out;
}

// --- risk -----------------------------------------------------------------------

std::string_view to_string(Severity severity) {
    switch (severity) {
        case Severity::Watch: return "watch";
        case Severity::Elevated: return "elevated";
        case Severity::Urgent: return "urgent";
    }
    return "watch";
}

RiskRules default_risk_rules() {
    RiskRules r;
    r.keyword_rules = {
        {"emotional_distress",
         {"self-harm", "suicid", "hopeless", "harm to others", "violence", "abuse"},
         true,
         "Explicit indicators of possible harm were noted by several interpretations."},
        {"emotional_distress",
         {"anxiety", "anxious", "depress", "sad", "distress", "tension", "avoidance", "withdraw", "fatigue",
          "depleted", "exhaust", "stress", "fear", "emotional"},
         false,
         ""},
        {"self_perception",
         {"self-worth", "self worth", "self-esteem", "self esteem", "self-efficacy", "inadequa", "insecur", "identity",
          "stick-figure", "stick figure", "small figure"},
         false,
         ""},
        {"interpersonal_difficulties",
         {"isolat", "social", "detach", "distance", "intimacy", "lonel", "relationship", "separate", "closed door",
          "observer role"},
         false,
         ""},
        {"developmental_concerns", {"regress", "immatur", "developmental", "childlike", "delay"}, false, ""},
    };
    r.dimension_defaults = {{"house", "interpersonal_difficulties"},
                            {"tree", "emotional_distress"},
                            {"person", "self_perception"},
                            {"overall_layout", "emotional_distress"},
                            {"stroke_features", "emotional_distress"},
                            {"special_symbols_omissions", "developmental_concerns"}};
    return r;
}

RiskRules risk_rules_from_json(const Json& j) {
    RiskRules r;
    try {
        for (const auto& rule : j.at("keyword_rules")) {
            RiskRule k{rule.at("focus").get<std::string>(), rule.at("keywords").get<std::vector<std::string>>(),
                       rule.value("red_flag", false), rule.value("justification", "")};
            if (!known_focus(k.focus) || k.focus == "red_flags") {
                throw Error(ErrorKind::Config, "risk rule focus '" + k.focus + "' is not a routable focus");
            }
            if (k.red_flag && trim(k.justification).empty()) {
                throw Error(ErrorKind::Config, "red-flag risk rules need a justification");
            }
            for (auto& w : k.keywords) w = lower(w);
            r.keyword_rules.push_back(std::move(k));
        }
        for (const auto& [dimension, focus] : j.at("dimension_defaults").items()) {
            if (!known_dimension(dimension)) throw Error(ErrorKind::Config, "unknown dimension '" + dimension + "'");
            const auto f = focus.get<std::string>();
            if (!known_focus(f) || f == "red_flags") throw Error(ErrorKind::Config, "unknown focus '" + f + "'");
            r.dimension_defaults[dimension] = f;
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Config, std::string("malformed risk rules: ") + e.what());
    }
    for (auto d : kViewpointDimensions) {
        if (!r.dimension_defaults.contains(std::string(d))) {
            throw Error(ErrorKind::Config, "risk rules give no default focus for dimension " + std::string(d));
        }
    }
    return r;
}

Json to_json(const RiskRules& rules) {
    Json list = Json::array();
    for (const auto& k : rules.keyword_rules) {
        list.push_back(Json{{"focus", k.focus},
                            {"keywords", k.keywords},
                            {"red_flag", k.red_flag},
                            {"justification", k.justification}});
    }
    return Json{{"keyword_rules", list}, {"dimension_defaults", rules.dimension_defaults}};
}

bool RiskAssessment::empty() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.second.empty(); });
}

Json to_json(const RiskAssessment& risk) {
    Json out = Json::object();
    for (const auto& [focus, list] : risk.entries) {
        Json entries = Json::array();
        for (const auto& e : list) {
            Json j{{"finding_ref", e.finding_ref},
                   {"severity", std::string(to_string(e.severity))},
                   {"support_tier", std::string(to_string(e.support_tier))}};
            if (!e.justification.empty()) j["justification"] = e.justification;
            entries.push_back(std::move(j));
        }
        out[focus] = std::move(entries);
    }
    return out;
}

RiskAssessment assess_risk(const ClassifiedViewpoints& classified, const RiskRules& rules) {
    RiskAssessment risk;
    for (auto f : kRiskFocuses) risk.entries[std::string(f)];

    const auto add = [&](const std::string& focus, RiskEntry entry) {
        auto& list = risk.entries[focus];
        const bool seen = std::any_of(list.begin(), list.end(),
                                      [&](const RiskEntry& e) { return e.finding_ref == entry.finding_ref; });
        if (!seen) list.push_back(std::move(entry));
    };
    const auto route = [&](const std::string& id, const std::string& dimension, const std::string& text,
                           Severity severity, SupportTier tier, bool consensus) {
        const auto haystack = lower(text);
        bool matched = false;
        for (const auto& rule : rules.keyword_rules) {
            const bool hit = std::any_of(rule.keywords.begin(), rule.keywords.end(), [&](const std::string& k) {
                return haystack.find(lower(k)) != std::string::npos;
            });
            if (!hit) continue;
            matched = true;
            add(rule.focus, RiskEntry{id, severity, tier, ""});
            if (rule.red_flag && consensus) {
                add("red_flags", RiskEntry{id, Severity::Urgent, SupportTier::HighlyConsistent, rule.justification});
            }
        }
        if (!matched) {
            const auto it = rules.dimension_defaults.find(dimension);
            if (it != rules.dimension_defaults.end()) add(it->second, RiskEntry{id, severity, tier, ""});
        }
    };

    for (const auto& c : classified.consensus) {
        if (c.stance != Stance::Concern) continue;
        std::string text = c.merged_statement;
        for (const auto& m : c.members) {
            if (const auto* v = classified.viewpoint(m)) text += "\n" + v->statement;
        }
        route(c.id, c.dimension, text, Severity::Elevated, SupportTier::HighlyConsistent, true);
    }
    for (const auto& v : classified.to_be_verified) {
        if (v.stance != Stance::Concern) continue;
        route(v.id, v.dimension, v.statement, Severity::Watch, SupportTier::PartiallySupported, false);
    }
    for (const auto& x : classified.conflicts) {
        std::string text;
        for (const auto& side : x.sides) {
            if (side.stance != Stance::Concern) continue;
            for (const auto& m : side.members) {
                if (const auto* v = classified.viewpoint(m)) text += v->statement + "\n";
            }
        }
        route(x.id, x.dimension, text, Severity::Watch, SupportTier::Divergent, false);
    }
    return risk;
}

// --- report -----------------------------------------------------------------------

std::string_view section_title(std::string_view section) {
    if (section == "executive_summary") return "Executive Summary";
    if (section == "detailed_analysis") return "Detailed Analysis";
    if (section == "priority_concerns_and_warnings") return "Priority Concerns and Warnings";
    if (section == "support_recommendations") return "Support Recommendations";
    if (section == "limitations") return "Limitations";
    return section;
}

const ReportSection* IntegratedReport::section(std::string_view name) const {
    for (const auto& s : sections) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

ReportSection* IntegratedReport::section(std::string_view name) {
    for (auto& s : sections) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

Json to_json(const IntegratedReport& report) {
    Json sections = Json::array();
    for (const auto& s : report.sections) {
        Json findings = Json::array();
        for (const auto& f : s.findings) {
            findings.push_back(Json{{"id", f.id},
                                    {"dimension", f.dimension},
                                    {"statement", f.statement},
                                    {"support_tier", std::string(to_string(f.support_tier))},
                                    {"sources", f.sources},
                                    {"viewpoints", f.viewpoints}});
        }
        Json j{{"name", s.name}, {"title", std::string(section_title(s.name))}, {"text", s.text}, {"findings", findings}};
        if (s.name == "support_recommendations") {
            j["immediate"] = report.immediate;
            j["long_term"] = report.long_term;
        }
        sections.push_back(std::move(j));
    }
    return Json{{"case_id", report.case_id}, {"sections", sections}, {"red_flags", string_list(report.red_flags)}};
}

FindingRef finding_ref(const ClassifiedViewpoints& classified, const std::string& id) {
    for (const auto& c : classified.consensus) {
        if (c.id == id) return FindingRef{id, c.dimension, c.merged_statement, SupportTier::HighlyConsistent, c.sources, c.members};
    }
    for (const auto& v : classified.to_be_verified) {
        if (v.id == id) return FindingRef{id, v.dimension, v.statement, SupportTier::PartiallySupported, {v.source}, {v.viewpoint}};
    }
    for (const auto& x : classified.conflicts) {
        if (x.id == id) {
            std::vector<std::string> members;
            for (const auto& s : x.sides) members.insert(members.end(), s.members.begin(), s.members.end());
            return FindingRef{id, x.dimension, x.summary, SupportTier::Divergent, x.sources, members};
        }
    }
    throw Error(ErrorKind::UnknownFinding, "finding " + id + " is not in the classification");
}

IntegratedReport synthesize_report(const std::string& case_id, const ClassifiedViewpoints& classified,
                                   const RiskAssessment& risk, const Backend& merger, const PromptTemplate& prompt) {
    const auto request = GenerateRequest::make(std::nullopt,
                                               prompt.render({{"case_id", case_id},
                                                              {"classified_json", canonical_dump(to_json(classified), true)},
                                                              {"risk_json", canonical_dump(to_json(risk), true)}}),
                                               prompt.id);
    const Json draft = parse_reply(generate_interpretation(merger, request).text.text, "merger");

    static const std::regex kFindingId(R"(\b[CVX][0-9]+\b)");
    const auto check_id = [&](const std::string& id, const std::string& where) {
        if (!classified.contains(id)) {
            throw Error(ErrorKind::UnknownFinding, where + " cites finding " + id + ", which the classification lacks");
        }
    };

    IntegratedReport report;
    report.case_id = case_id;
    for (const auto& f : risk.red_flags()) report.red_flags.push_back(f.finding_ref);

    for (auto name_view : kReportSections) {
        const std::string name(name_view);
        if (!draft.contains(name) || !draft.at(name).is_object()) {
            throw Error(ErrorKind::StructureViolation, "merger draft lacks section " + name);
        }
        const Json& part = draft.at(name);
        ReportSection section{name, part.value("text", Json("")).is_string() ? part.value("text", "") : "", {}};
        if (trim(section.text).empty()) throw Error(ErrorKind::StructureViolation, "merger left section " + name + " empty");
        for (std::sregex_iterator it(section.text.begin(), section.text.end(), kFindingId), end; it != end; ++it) {
            check_id(it->str(), "section " + name);
        }

        std::vector<std::string> ids;
        const auto push = [&](const std::string& id) {
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
        };
        for (const auto& id : part.value("findings", Json::array())) {
            if (!id.is_string()) throw Error(ErrorKind::StructureViolation, "section " + name + " lists a non-text finding id");
            check_id(id.get<std::string>(), "section " + name);
            push(id.get<std::string>());
        }
        if (name == "executive_summary") {
            for (const auto& c : classified.consensus) push(c.id);
        } else if (name == "detailed_analysis") {
            for (const auto& c : classified.consensus) push(c.id);
            for (const auto& v : classified.to_be_verified) push(v.id);
            for (const auto& x : classified.conflicts) push(x.id);
        } else if (name == "priority_concerns_and_warnings") {
            for (const auto& id : report.red_flags) push(id);
            for (Severity s : {Severity::Urgent, Severity::Elevated, Severity::Watch}) {
                for (auto focus : kRiskFocuses) {
                    for (const auto& e : risk.entries.at(std::string(focus))) {
                        if (e.severity == s) push(e.finding_ref);
                    }
                }
            }
            for (const auto& id : report.red_flags) {
                section.text += "\n" + finding_ref(classified, id).statement + " [" + id + "]: " +
                                std::string(kProfessionalAttention) + ".";
            }
        } else if (name == "support_recommendations") {
            const auto list = [&](const char* key) {
                std::vector<std::string> out;
                for (const auto& item : part.value(key, Json::array())) {
                    if (item.is_string() && !trim(item.get<std::string>()).empty()) out.push_back(item.get<std::string>());
                }
                return out;
            };
            report.immediate = list("immediate");
            report.long_term = list("long_term");
        } else if (name == "limitations") {
            for (const auto& v : classified.to_be_verified) push(v.id);
            for (const auto& x : classified.conflicts) push(x.id);
        }
        for (const auto& id : ids) section.findings.push_back(finding_ref(classified, id));
        report.sections.push_back(std::move(section));
    }
    return report;
}

bool Compliance::passed() const {
    return std::all_of(results.begin(), results.end(), [](const PrincipleResult& r) { return r.passed; });
}

const PrincipleResult& Compliance::get(std::string_view principle) const {
    for (const auto& r : results) {
        if (r.principle == principle) return r;
    }
    throw Error(ErrorKind::NotFound, "no principle named " + std::string(principle));
}

Json to_json(const Compliance& compliance) {
    Json list = Json::array();
    for (const auto& r : compliance.results) {
        list.push_back(Json{{"principle", r.principle}, {"passed", r.passed}, {"violations", r.violations}});
    }
    return Json{{"passed", compliance.passed()}, {"principles", list}};
}

Compliance check_principles(const IntegratedReport& report, const ClassifiedViewpoints& classified) {
    PrincipleResult directness{"Directness", true, {}};
    PrincipleResult evidence{"Evidence", true, {}};
    PrincipleResult caution{"Caution", true, {}};
    PrincipleResult practicality{"Practicality", true, {}};

    const auto* priority = report.section("priority_concerns_and_warnings");
    for (const auto& flag : report.red_flags) {
        const bool referenced = priority && std::any_of(priority->findings.begin(), priority->findings.end(),
                                                        [&](const FindingRef& f) { return f.id == flag; });
        if (!referenced) directness.violations.push_back("red flag " + flag + " is missing from the priority section");
    }

    for (const auto& section : report.sections) {
        for (const auto& f : section.findings) {
            if (f.sources.empty()) {
                evidence.violations.push_back(section.name + ": finding " + f.id + " cites no source interpretation");
            }
            const auto expected = classified.tier_of(f.id);
            if (!expected) {
                caution.violations.push_back(section.name + ": finding " + f.id + " is not in the classification");
            } else if (*expected != f.support_tier) {
                caution.violations.push_back(section.name + ": finding " + f.id + " is labeled " +
                                             std::string(to_string(f.support_tier)) + " but classified " +
                                             std::string(to_string(*expected)));
            }
        }
    }

    const auto actionable = [](const std::vector<std::string>& items) {
        return std::any_of(items.begin(), items.end(), [](const std::string& s) { return !trim(s).empty(); });
    };
    if (!report.section("support_recommendations") || (!actionable(report.immediate) && !actionable(report.long_term))) {
        practicality.violations.push_back("support recommendations contain no actionable item");
    }

    Compliance out;
    for (auto* r : {&directness, &evidence, &caution, &practicality}) {
        r->passed = r->violations.empty();
        out.results.push_back(std::move(*r));
    }
    return out;
}

std::vector<std::string> structure_violations(const IntegratedReport& report) {
    std::vector<std::string> out;
    if (report.sections.size() != kReportSections.size()) {
        out.push_back("report has " + std::to_string(report.sections.size()) + " sections, expected 5");
    }
    for (std::size_t i = 0; i < report.sections.size(); ++i) {
        const auto& s = report.sections[i];
        if (i < kReportSections.size() && s.name != kReportSections[i]) {
            out.push_back("section " + std::to_string(i + 1) + " is " + s.name + ", expected " +
                          std::string(kReportSections[i]));
        }
        if (trim(s.text).empty()) out.push_back("section " + s.name + " has no text");
    }
    return out;
}

std::string render_report_text(const IntegratedReport& report) {
    std::ostringstream out;
    out << "Integrated HTP report for " << report.case_id << "\n";
    for (const auto& s : report.sections) {
        const auto title = section_title(s.name);
        out << "\n" << title << "\n" << std::string(title.size(), '=') << "\n" << s.text << "\n";
        if (s.name == "support_recommendations") {
            if (!report.immediate.empty()) out << "\nImmediate:\n";
            for (const auto& i : report.immediate) out << "  - " << i << "\n";
            if (!report.long_term.empty()) out << "\nLong-term:\n";
            for (const auto& i : report.long_term) out << "  - " << i << "\n";
        }
        if (!s.findings.empty()) out << "\nFindings:\n";
        for (const auto& f : s.findings) {
            out << "  [" << f.id << "] " << f.statement << " (" << to_string(f.support_tier) << "; sources: ";
            for (std::size_t i = 0; i < f.sources.size(); ++i) out << (i ? ", " : "") << f.sources[i];
            out << ")\n";
        }
    }
    return out.str();
}

// --- end to end ---------------------------------------------------------------------

FusionRun run_fusion(const CaseRecord& record, const FusionBackends& backends, const PromptLibrary& prompts,
                     const FusionConfig& config) {
    if (!backends.extractor || !backends.embedder || !backends.merger) {
        throw Error(ErrorKind::Config, "fusion needs extractor, embedder and merger backends");
    }
    FusionRun run;
    run.interpretations = parallel_interpret(record, backends.interpreters, prompts.get(config.interpret_prompt),
                                             config.min_survivors, config.parallelism);
    for (const auto& text : run.interpretations.texts()) {
        auto viewpoints = extract_viewpoints(text, *backends.extractor, prompts.get(config.extract_prompt));
        run.viewpoints.insert(run.viewpoints.end(), viewpoints.begin(), viewpoints.end());
    }
    run.classified = classify_viewpoints(run.viewpoints, *backends.embedder, config.tau);
    run.risk = assess_risk(run.classified, config.risk_rules);
    run.report = synthesize_report(record.id.raw(), run.classified, run.risk, *backends.merger,
                                   prompts.get(config.merge_prompt));
    run.compliance = check_principles(run.report, run.classified);
    return run;
}

}  // namespace htp
