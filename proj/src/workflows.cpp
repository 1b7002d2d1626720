#include "htp/workflows.hpp"

namespace htp {

namespace fs = std::filesystem;

// --- backends -----------------------------------------------------------------------

BackendRegistry::BackendRegistry(const AppConfig& config, Factory factory)
    : config_(config), factory_(std::move(factory)) {
    if (!factory_) factory_ = [](const BackendSpec& spec) { return make_backend(spec); };
}

std::shared_ptr<const Backend> BackendRegistry::get(const std::string& name) {
    if (auto it = handles_.find(name); it != handles_.end()) return it->second;
    auto handle = factory_(config_.backend(name));
    handles_.emplace(name, handle);
    return handle;
}

std::vector<std::string> BackendRegistry::built() const {
    std::vector<std::string> out;
    for (const auto& [name, handle] : handles_) out.push_back(name);
    return out;
}

BackendRegistry::Factory RecordingSession::factory() {
    return [this](const BackendSpec& spec) -> std::shared_ptr<const Backend> {
        auto recorder = std::make_shared<RecordingBackend>(make_backend(spec));
        recorders_[spec.name] = recorder;
        return recorder;
    };
}

std::vector<fs::path> RecordingSession::save(const fs::path& dir, bool overwrite) const {
    std::vector<fs::path> written;
    for (const auto& [name, recorder] : recorders_) {
        const auto path = dir / (name + ".json");
        write_file_atomic(path, canonical_dump(recorder->script_json(), true) + "\n", overwrite);
        written.push_back(path);
    }
    return written;
}

BackendRegistry::Factory replay_factory(const fs::path& dir) {
    return [dir](const BackendSpec& spec) -> std::shared_ptr<const Backend> {
        const auto path = dir / (spec.name + ".json");
        if (!fs::is_regular_file(path)) {
            throw Error(ErrorKind::Config, "no recorded script for backend '" + spec.name + "' in " + dir.string());
        }
        return ScriptedMock::load(spec.name, path.string());
    };
}

namespace {

std::string pretty(const Json& j) { return canonical_dump(j, true) + "\n"; }

/// Fails before any work when a target exists and overwriting is not allowed;
/// with overwriting allowed, stale targets are removed.
void claim_targets(const std::vector<fs::path>& targets, bool force) {
    for (const auto& t : targets) {
        if (!fs::exists(t)) continue;
        if (!force) throw Error(ErrorKind::AlreadyExists, t.string() + " exists (use --force to overwrite)");
    }
    for (const auto& t : targets) fs::remove(t);
}

struct Writer {
    std::vector<fs::path> written;

    void put(const fs::path& path, std::string_view content) {
        write_file_atomic(path, content, true);
        written.push_back(path);
    }
};

}  // namespace

// --- alignment study -----------------------------------------------------------------

namespace {

fs::path eval_dir(const CaseStore& store) { return store.root() / kEvalDir; }

const std::vector<std::string> kEvalFiles = {"records.json", "errors.json", "ai_texts.json", "stats.json",
                                             "summary.json", "histogram.json", "box.json", "violin.json"};

}  // namespace

EvalOutcome run_eval(const AppConfig& config, const CaseStore& store, BackendRegistry& backends,
                     const WorkflowOptions& options) {
    require_eval_roles(config);
    const auto prompts = PromptLibrary::load(config.prompts);
    const auto& prompt = prompts.get(config.eval.prompt);
    std::vector<fs::path> targets;
    for (const auto& f : kEvalFiles) targets.push_back(eval_dir(store) / f);
    claim_targets(targets, options.force);

    std::vector<CaseRecord> cases;
    for (const auto& id : store.ids()) cases.push_back(store.load_case(id));
    if (cases.empty()) throw Error(ErrorKind::EmptyInput, "the store holds no cases");

    const auto generator = backends.get(config.eval.generator);
    const auto embedder = backends.get(config.eval.embedder);
    EvalOutcome out;
    out.evaluation = evaluate_corpus(cases, *generator, *embedder, prompt, config.parallelism);

    Writer w;
    const auto dir = eval_dir(store);
    Json records = Json::array(), errors = Json::array(), texts = Json::object();
    for (const auto& r : out.evaluation.records) records.push_back(to_json(r));
    for (const auto& e : out.evaluation.errors) errors.push_back(to_json(e));
    for (const auto& [id, text] : out.evaluation.ai_texts) texts[id] = to_json(text);
    w.put(dir / "records.json", pretty(records));
    w.put(dir / "errors.json", pretty(errors));
    w.put(dir / "ai_texts.json", pretty(texts));

    const auto& recs = out.evaluation.records;
    if (!recs.empty()) {
        out.rows = group_statistics(recs);
        out.threshold_share = threshold_share(recs, config.eval.threshold);
        Json rows = Json::array();
        for (const auto& r : out.rows) rows.push_back(to_json(r));
        w.put(dir / "stats.json", pretty(rows));
        const auto plots = build_plot_data(recs, config.eval.bin_width, config.eval.anchor, config.eval.grid_points);
        w.put(dir / "histogram.json", pretty(histogram_json(plots)));
        w.put(dir / "box.json", pretty(box_json(plots)));
        w.put(dir / "violin.json", pretty(violin_json(plots)));
    }
    w.put(dir / "summary.json", pretty(Json{{"cases", cases.size()},
                                            {"scored", recs.size()},
                                            {"failed", out.evaluation.errors.size()},
                                            {"threshold", config.eval.threshold},
                                            {"threshold_share", out.threshold_share},
                                            {"prompt_id", prompt.id}}));
    out.written = std::move(w.written);
    return out;
}

std::vector<SimilarityRecord> load_records(const CaseStore& store) {
    const auto path = eval_dir(store) / "records.json";
    if (!fs::is_regular_file(path)) {
        throw Error(ErrorKind::NotFound, "no stored records at " + path.string() + " (run `eval run` first)");
    }
    std::vector<SimilarityRecord> out;
    for (const auto& j : read_json_file(path)) out.push_back(similarity_record_from_json(j));
    return out;
}

std::vector<StatsRow> stored_stats(const CaseStore& store) {
    const auto records = load_records(store);
    return group_statistics(records);
}

fs::path default_export_path(const CaseStore& store, TableFormat format) {
    return store.root() / "exports" / (format == TableFormat::Csv ? "stats.csv" : "stats.json");
}

// --- assessment pipeline -------------------------------------------------------------

AssessOutcome run_assess(const AppConfig& config, const CaseStore& store, const std::string& case_id,
                         BackendRegistry& backends, const WorkflowOptions& options) {
    require_pipeline_roles(config);
    const auto record = store.load_case(case_id);
    const auto schema = ObservationSchema::load(config.schema);
    const auto prompts = PromptLibrary::load(config.prompts);
    const auto dir = store.case_dir(case_id);
    CaseLock lock(dir);

    std::vector<fs::path> targets;
    for (auto stage : kStages) targets.push_back(dir / "outputs" / (std::string(stage) + ".json"));
    for (const char* f : {"bundle.json", "radar.json", "report.txt", "partial.json"}) targets.push_back(dir / f);
    claim_targets(targets, options.force);

    const auto& p = config.pipeline;
    const StageBackends stage_backends{backends.get(p.observer), backends.get(p.interpreter),
                                       backends.get(p.zeitgeist), backends.get(p.listener)};
    AssessOutcome out{run_pipeline(record, stage_backends, schema, prompts, config.pipeline_config()), {}};

    Writer w;
    for (auto stage : kStages) {
        const auto it = out.run.outputs.find(std::string(stage));
        if (it != out.run.outputs.end()) w.put(dir / "outputs" / (it->first + ".json"), pretty(it->second));
    }
    if (out.run.bundle) {
        w.put(dir / "bundle.json", pretty(to_json(*out.run.bundle)));
        w.put(dir / "radar.json", pretty(radar_json(out.run.bundle->dossier)));
        w.put(dir / "report.txt", render_report_text(*out.run.bundle));
    } else {
        w.put(dir / "partial.json", pretty(partial_json(out.run)));
    }
    out.written = std::move(w.written);
    return out;
}

// --- fusion -------------------------------------------------------------------------

FuseOutcome run_fuse(const AppConfig& config, const CaseStore& store, const std::string& case_id,
                     BackendRegistry& backends, const WorkflowOptions& options) {
    require_fusion_roles(config);
    const auto record = store.load_case(case_id);
    const auto prompts = PromptLibrary::load(config.prompts);
    const auto dir = store.case_dir(case_id);
    CaseLock lock(dir);

    const auto fusion_dir = dir / "fusion";
    std::vector<fs::path> targets;
    for (const char* f : {"interpretations.json", "viewpoints.json", "classified.json", "risk.json", "report.json",
                          "compliance.json", "report.txt"}) {
        targets.push_back(fusion_dir / f);
    }
    claim_targets(targets, options.force);

    const auto& f = config.fusion;
    FusionBackends fb;
    for (const auto& name : f.interpreters) fb.interpreters.push_back(backends.get(name));
    fb.extractor = backends.get(f.extractor);
    fb.embedder = backends.get(f.embedder);
    fb.merger = backends.get(f.merger);

    FuseOutcome out{run_fusion(record, fb, prompts, config.fusion_config()), {}};
    Json viewpoints = Json::array();
    for (const auto& v : out.run.viewpoints) viewpoints.push_back(to_json(v));

    Writer w;
    w.put(fusion_dir / "interpretations.json", pretty(to_json(out.run.interpretations)));
    w.put(fusion_dir / "viewpoints.json", pretty(viewpoints));
    w.put(fusion_dir / "classified.json", pretty(to_json(out.run.classified)));
    w.put(fusion_dir / "risk.json", pretty(to_json(out.run.risk)));
    w.put(fusion_dir / "report.json", pretty(to_json(out.run.report)));
    w.put(fusion_dir / "compliance.json", pretty(to_json(out.run.compliance)));
    w.put(fusion_dir / "report.txt", render_report_text(out.run.report));
    out.written = std::move(w.written);
    return out;
}

}  // namespace htp
