#include "htp/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace htp {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void reject(const std::string& field, const std::string& why) {
    throw Error(ErrorKind::Config, "config " + field + ": " + why);
}

void check_keys(const Json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) reject(where.empty() ? "root" : where, "must be an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto a : allowed) known = known || a == key;
        if (!known) reject(where.empty() ? key : where + "." + key, "unknown key");
    }
}

template <class T>
T field(const Json& j, const std::string& where, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        reject(where + "." + key, "has the wrong type");
    }
}

fs::path resolve(const fs::path& base, const std::string& raw) {
    const fs::path p(raw);
    return p.is_absolute() ? p : base / p;
}

void check_role(const AppConfig& c, const std::string& field, const std::string& name, BackendKind kind) {
    if (name.empty()) return;
    if (!c.has_backend(name)) reject(field, "unknown backend '" + name + "'");
    if (c.backend(name).kind != kind) {
        reject(field, "backend '" + name + "' must be of kind " + std::string(to_string(kind)));
    }
}

void check_prompt(const AppConfig& c, const std::string& field, const std::string& id) {
    if (!fs::is_regular_file(c.prompts / (id + ".txt"))) reject(field, "prompt '" + id + "' not found");
}

}  // namespace

const BackendSpec& AppConfig::backend(const std::string& name) const {
    for (const auto& b : backends) {
        if (b.name == name) return b;
    }
    throw Error(ErrorKind::Config, "unknown backend '" + name + "'");
}

bool AppConfig::has_backend(const std::string& name) const {
    for (const auto& b : backends) {
        if (b.name == name) return true;
    }
    return false;
}

PipelineConfig AppConfig::pipeline_config() const {
    PipelineConfig p;
    p.max_critique_rounds = pipeline.max_critique_rounds;
    return p;
}

FusionConfig AppConfig::fusion_config() const {
    FusionConfig f;
    f.tau = fusion.tau;
    f.min_survivors = fusion.min_survivors;
    f.parallelism = parallelism;
    f.risk_rules = fusion.risk_rules;
    return f;
}

void validate_config(const AppConfig& c) {
    std::set<std::string> names;
    for (const auto& b : c.backends) {
        b.validate();
        if (!names.insert(b.name).second) reject("backends", "duplicate backend name '" + b.name + "'");
        if (b.mock_script && !fs::is_regular_file(*b.mock_script)) {
            reject("backends." + b.name + ".mock_script", "file not found: " + *b.mock_script);
        }
    }
    if (!fs::is_directory(c.prompts)) reject("prompts", "directory not found: " + c.prompts.string());
    if (!fs::is_regular_file(c.schema)) reject("schema", "file not found: " + c.schema.string());
    if (!fs::is_directory(c.store_root)) reject("store_root", "directory not found: " + c.store_root.string());
    if (c.parallelism < 1 || c.parallelism > kMaxParallelism) {
        reject("parallelism", "must be in [1, " + std::to_string(kMaxParallelism) + "]");
    }

    const auto& e = c.eval;
    if (!std::isfinite(e.threshold) || e.threshold < -1.0 || e.threshold > 1.0) {
        reject("eval.threshold", "must be in [-1, 1]");
    }
    if (!std::isfinite(e.bin_width) || e.bin_width <= 0.0) reject("eval.bin_width", "must be > 0");
    if (!std::isfinite(e.anchor)) reject("eval.anchor", "must be finite");
    if (e.grid_points < 16) reject("eval.grid_points", "must be >= 16");
    check_role(c, "eval.generator", e.generator, BackendKind::Generate);
    check_role(c, "eval.embedder", e.embedder, BackendKind::Embed);
    check_prompt(c, "eval.prompt", e.prompt);

    const auto& f = c.fusion;
    if (!std::isfinite(f.tau) || f.tau <= 0.0 || f.tau >= 1.0) reject("fusion.tau", "must be in (0, 1)");
    if (f.min_survivors < 2) reject("fusion.min_survivors", "must be >= 2");
    if (!f.interpreters.empty()) {
        const std::set<std::string> distinct(f.interpreters.begin(), f.interpreters.end());
        if (distinct.size() != f.interpreters.size()) reject("fusion.interpreters", "names must be distinct");
        if (distinct.size() < 3) reject("fusion.interpreters", "needs at least 3 backends");
        if (static_cast<std::size_t>(f.min_survivors) > distinct.size()) {
            reject("fusion.min_survivors", "exceeds the number of interpreters");
        }
        for (const auto& name : f.interpreters) check_role(c, "fusion.interpreters", name, BackendKind::Generate);
    }
    check_role(c, "fusion.extractor", f.extractor, BackendKind::Generate);
    check_role(c, "fusion.embedder", f.embedder, BackendKind::Embed);
    check_role(c, "fusion.merger", f.merger, BackendKind::Generate);

    const auto& p = c.pipeline;
    if (p.max_critique_rounds < 0 || p.max_critique_rounds > kMaxCritiqueRounds) {
        reject("pipeline.max_critique_rounds", "must be in [0, " + std::to_string(kMaxCritiqueRounds) + "]");
    }
    check_role(c, "pipeline.observer", p.observer, BackendKind::Generate);
    check_role(c, "pipeline.interpreter", p.interpreter, BackendKind::Generate);
    check_role(c, "pipeline.zeitgeist", p.zeitgeist, BackendKind::Generate);
    check_role(c, "pipeline.listener", p.listener, BackendKind::Generate);
}

AppConfig config_from_json(const Json& j, const fs::path& base_dir) {
    check_keys(j, "", {"backends", "prompts", "schema", "store_root", "parallelism", "eval", "fusion", "pipeline"});
    for (const char* key : {"prompts", "schema", "store_root"}) {
        if (!j.contains(key)) reject(key, "is required");
    }
    AppConfig c;
    if (j.contains("backends")) {
        if (!j.at("backends").is_array()) reject("backends", "must be an array");
        for (const auto& b : j.at("backends")) {
            auto spec = backend_spec_from_json(b);
            if (spec.mock_script) spec.mock_script = resolve(base_dir, *spec.mock_script).string();
            c.backends.push_back(std::move(spec));
        }
    }
    c.prompts = resolve(base_dir, field<std::string>(j, "root", "prompts", ""));
    c.schema = resolve(base_dir, field<std::string>(j, "root", "schema", ""));
    c.store_root = resolve(base_dir, field<std::string>(j, "root", "store_root", ""));
    c.parallelism = field(j, "root", "parallelism", kDefaultParallelism);

    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, "eval", {"generator", "embedder", "prompt", "threshold", "bin_width", "anchor", "grid_points"});
        c.eval.generator = field<std::string>(e, "eval", "generator", "");
        c.eval.embedder = field<std::string>(e, "eval", "embedder", "");
        c.eval.prompt = field<std::string>(e, "eval", "prompt", c.eval.prompt);
        c.eval.threshold = field(e, "eval", "threshold", c.eval.threshold);
        c.eval.bin_width = field(e, "eval", "bin_width", c.eval.bin_width);
        c.eval.anchor = field(e, "eval", "anchor", c.eval.anchor);
        c.eval.grid_points = field(e, "eval", "grid_points", c.eval.grid_points);
    }
    if (j.contains("fusion")) {
        const auto& f = j.at("fusion");
        check_keys(f, "fusion", {"interpreters", "extractor", "embedder", "merger", "tau", "min_survivors", "risk_rules"});
        c.fusion.interpreters = field<std::vector<std::string>>(f, "fusion", "interpreters", {});
        c.fusion.extractor = field<std::string>(f, "fusion", "extractor", "");
        c.fusion.embedder = field<std::string>(f, "fusion", "embedder", "");
        c.fusion.merger = field<std::string>(f, "fusion", "merger", "");
        c.fusion.tau = field(f, "fusion", "tau", c.fusion.tau);
        c.fusion.min_survivors = field(f, "fusion", "min_survivors", c.fusion.min_survivors);
        if (f.contains("risk_rules")) c.fusion.risk_rules = risk_rules_from_json(f.at("risk_rules"));
    }
    if (j.contains("pipeline")) {
        const auto& p = j.at("pipeline");
        check_keys(p, "pipeline", {"observer", "interpreter", "zeitgeist", "listener", "max_critique_rounds"});
        c.pipeline.observer = field<std::string>(p, "pipeline", "observer", "");
        c.pipeline.interpreter = field<std::string>(p, "pipeline", "interpreter", "");
        c.pipeline.zeitgeist = field<std::string>(p, "pipeline", "zeitgeist", "");
        c.pipeline.listener = field<std::string>(p, "pipeline", "listener", "");
        c.pipeline.max_critique_rounds = field(p, "pipeline", "max_critique_rounds", c.pipeline.max_critique_rounds);
    }
    validate_config(c);
    return c;
}

AppConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read config file " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Config, "config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, fs::absolute(path).parent_path());
}

void require_eval_roles(const AppConfig& c) {
    if (c.eval.generator.empty()) reject("eval.generator", "is required for this command");
    if (c.eval.embedder.empty()) reject("eval.embedder", "is required for this command");
}

void require_pipeline_roles(const AppConfig& c) {
    const auto& p = c.pipeline;
    if (p.observer.empty()) reject("pipeline.observer", "is required for this command");
    if (p.interpreter.empty()) reject("pipeline.interpreter", "is required for this command");
    if (p.zeitgeist.empty()) reject("pipeline.zeitgeist", "is required for this command");
    if (p.listener.empty()) reject("pipeline.listener", "is required for this command");
    for (const auto& id : {"observer_v1", "interpreter_v1", "zeitgeist_v1", "listener_v1", "critique_v1"}) {
        check_prompt(c, "prompts", id);
    }
}

void require_fusion_roles(const AppConfig& c) {
    const auto& f = c.fusion;
    if (f.interpreters.empty()) reject("fusion.interpreters", "is required for this command");
    if (f.extractor.empty()) reject("fusion.extractor", "is required for this command");
    if (f.embedder.empty()) reject("fusion.embedder", "is required for this command");
    if (f.merger.empty()) reject("fusion.merger", "is required for this command");
    for (const auto& id : {"fusion_interpret_v1", "fusion_extract_v1", "fusion_merge_v1"}) {
        check_prompt(c, "prompts", id);
    }
}

}  // namespace htp
