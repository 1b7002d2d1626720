#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>

#include "htp/workflows.hpp"

namespace fs = std::filesystem;
using namespace htp;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kBackend = 2, kPrinciples = 3 };

struct Globals {
    std::string config = "htp.json";
    std::optional<int> parallelism;
    bool force = false;
};

struct Session {
    Globals globals;
    BackendRegistry::Factory factory;  // empty means live backends
};

int exit_code(const Error& e) { return is_backend_failure(e.kind()) ? kBackend : kInvalid; }

void report(const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
}

AppConfig load(const Globals& g) {
    auto config = load_config(g.config);
    if (g.parallelism) {
        config.parallelism = *g.parallelism;
        validate_config(config);
    }
    return config;
}

void list_written(const std::vector<fs::path>& written) {
    for (const auto& p : written) std::cout << "wrote " << p.string() << "\n";
}

// --- commands ---------------------------------------------------------------------------

struct CaseAddArgs {
    std::string id;
    std::string image;
    std::string note;
    std::string expert_label;
    std::string expert_text;
    std::string expert_text_file;
};

int cmd_case_add(const Session& s, const CaseAddArgs& a) {
    const auto config = load(s.globals);
    CaseRecord record{parse_case_id(a.id), DrawingArtifact::load(a.image), a.note, std::nullopt, std::nullopt, {}};
    if (!a.expert_label.empty()) record.expert_label = a.expert_label;
    if (!a.expert_text.empty()) record.expert_text = a.expert_text;
    if (!a.expert_text_file.empty()) record.expert_text = read_file(a.expert_text_file);
    CaseStore store(config.store_root);
    std::cout << "stored " << a.id << " in " << store.store_case(record).string() << "\n";
    return kOk;
}

int cmd_case_list(const Session& s) {
    const auto config = load(s.globals);
    CaseStore store(config.store_root);
    for (const auto& id : store.ids()) std::cout << id << "\n";
    return kOk;
}

int cmd_eval_run(const Session& s) {
    const auto config = load(s.globals);
    CaseStore store(config.store_root);
    BackendRegistry backends(config, s.factory);
    const auto out = run_eval(config, store, backends, {s.globals.force});
    list_written(out.written);
    const auto& ev = out.evaluation;
    std::cout << "scored " << ev.records.size() << " cases, " << ev.errors.size() << " failed\n";
    for (const auto& e : ev.errors) std::cerr << "case " << e.case_id << " (" << e.stage << "): " << e.kind << ": "
                                              << e.message << "\n";
    if (ev.records.empty()) return kBackend;
    std::printf("share >= %.2f: %.4f\n", config.eval.threshold, out.threshold_share);
    std::cout << format_table(out.rows, TableFormat::Csv);
    return kOk;
}

int cmd_eval_stats(const Session& s) {
    const auto config = load(s.globals);
    CaseStore store(config.store_root);
    const auto records = load_records(store);
    std::cout << format_table(group_statistics(records), TableFormat::Csv);
    std::printf("share >= %.2f: %.4f\n", config.eval.threshold, threshold_share(records, config.eval.threshold));
    return kOk;
}

int cmd_export(const Session& s, const std::string& format_name, const std::string& output) {
    const auto config = load(s.globals);
    const auto format = table_format_from_string(format_name);
    CaseStore store(config.store_root);
    const auto rows = stored_stats(store);
    const fs::path path = output.empty() ? default_export_path(store, format) : fs::path(output);
    export_table(rows, format, path, s.globals.force);
    std::cout << "wrote " << path.string() << "\n";
    return kOk;
}

int cmd_assess(const Session& s, const std::string& case_id) {
    const auto config = load(s.globals);
    CaseStore store(config.store_root);
    BackendRegistry backends(config, s.factory);
    const auto out = run_assess(config, store, case_id, backends, {s.globals.force});
    list_written(out.written);
    if (out.run.failed_at) {
        std::cerr << "pipeline failed at " << *out.run.failed_at << "\n";
        report(*out.run.error);
        return exit_code(*out.run.error);
    }
    std::cout << "assessed " << case_id << " (" << out.run.transcript.size() << " critique entries)\n";
    return kOk;
}

int cmd_fuse(const Session& s, const std::string& case_id) {
    const auto config = load(s.globals);
    CaseStore store(config.store_root);
    BackendRegistry backends(config, s.factory);
    const auto out = run_fuse(config, store, case_id, backends, {s.globals.force});
    list_written(out.written);
    const auto& c = out.run.classified;
    std::cout << "consensus " << c.consensus.size() << ", to_be_verified " << c.to_be_verified.size()
              << ", conflicts " << c.conflicts.size() << "\n";
    for (const auto& r : out.run.compliance.results) {
        std::cout << r.principle << ": " << (r.passed ? "pass" : "fail") << "\n";
        for (const auto& v : r.violations) std::cout << "  " << v << "\n";
    }
    return out.run.compliance.passed() ? kOk : kPrinciples;
}

int cmd_schema_check(const Session& s, const std::string& schema_path, const std::string& observation) {
    const fs::path path = schema_path.empty() ? load(s.globals).schema : fs::path(schema_path);
    const auto schema = ObservationSchema::load(path);
    std::cout << "schema " << schema.version() << ": " << schema.leaf_count() << " leaves in "
              << schema.categories().size() << " categories\n";
    if (observation.empty()) return kOk;
    const auto doc = read_json_file(observation);
    const auto& values = doc.contains("values") && doc.at("values").is_object() ? doc.at("values") : doc;
    const auto violations = validate_observation(values, schema);
    for (const auto& v : violations) {
        std::cout << v.path << ": " << to_string(v.kind) << ": " << v.detail << "\n";
    }
    if (!violations.empty()) return kInvalid;
    std::cout << observation << " conforms\n";
    return kOk;
}

// --- dispatch ---------------------------------------------------------------------------

int run(std::vector<std::string> args, Session session);

int run_mock(const Session& outer, bool record, const fs::path& dir, std::vector<std::string> rest) {
    if (rest.empty()) throw Error(ErrorKind::InvalidArgument, "mock needs a command to run");
    std::vector<std::string> args{"--config", outer.globals.config};
    if (outer.globals.parallelism) {
        args.insert(args.end(), {"--parallelism", std::to_string(*outer.globals.parallelism)});
    }
    if (outer.globals.force) args.push_back("--force");
    args.insert(args.end(), rest.begin(), rest.end());
    if (!record) {
        if (!fs::is_directory(dir)) throw Error(ErrorKind::Config, "mock directory not found: " + dir.string());
        return run(std::move(args), Session{{}, replay_factory(dir)});
    }
    load(outer.globals);
    if (!outer.globals.force && fs::is_directory(dir)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() == ".json") {
                throw Error(ErrorKind::AlreadyExists, dir.string() + " already holds mock scripts (use --force)");
            }
        }
    }
    RecordingSession recording;
    int code = kOk;
    try {
        code = run(std::move(args), Session{{}, recording.factory()});
    } catch (...) {
        list_written(recording.save(dir, outer.globals.force));
        throw;
    }
    list_written(recording.save(dir, outer.globals.force));
    return code;
}

int run(std::vector<std::string> args, Session session) {
    CLI::App app{"House-Tree-Person assessment toolkit"};
    app.require_subcommand(1);
    app.add_option("--config", session.globals.config, "Configuration file")->capture_default_str();
    app.add_option("--parallelism", session.globals.parallelism, "Concurrent backend requests");
    app.add_flag("--force", session.globals.force, "Overwrite existing outputs");

    std::function<int()> action;

    auto* case_cmd = app.add_subcommand("case", "Manage stored cases")->require_subcommand(1);
    CaseAddArgs add;
    auto* case_add = case_cmd->add_subcommand("add", "Store a drawing");
    case_add->add_option("case_id", add.id, "Case id HTR-<age>-<sex>-<YYYYMMDD>")->required();
    case_add->add_option("--image", add.image, "PNG or JPEG file")->required()->check(CLI::ExistingFile);
    case_add->add_option("--note", add.note, "Subject note");
    case_add->add_option("--expert-label", add.expert_label, "Expert group label");
    auto* text_opt = case_add->add_option("--expert-text", add.expert_text, "Expert interpretation");
    case_add->add_option("--expert-text-file", add.expert_text_file, "Expert interpretation file")
        ->check(CLI::ExistingFile)
        ->excludes(text_opt);
    case_add->callback([&] { action = [&] { return cmd_case_add(session, add); }; });
    case_cmd->add_subcommand("list", "List stored case ids")->callback([&] {
        action = [&] { return cmd_case_list(session); };
    });

    auto* eval = app.add_subcommand("eval", "Alignment study")->require_subcommand(1);
    eval->add_subcommand("run", "Score every stored case against its expert text")->callback([&] {
        action = [&] { return cmd_eval_run(session); };
    });
    eval->add_subcommand("stats", "Recompute statistics from stored records")->callback([&] {
        action = [&] { return cmd_eval_stats(session); };
    });

    std::string case_id;
    auto* assess = app.add_subcommand("assess", "Run the four-stage pipeline on a case");
    assess->add_option("case_id", case_id)->required();
    assess->callback([&] { action = [&] { return cmd_assess(session, case_id); }; });

    auto* fuse = app.add_subcommand("fuse", "Run multi-model fusion on a case");
    fuse->add_option("case_id", case_id)->required();
    fuse->callback([&] { action = [&] { return cmd_fuse(session, case_id); }; });

    std::string schema_path, observation;
    auto* schema = app.add_subcommand("schema", "Observation schema")->require_subcommand(1);
    auto* check = schema->add_subcommand("check", "Load the schema and optionally validate an observation");
    check->add_option("--schema", schema_path, "Schema file instead of the configured one");
    check->add_option("--observation", observation, "Observation JSON to validate")->check(CLI::ExistingFile);
    check->callback([&] { action = [&] { return cmd_schema_check(session, schema_path, observation); }; });

    std::string format, output;
    auto* exp = app.add_subcommand("export", "Export summary statistics");
    exp->add_option("--format", format)->required()->check(CLI::IsMember({"csv", "json"}));
    exp->add_option("--output", output, "Destination file");
    exp->callback([&] { action = [&] { return cmd_export(session, format, output); }; });

    std::string mock_dir;
    auto* mock = app.add_subcommand("mock", "Record or replay backend responses")->require_subcommand(1);
    auto* mock_record = mock->add_subcommand("record", "Run a command and capture mock scripts");
    mock_record->add_option("--into", mock_dir, "Script directory")->required();
    mock_record->prefix_command();
    mock_record->callback([&] {
        action = [&, rest = mock_record->remaining()] { return run_mock(session, true, mock_dir, rest); };
    });
    auto* mock_replay = mock->add_subcommand("replay", "Run a command against recorded scripts");
    mock_replay->add_option("--from", mock_dir, "Script directory")->required();
    mock_replay->prefix_command();
    mock_replay->callback([&] {
        action = [&, rest = mock_replay->remaining()] { return run_mock(session, false, mock_dir, rest); };
    });

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }
    return action();
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(std::vector<std::string>(argv + 1, argv + argc), Session{});
    } catch (const Error& e) {
        report(e);
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    }
}
