#include <doctest.h>

#include <fstream>

#include "htp/store.hpp"
#include "support/scenarios.hpp"
#include "support/workspace.hpp"

using namespace htp;
using namespace htp::testing;
namespace fs = std::filesystem;

namespace {

CliResult htp_cli(const Workspace& ws, std::vector<std::string> args) {
    return run_cli(HTP_CLI_PATH, args, ws.root());
}

bool mentions(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

fs::path case_dir(const Workspace& ws, const std::string& id) { return ws.store_root() / "cases" / id; }

}  // namespace

TEST_CASE("assess writes the bundle layout") {
    Workspace ws;
    const auto r = htp_cli(ws, {"assess", kHtr38Id});
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    const auto dir = case_dir(ws, kHtr38Id);
    for (const char* stage : {"observer", "interpreter", "zeitgeist", "listener"}) {
        CHECK(fs::is_regular_file(dir / "outputs" / (std::string(stage) + ".json")));
    }
    CHECK(fs::is_regular_file(dir / "bundle.json"));
    CHECK(fs::is_regular_file(dir / "report.txt"));
    CHECK_FALSE(fs::exists(dir / "partial.json"));
    const auto radar = read_json_file(dir / "radar.json");
    CHECK(radar["case_id"] == kHtr38Id);
    CHECK(validate_radar(radar["dimensions"]).self_worth == 35);
    CHECK(mentions(read_file(dir / "report.txt"), "small success accumulation"));
}

TEST_CASE("assess is byte-identical across runs and never overwrites silently") {
    Workspace ws;
    REQUIRE(htp_cli(ws, {"assess", kHtr38Id}).exit_code == 0);
    const auto bundle = case_dir(ws, kHtr38Id) / "bundle.json";
    const auto first = read_file(bundle);
    const auto again = htp_cli(ws, {"assess", kHtr38Id});
    CHECK(again.exit_code == 1);
    CHECK(mentions(again.output, "--force"));
    CHECK(read_file(bundle) == first);
    REQUIRE(htp_cli(ws, {"--force", "assess", kHtr38Id}).exit_code == 0);
    CHECK(read_file(bundle) == first);
}

TEST_CASE("assess reports a backend failure with exit 2 and a partial record") {
    Workspace ws;
    write_file_atomic(ws.mocks() / "zeitgeist-llm.json", "[]", true);
    const auto r = htp_cli(ws, {"assess", kHtr38Id});
    CHECK(r.exit_code == 2);
    const auto dir = case_dir(ws, kHtr38Id);
    CHECK(fs::is_regular_file(dir / "outputs" / "observer.json"));
    CHECK(fs::is_regular_file(dir / "outputs" / "interpreter.json"));
    CHECK_FALSE(fs::exists(dir / "outputs" / "zeitgeist.json"));
    CHECK_FALSE(fs::exists(dir / "bundle.json"));
    const auto partial = read_json_file(dir / "partial.json");
    CHECK(partial["failed_at"] == "zeitgeist");
}

TEST_CASE("unknown case is a validation error") {
    Workspace ws;
    CHECK(htp_cli(ws, {"assess", "HTR-60-F-20240101"}).exit_code == 1);
}

TEST_CASE("fuse writes fusion outputs and passes the principles") {
    Workspace ws;
    const auto r = htp_cli(ws, {"fuse", kPractitionerId});
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    const auto dir = case_dir(ws, kPractitionerId) / "fusion";
    for (const char* f : {"interpretations.json", "viewpoints.json", "classified.json", "risk.json", "report.json",
                          "compliance.json", "report.txt"}) {
        CHECK(fs::is_regular_file(dir / f));
    }
    const auto report = read_json_file(dir / "report.json");
    REQUIRE(report["sections"].size() == 5);
    CHECK(report["sections"][0]["name"] == "executive_summary");
    CHECK(report["sections"][4]["name"] == "limitations");
    CHECK(mentions(r.output, "Directness: pass"));
    CHECK(htp_cli(ws, {"fuse", kPractitionerId}).exit_code == 1);
}

TEST_CASE("fuse exits 3 when a principle fails") {
    Workspace ws;
    // The merger's draft is replaced by one with an empty recommendation list.
    auto script = read_json_file(ws.mocks() / "merger.json");
    for (auto& entry : script) {
        auto draft = Json::parse(entry["response_text"].get<std::string>());
        draft["support_recommendations"]["immediate"] = Json::array();
        draft["support_recommendations"]["long_term"] = Json::array();
        entry["response_text"] = draft.dump();
    }
    write_file_atomic(ws.mocks() / "merger.json", script.dump(), true);
    const auto r = htp_cli(ws, {"fuse", kPractitionerId});
    INFO(r.output);
    CHECK(r.exit_code == 3);
    CHECK(mentions(r.output, "Practicality: fail"));
    CHECK(fs::is_regular_file(case_dir(ws, kPractitionerId) / "fusion" / "compliance.json"));
}

TEST_CASE("fuse with two failing interpreters is a backend failure") {
    Workspace ws;
    write_file_atomic(ws.mocks() / "model-a.json", "[]", true);
    write_file_atomic(ws.mocks() / "model-b.json", "[]", true);
    CHECK(htp_cli(ws, {"fuse", kPractitionerId}).exit_code == 2);
}

TEST_CASE("eval run, eval stats and export") {
    Workspace ws;
    const auto r = htp_cli(ws, {"eval", "run"});
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    const auto eval = ws.store_root() / "eval";
    const auto records = read_json_file(eval / "records.json");
    REQUIRE(records.size() == 3);
    std::map<std::string, double> sim;
    for (const auto& rec : records) sim[rec["case_id"]] = rec["similarity"].get<double>();
    CHECK(sim["HTR-29-F-20240301"] == doctest::Approx(1.0));
    CHECK(sim["HTR-33-M-20240302"] == doctest::Approx(1.0));
    CHECK(sim["HTR-41-F-20240303"] == doctest::Approx(0.0));
    // The pipeline and fusion cases carry no expert text and land in the sidecar.
    CHECK(read_json_file(eval / "errors.json").size() == 2);
    for (const char* f : {"stats.json", "histogram.json", "box.json", "violin.json", "summary.json", "ai_texts.json"}) {
        CHECK(fs::is_regular_file(eval / f));
    }
    CHECK(read_json_file(eval / "summary.json")["threshold_share"].get<double>() == doctest::Approx(2.0 / 3.0));
    CHECK(htp_cli(ws, {"eval", "run"}).exit_code == 1);

    const auto stats = htp_cli(ws, {"eval", "stats"});
    CHECK(stats.exit_code == 0);
    CHECK(mentions(stats.output, "Wang Long,2,1.0000,1.0000,1.0000,1.0000,1.0000,1.0000,0.0000"));

    REQUIRE(htp_cli(ws, {"export", "--format", "csv"}).exit_code == 0);
    const auto csv = read_file(ws.store_root() / "exports" / "stats.csv");
    CHECK(csv == "group,cases,mean,median,q1,q3,min,max,sd\n"
                 "Wang Long,2,1.0000,1.0000,1.0000,1.0000,1.0000,1.0000,0.0000\n"
                 "Li Hua,1,0.0000,0.0000,0.0000,0.0000,0.0000,0.0000,0.0000\n"
                 "OVERALL,3,0.6667,1.0000,0.5000,1.0000,0.0000,1.0000,0.5774\n");
    CHECK(htp_cli(ws, {"export", "--format", "csv"}).exit_code == 1);
    REQUIRE(htp_cli(ws, {"export", "--format", "json", "--output", "table.json"}).exit_code == 0);
    CHECK(read_json_file(ws.root() / "table.json").size() == 3);
    CHECK(htp_cli(ws, {"export", "--format", "xml"}).exit_code == 1);
}

TEST_CASE("eval stats before eval run fails") {
    Workspace ws;
    CHECK(htp_cli(ws, {"eval", "stats"}).exit_code == 1);
}

TEST_CASE("schema check") {
    Workspace ws;
    const auto ok = htp_cli(ws, {"schema", "check"});
    CHECK(ok.exit_code == 0);
    CHECK(mentions(ok.output, "htp-observation/1"));

    write_file_atomic(ws.root() / "obs.json", htr38_observation().dump());
    CHECK(htp_cli(ws, {"schema", "check", "--observation", "obs.json"}).exit_code == 0);
    auto bad = htr38_observation();
    auto& values = bad.contains("values") ? bad["values"] : bad;
    values["house.rooff.style"] = "flat";
    write_file_atomic(ws.root() / "bad.json", bad.dump());
    const auto r = htp_cli(ws, {"schema", "check", "--observation", "bad.json"});
    CHECK(r.exit_code == 1);
    CHECK(mentions(r.output, "house.rooff.style"));
    CHECK(mentions(r.output, "unknown_path"));
}

TEST_CASE("case add stores a drawing") {
    Workspace ws;
    const auto png = tiny_png(9);
    std::ofstream(ws.root() / "d.png", std::ios::binary).write(reinterpret_cast<const char*>(png.data()),
                                                                static_cast<std::streamsize>(png.size()));
    const auto r = htp_cli(ws, {"case", "add", "HTR-27-F-20240505", "--image", "d.png", "--note", "student",
                                "--expert-label", "Yan Hu", "--expert-text", "calm"});
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    const auto stored = CaseStore(ws.store_root()).load_case("HTR-27-F-20240505");
    CHECK(stored.image.bytes() == png);
    CHECK(stored.expert_label == "Yan Hu");
    CHECK(stored.subject_note == "student");
    CHECK(htp_cli(ws, {"case", "add", "HTR-27-F-20240505", "--image", "d.png"}).exit_code == 1);
    CHECK(htp_cli(ws, {"case", "add", "HTR-2-F-20240505", "--image", "d.png"}).exit_code == 1);
    CHECK(mentions(htp_cli(ws, {"case", "list"}).output, "HTR-27-F-20240505"));
}

TEST_CASE("config errors exit 1 before any write") {
    Workspace ws;
    ws.edit_config([](Json& j) { j["fusion"]["tau"] = 1.5; });
    const auto r = htp_cli(ws, {"assess", kHtr38Id});
    CHECK(r.exit_code == 1);
    CHECK(mentions(r.output, "fusion.tau"));
    CHECK_FALSE(fs::exists(case_dir(ws, kHtr38Id) / "outputs"));
    CHECK(htp_cli(ws, {"--config", "absent.json", "assess", kHtr38Id}).exit_code == 1);
}

TEST_CASE("parallelism flag is validated") {
    Workspace ws;
    CHECK(htp_cli(ws, {"--parallelism", "0", "assess", kHtr38Id}).exit_code == 1);
    CHECK_FALSE(fs::exists(case_dir(ws, kHtr38Id) / "outputs"));
    CHECK(htp_cli(ws, {"--parallelism", "2", "assess", kHtr38Id}).exit_code == 0);
}

TEST_CASE("usage errors exit 1") {
    Workspace ws;
    CHECK(htp_cli(ws, {}).exit_code == 1);
    CHECK(htp_cli(ws, {"frobnicate"}).exit_code == 1);
    CHECK(htp_cli(ws, {"--help"}).exit_code == 0);
}

TEST_CASE("mock record then replay reproduces the run") {
    Workspace ws;
    const auto rec = htp_cli(ws, {"mock", "record", "--into", "captured", "assess", kHtr38Id});
    INFO(rec.output);
    REQUIRE(rec.exit_code == 0);
    for (const char* name : {"vision-observer", "interpreter-llm", "zeitgeist-llm", "listener-llm"}) {
        CHECK(fs::is_regular_file(ws.root() / "captured" / (std::string(name) + ".json")));
    }
    const auto bundle = case_dir(ws, kHtr38Id) / "bundle.json";
    const auto first = read_file(bundle);
    // Replay ignores the configured scripts entirely.
    for (const char* name : {"vision-observer", "interpreter-llm", "zeitgeist-llm", "listener-llm"}) {
        write_file_atomic(ws.mocks() / (std::string(name) + ".json"), "[]", true);
    }
    const auto replay = htp_cli(ws, {"--force", "mock", "replay", "--from", "captured", "assess", kHtr38Id});
    INFO(replay.output);
    REQUIRE(replay.exit_code == 0);
    CHECK(read_file(bundle) == first);
    CHECK(htp_cli(ws, {"mock", "record", "--into", "captured", "assess", kHtr38Id}).exit_code == 1);
    CHECK(htp_cli(ws, {"mock", "replay", "--from", "nowhere", "assess", kHtr38Id}).exit_code == 1);
}
