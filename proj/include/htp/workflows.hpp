#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "htp/alignment.hpp"
#include "htp/config.hpp"
#include "htp/fusion.hpp"
#include "htp/pipeline.hpp"
#include "htp/schema.hpp"
#include "htp/store.hpp"

namespace htp {

/// Lazily built backend handles by configured name. A hook may replace or
/// wrap each handle, which is how recording and replay are layered in.
class BackendRegistry {
public:
    using Factory = std::function<std::shared_ptr<const Backend>(const BackendSpec&)>;

    explicit BackendRegistry(const AppConfig& config, Factory factory = {});

    std::shared_ptr<const Backend> get(const std::string& name);
    std::vector<std::string> built() const;

private:
    const AppConfig& config_;
    Factory factory_;
    std::map<std::string, std::shared_ptr<const Backend>> handles_;
};

/// Captures responses of every backend it hands out; `save` writes one mock
/// script per backend as `<dir>/<name>.json`.
class RecordingSession {
public:
    BackendRegistry::Factory factory();
    std::vector<std::filesystem::path> save(const std::filesystem::path& dir, bool overwrite) const;

private:
    std::map<std::string, std::shared_ptr<RecordingBackend>> recorders_;
};

/// Answers from `<dir>/<name>.json` instead of contacting any backend.
BackendRegistry::Factory replay_factory(const std::filesystem::path& dir);

struct WorkflowOptions {
    bool force = false;
};

// --- alignment study -----------------------------------------------------------------

inline constexpr std::string_view kEvalDir = "eval";

struct EvalOutcome {
    CorpusEvaluation evaluation;
    std::vector<StatsRow> rows;
    double threshold_share = 0.0;
    std::vector<std::filesystem::path> written;
};

/// Scores every stored case and writes records, the error sidecar, the AI
/// texts, statistics and plot data under `<store>/eval`.
EvalOutcome run_eval(const AppConfig& config, const CaseStore& store, BackendRegistry& backends,
                     const WorkflowOptions& options);

std::vector<SimilarityRecord> load_records(const CaseStore& store);
/// Statistics recomputed from the stored records.
std::vector<StatsRow> stored_stats(const CaseStore& store);

std::filesystem::path default_export_path(const CaseStore& store, TableFormat format);

// --- assessment pipeline -------------------------------------------------------------

struct AssessOutcome {
    PipelineRun run;
    std::vector<std::filesystem::path> written;
};

/// Runs the four-stage pipeline for a stored case and writes
/// `outputs/<stage>.json`, bundle.json, radar.json and report.txt, or the
/// completed stages and partial.json when a stage fails.
AssessOutcome run_assess(const AppConfig& config, const CaseStore& store, const std::string& case_id,
                         BackendRegistry& backends, const WorkflowOptions& options);

// --- fusion -------------------------------------------------------------------------

struct FuseOutcome {
    FusionRun run;
    std::vector<std::filesystem::path> written;
};

/// Runs multi-model fusion for a stored case and writes the fusion/ outputs.
FuseOutcome run_fuse(const AppConfig& config, const CaseStore& store, const std::string& case_id,
                     BackendRegistry& backends, const WorkflowOptions& options);

}  // namespace htp
