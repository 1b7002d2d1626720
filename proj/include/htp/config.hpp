#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "htp/fusion.hpp"
#include "htp/gateway.hpp"
#include "htp/pipeline.hpp"

namespace htp {

struct EvalSettings {
    std::string generator;
    std::string embedder;
    std::string prompt = "alignment_interpretation_v1";
    double threshold = 0.70;
    double bin_width = 0.05;
    double anchor = 0.0;
    int grid_points = 256;
};

struct FusionSettings {
    std::vector<std::string> interpreters;
    std::string extractor;
    std::string embedder;
    std::string merger;
    double tau = kDefaultTau;
    int min_survivors = 2;
    RiskRules risk_rules = default_risk_rules();
};

struct PipelineSettings {
    std::string observer;
    std::string interpreter;
    std::string zeitgeist;
    std::string listener;
    int max_critique_rounds = 1;
};

inline constexpr int kDefaultParallelism = 4;
inline constexpr int kMaxParallelism = 64;
inline constexpr int kMaxCritiqueRounds = 5;

/// Application configuration. Relative paths are resolved against the
/// directory holding the configuration file.
struct AppConfig {
    std::vector<BackendSpec> backends;
    std::filesystem::path prompts;
    std::filesystem::path schema;
    std::filesystem::path store_root;
    int parallelism = kDefaultParallelism;
    EvalSettings eval;
    FusionSettings fusion;
    PipelineSettings pipeline;

    /// Throws Config for an unknown name.
    const BackendSpec& backend(const std::string& name) const;
    bool has_backend(const std::string& name) const;

    PipelineConfig pipeline_config() const;
    FusionConfig fusion_config() const;
};

/// Parses and validates every field; nothing is written or contacted.
/// Throws Error(Config) naming the first offending field.
AppConfig config_from_json(const Json& j, const std::filesystem::path& base_dir);
AppConfig load_config(const std::filesystem::path& path);

/// Re-checks every invariant of an already built configuration.
void validate_config(const AppConfig& config);

/// Role names the command needs; Config when a role is unset.
void require_eval_roles(const AppConfig& config);
void require_pipeline_roles(const AppConfig& config);
void require_fusion_roles(const AppConfig& config);

}  // namespace htp
