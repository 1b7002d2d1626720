#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "htp/config.hpp"
#include "support/fixtures.hpp"

namespace htp::testing {

/// Alignment fixture cases: two agree perfectly with their expert text, one is
/// orthogonal to it.
std::vector<CaseRecord> study_cases();

/// A self-contained directory with htp.json, a case store seeded with the
/// HTR-38, practitioner and study cases, and mock scripts recorded from the
/// canned fixtures so every command runs offline.
class Workspace {
public:
    Workspace();

    const std::filesystem::path& root() const { return dir_.path(); }
    std::filesystem::path config_path() const { return root() / "htp.json"; }
    std::filesystem::path store_root() const { return root() / "store"; }
    std::filesystem::path mocks() const { return root() / "mocks"; }
    AppConfig config() const { return load_config(config_path()); }

    /// Rewrites htp.json after `edit` mutated its JSON.
    void edit_config(const std::function<void(Json&)>& edit) const;

private:
    TempDir dir_;
};

/// Runs the htp executable; stdout and stderr are captured together.
struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::filesystem::path& binary, const std::vector<std::string>& args,
                  const std::filesystem::path& cwd);

}  // namespace htp::testing
