#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "htp/case_model.hpp"

namespace htp::testing {

/// Small stand-in image payload; the bytes are opaque to every module.
std::vector<std::uint8_t> tiny_png(std::uint8_t salt = 0);

CaseRecord make_case(const std::string& id, std::optional<std::string> expert_label = std::nullopt,
                     std::optional<std::string> expert_text = std::nullopt, std::string subject_note = {});

/// Directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace htp::testing
