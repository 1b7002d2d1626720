#include "support/fixtures.hpp"

#include <atomic>
#include <random>

namespace htp::testing {

std::vector<std::uint8_t> tiny_png(std::uint8_t salt) {
    std::vector<std::uint8_t> bytes = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    for (std::uint8_t i = 0; i < 56; ++i) bytes.push_back(static_cast<std::uint8_t>(i * 37 + salt));
    return bytes;
}

CaseRecord make_case(const std::string& id, std::optional<std::string> expert_label,
                     std::optional<std::string> expert_text, std::string subject_note) {
    const auto parsed = parse_case_id(id);
    return CaseRecord{parsed,
                      DrawingArtifact(tiny_png(static_cast<std::uint8_t>(std::hash<std::string>{}(id))), MediaType::Png),
                      std::move(subject_note),
                      std::move(expert_label),
                      std::move(expert_text),
                      {}};
}

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("htp-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace htp::testing
