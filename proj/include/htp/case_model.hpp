#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "htp/canonical_json.hpp"
#include "htp/error.hpp"

namespace htp {

enum class Sex { M, F, U };

std::string_view to_string(Sex sex);

/// Subject identifier of the form `HTR-<age>-<M|F|U>-<YYYYMMDD>`.
class CaseId {
public:
    static constexpr int kMinAge = 3;
    static constexpr int kMaxAge = 120;

    /// Throws Error with kind MalformedCaseId, AgeOutOfRange or InvalidDate.
    static CaseId parse(std::string_view raw);

    const std::string& raw() const noexcept { return raw_; }
    int age() const noexcept { return age_; }
    Sex sex() const noexcept { return sex_; }
    std::chrono::year_month_day date() const noexcept { return date_; }

    /// Re-serializes from the parsed fields.
    std::string to_string() const;

    friend bool operator==(const CaseId& a, const CaseId& b) { return a.raw_ == b.raw_; }
    friend auto operator<=>(const CaseId& a, const CaseId& b) { return a.raw_ <=> b.raw_; }

private:
    CaseId() = default;

    std::string raw_;
    int age_ = 0;
    Sex sex_ = Sex::U;
    std::chrono::year_month_day date_{};
};

CaseId parse_case_id(std::string_view raw);

enum class MediaType { Png, Jpeg };

std::string_view to_string(MediaType type);
MediaType media_type_from_string(std::string_view name);
std::string_view file_extension(MediaType type);

/// Opaque image payload with its content digest.
class DrawingArtifact {
public:
    DrawingArtifact(std::vector<std::uint8_t> bytes, MediaType media_type);

    /// Rebuilds an artifact from stored bytes and a recorded digest; throws
    /// DigestMismatch when they disagree.
    static DrawingArtifact verified(std::vector<std::uint8_t> bytes, MediaType media_type,
                                    std::string_view expected_sha256);

    /// Media type inferred from the file extension (.png, .jpg, .jpeg).
    static DrawingArtifact load(const std::filesystem::path& path);

    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
    MediaType media_type() const noexcept { return media_type_; }
    const std::string& sha256() const noexcept { return sha256_; }

    friend bool operator==(const DrawingArtifact&, const DrawingArtifact&) = default;

private:
    std::vector<std::uint8_t> bytes_;
    MediaType media_type_;
    std::string sha256_;
};

/// Six radar dimensions in canonical order.
inline constexpr std::array<std::string_view, 6> kRadarDimensions = {
    "emotional_stability", "self_worth", "social_openness", "vitality", "resilience", "creativity",
};

struct RadarScores {
    int emotional_stability = 0;
    int self_worth = 0;
    int social_openness = 0;
    int vitality = 0;
    int resilience = 0;
    int creativity = 0;

    /// Values in canonical dimension order.
    std::array<int, 6> values() const;

    friend bool operator==(const RadarScores&, const RadarScores&) = default;
};

/// Accepts exactly the six canonical dimensions with values in [0, 100].
/// Missing dimensions are all named in the error message.
RadarScores validate_radar(const std::map<std::string, long long>& candidate);

/// Same rules applied to JSON: either a name -> score object or the canonical
/// array of {dimension, score} entries. Non-integer scores are rejected.
RadarScores validate_radar(const Json& candidate);

struct InterpretationText {
    std::string text;
    std::string source;
    std::string prompt_id;

    /// Throws EmptyText when `text` is blank after trimming.
    static InterpretationText make(std::string text, std::string source, std::string prompt_id);

    friend bool operator==(const InterpretationText&, const InterpretationText&) = default;
};

struct CaseRecord {
    CaseId id;
    DrawingArtifact image;
    std::string subject_note;
    std::optional<std::string> expert_label;
    /// Expert interpretation used by the alignment study.
    std::optional<std::string> expert_text;
    std::map<std::string, std::string> stage_outputs;

    friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

std::string trim(std::string_view text);

// Canonical JSON layouts. Radar scores serialize as an array in canonical
// dimension order.
Json to_json(const CaseId& id);
Json to_json(const RadarScores& radar);
Json to_json(const InterpretationText& text);
InterpretationText interpretation_from_json(const Json& j);

}  // namespace htp
