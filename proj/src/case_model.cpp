#include "htp/case_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <regex>

namespace htp {
namespace {

int to_int(std::string_view digits) {
    int value = 0;
    std::from_chars(digits.data(), digits.data() + digits.size(), value);
    return value;
}

}  // namespace

std::string_view to_string(Sex sex) {
    switch (sex) {
        case Sex::M: return "M";
        case Sex::F: return "F";
        case Sex::U: return "U";
    }
    return "U";
}

CaseId CaseId::parse(std::string_view raw) {
    static const std::regex kPattern(R"(^HTR-([0-9]+)-([MFU])-([0-9]{8})$)");
    const std::string text(raw);
    std::smatch m;
    if (!std::regex_match(text, m, kPattern)) {
        throw Error(ErrorKind::MalformedCaseId, "malformed case id '" + text + "': expected HTR-<age>-<M|F|U>-<YYYYMMDD>");
    }
    const std::string age_text = m[1].str();
    if (age_text.size() > 1 && age_text.front() == '0') {
        throw Error(ErrorKind::MalformedCaseId, "malformed case id '" + text + "': age has leading zeros");
    }
    if (age_text.size() > 3 || to_int(age_text) < kMinAge || to_int(age_text) > kMaxAge) {
        throw Error(ErrorKind::AgeOutOfRange, "case id '" + text + "': age " + age_text + " outside [3, 120]");
    }

    const std::string date_text = m[3].str();
    const std::chrono::year_month_day date{
        std::chrono::year{to_int(std::string_view(date_text).substr(0, 4))},
        std::chrono::month{static_cast<unsigned>(to_int(std::string_view(date_text).substr(4, 2)))},
        std::chrono::day{static_cast<unsigned>(to_int(std::string_view(date_text).substr(6, 2)))}};
    if (!date.ok()) {
        throw Error(ErrorKind::InvalidDate, "case id '" + text + "': " + date_text + " is not a calendar date");
    }

    CaseId id;
    id.raw_ = text;
    id.age_ = to_int(age_text);
    const char sex = m[2].str().front();
    id.sex_ = sex == 'M' ? Sex::M : sex == 'F' ? Sex::F : Sex::U;
    id.date_ = date;
    return id;
}

std::string CaseId::to_string() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d%02u%02u", static_cast<int>(date_.year()),
                  static_cast<unsigned>(date_.month()), static_cast<unsigned>(date_.day()));
    return "HTR-" + std::to_string(age_) + "-" + std::string(htp::to_string(sex_)) + "-" + buf;
}

CaseId parse_case_id(std::string_view raw) { return CaseId::parse(raw); }

std::string_view to_string(MediaType type) { return type == MediaType::Png ? "png" : "jpeg"; }

MediaType media_type_from_string(std::string_view name) {
    if (name == "png") return MediaType::Png;
    if (name == "jpeg" || name == "jpg") return MediaType::Jpeg;
    throw Error(ErrorKind::InvalidArgument, "unsupported media type '" + std::string(name) + "'");
}

std::string_view file_extension(MediaType type) { return type == MediaType::Png ? ".png" : ".jpg"; }

DrawingArtifact::DrawingArtifact(std::vector<std::uint8_t> bytes, MediaType media_type)
    : bytes_(std::move(bytes)), media_type_(media_type), sha256_(sha256_hex(bytes_)) {}

DrawingArtifact DrawingArtifact::verified(std::vector<std::uint8_t> bytes, MediaType media_type,
                                          std::string_view expected_sha256) {
    DrawingArtifact artifact(std::move(bytes), media_type);
    if (artifact.sha256_ != expected_sha256) {
        throw Error(ErrorKind::DigestMismatch, "image digest mismatch: expected " + std::string(expected_sha256) +
                                                   ", got " + artifact.sha256_);
    }
    return artifact;
}

DrawingArtifact DrawingArtifact::load(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext.size() > 1) ext.erase(0, 1);
    const MediaType type = media_type_from_string(ext);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read image " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return DrawingArtifact(std::move(bytes), type);
}

std::array<int, 6> RadarScores::values() const {
    return {emotional_stability, self_worth, social_openness, vitality, resilience, creativity};
}

RadarScores validate_radar(const std::map<std::string, long long>& candidate) {
    std::vector<std::string> unknown;
    for (const auto& [name, value] : candidate) {
        if (std::find(kRadarDimensions.begin(), kRadarDimensions.end(), name) == kRadarDimensions.end()) {
            unknown.push_back(name);
        }
    }
    if (!unknown.empty()) {
        std::string names;
        for (const auto& n : unknown) names += (names.empty() ? "" : ", ") + n;
        throw Error(ErrorKind::UnknownDimension, "unknown radar dimension(s): " + names);
    }

    std::string missing;
    for (auto name : kRadarDimensions) {
        if (!candidate.contains(std::string(name))) missing += (missing.empty() ? "" : ", ") + std::string(name);
    }
    if (!missing.empty()) throw Error(ErrorKind::MissingDimension, "missing radar dimension(s): " + missing);

    std::array<int, 6> values{};
    for (std::size_t i = 0; i < kRadarDimensions.size(); ++i) {
        const auto v = candidate.at(std::string(kRadarDimensions[i]));
        if (v < 0 || v > 100) {
            throw Error(ErrorKind::ValueOutOfRange,
                        "radar " + std::string(kRadarDimensions[i]) + " = " + std::to_string(v) + " outside [0, 100]");
        }
        values[i] = static_cast<int>(v);
    }
    return RadarScores{values[0], values[1], values[2], values[3], values[4], values[5]};
}

RadarScores validate_radar(const Json& candidate) {
    std::map<std::string, long long> map;
    const auto put = [&map](const std::string& name, const Json& value) {
        if (!value.is_number_integer()) {
            throw Error(ErrorKind::ValueOutOfRange, "radar " + name + " must be an integer");
        }
        if (!map.emplace(name, value.get<long long>()).second) {
            throw Error(ErrorKind::StructureViolation, "radar dimension " + name + " listed twice");
        }
    };
    if (candidate.is_object()) {
        for (const auto& [name, value] : candidate.items()) put(name, value);
    } else if (candidate.is_array()) {
        for (const auto& entry : candidate) {
            if (!entry.is_object() || !entry.contains("dimension") || !entry.at("dimension").is_string() ||
                !entry.contains("score")) {
                throw Error(ErrorKind::StructureViolation, "radar entries need 'dimension' and 'score'");
            }
            put(entry.at("dimension").get<std::string>(), entry.at("score"));
        }
    } else {
        throw Error(ErrorKind::StructureViolation, "radar must be an object or an array of dimension entries");
    }
    return validate_radar(map);
}

InterpretationText InterpretationText::make(std::string text, std::string source, std::string prompt_id) {
    if (trim(text).empty()) throw Error(ErrorKind::EmptyText, "interpretation text is empty (source " + source + ")");
    return InterpretationText{std::move(text), std::move(source), std::move(prompt_id)};
}

std::string trim(std::string_view text) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    auto begin = std::find_if_not(text.begin(), text.end(), is_space);
    auto end = std::find_if_not(text.rbegin(), std::string_view::reverse_iterator(begin), is_space).base();
    return std::string(begin, end);
}

Json to_json(const CaseId& id) {
    char date[16];
    std::snprintf(date, sizeof date, "%04d-%02u-%02u", static_cast<int>(id.date().year()),
                  static_cast<unsigned>(id.date().month()), static_cast<unsigned>(id.date().day()));
    return Json{{"raw", id.raw()}, {"age", id.age()}, {"sex", std::string(to_string(id.sex()))}, {"date", date}};
}

Json to_json(const RadarScores& radar) {
    Json j = Json::array();
    const auto values = radar.values();
    for (std::size_t i = 0; i < kRadarDimensions.size(); ++i) {
        j.push_back(Json{{"dimension", std::string(kRadarDimensions[i])}, {"score", values[i]}});
    }
    return j;
}

Json to_json(const InterpretationText& text) {
    return Json{{"text", text.text}, {"source", text.source}, {"prompt_id", text.prompt_id}};
}

InterpretationText interpretation_from_json(const Json& j) {
    return InterpretationText::make(j.at("text").get<std::string>(), j.at("source").get<std::string>(),
                                    j.at("prompt_id").get<std::string>());
}

}  // namespace htp
