#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "htp/canonical_json.hpp"

namespace htp {

enum class LeafType { Enum, Boolean, Number, Note };

std::string_view to_string(LeafType type);

/// One observation point, addressed by its dotted path (e.g. `house.roof.style`).
struct LeafSpec {
    std::string path;
    LeafType type = LeafType::Note;
    std::vector<std::string> values;  // enum members
    std::string unit;                 // numbers only
    std::optional<double> min;
    std::optional<double> max;
};

class ObservationSchema {
public:
    /// Throws SchemaViolation for a leaf without a valid type and DuplicateId
    /// for a repeated path.
    static ObservationSchema from_json(const Json& doc);
    static ObservationSchema load(const std::filesystem::path& path);

    const std::string& version() const noexcept { return version_; }
    bool reconstruction() const noexcept { return reconstruction_; }
    const std::vector<std::string>& categories() const noexcept { return categories_; }
    /// Leaves in declaration order.
    const std::vector<LeafSpec>& leaves() const noexcept { return leaves_; }
    std::size_t leaf_count() const noexcept { return leaves_.size(); }
    const LeafSpec* find(const std::string& path) const;

private:
    std::string version_;
    bool reconstruction_ = false;
    std::vector<std::string> categories_;
    std::vector<LeafSpec> leaves_;
    std::map<std::string, std::size_t> index_;
};

enum class ViolationKind { UnknownPath, TypeMismatch, OutOfRange };

std::string_view to_string(ViolationKind kind);

struct SchemaViolation {
    std::string path;
    ViolationKind kind;
    std::string detail;
};

/// Checks a path -> value object against the schema. An empty vector means
/// the values conform; otherwise every violation is listed in path order.
std::vector<SchemaViolation> validate_observation(const Json& values, const ObservationSchema& schema);

/// "path (kind: detail); ..." for error messages.
std::string describe(const std::vector<SchemaViolation>& violations);

}  // namespace htp
