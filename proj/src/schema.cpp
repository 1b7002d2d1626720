#include "htp/schema.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "htp/error.hpp"

namespace htp {
namespace {

LeafType leaf_type_from(const std::string& name, const std::string& path) {
    if (name == "enum") return LeafType::Enum;
    if (name == "boolean") return LeafType::Boolean;
    if (name == "number") return LeafType::Number;
    if (name == "note") return LeafType::Note;
    throw Error(ErrorKind::SchemaViolation, "schema leaf " + path + " declares unknown type '" + name + "'");
}

void collect(const Json& group, const std::string& prefix, std::vector<LeafSpec>& out) {
    const std::string base = prefix.empty() ? group.at("name").get<std::string>()
                                            : prefix + "." + group.at("name").get<std::string>();
    for (const auto& leaf : group.value("leaves", Json::array())) {
        LeafSpec spec;
        spec.path = base + "." + leaf.at("name").get<std::string>();
        if (!leaf.contains("type") || !leaf.at("type").is_string()) {
            throw Error(ErrorKind::SchemaViolation, "schema leaf " + spec.path + " declares no value type");
        }
        spec.type = leaf_type_from(leaf.at("type").get<std::string>(), spec.path);
        if (spec.type == LeafType::Enum) {
            spec.values = leaf.at("values").get<std::vector<std::string>>();
            if (spec.values.empty()) {
                throw Error(ErrorKind::SchemaViolation, "enum leaf " + spec.path + " has no values");
            }
        }
        if (spec.type == LeafType::Number) {
            spec.unit = leaf.value("unit", "");
            if (leaf.contains("min")) spec.min = leaf.at("min").get<double>();
            if (leaf.contains("max")) spec.max = leaf.at("max").get<double>();
        }
        out.push_back(std::move(spec));
    }
    for (const auto& child : group.value("groups", Json::array())) collect(child, base, out);
}

std::string type_name(const Json& v) { return v.type_name(); }

}  // namespace

std::string_view to_string(LeafType type) {
    switch (type) {
        case LeafType::Enum: return "enum";
        case LeafType::Boolean: return "boolean";
        case LeafType::Number: return "number";
        case LeafType::Note: return "note";
    }
    return "note";
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::UnknownPath: return "unknown_path";
        case ViolationKind::TypeMismatch: return "type_mismatch";
        case ViolationKind::OutOfRange: return "out_of_range";
    }
    return "unknown_path";
}

ObservationSchema ObservationSchema::from_json(const Json& doc) {
    ObservationSchema schema;
    try {
        schema.version_ = doc.at("version").get<std::string>();
        schema.reconstruction_ = doc.value("reconstruction", false);
        for (const auto& category : doc.at("categories")) {
            schema.categories_.push_back(category.at("name").get<std::string>());
            collect(category, "", schema.leaves_);
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::SchemaViolation, std::string("malformed schema: ") + e.what());
    }
    for (std::size_t i = 0; i < schema.leaves_.size(); ++i) {
        if (!schema.index_.emplace(schema.leaves_[i].path, i).second) {
            throw Error(ErrorKind::DuplicateId, "schema leaf path " + schema.leaves_[i].path + " is declared twice");
        }
    }
    return schema;
}

ObservationSchema ObservationSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read schema file " + path.string());
    try {
        return from_json(Json::parse(in));
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::SchemaViolation, "schema " + path.string() + " is not JSON: " + e.what());
    }
}

const LeafSpec* ObservationSchema::find(const std::string& path) const {
    const auto it = index_.find(path);
    return it == index_.end() ? nullptr : &leaves_[it->second];
}

std::vector<SchemaViolation> validate_observation(const Json& values, const ObservationSchema& schema) {
    std::vector<SchemaViolation> out;
    if (!values.is_object()) {
        out.push_back({"", ViolationKind::TypeMismatch, "observation values must be an object"});
        return out;
    }
    for (const auto& [path, value] : values.items()) {
        const LeafSpec* leaf = schema.find(path);
        if (!leaf) {
            out.push_back({path, ViolationKind::UnknownPath, "not a leaf of schema " + schema.version()});
            continue;
        }
        const auto mismatch = [&] {
            out.push_back({path, ViolationKind::TypeMismatch,
                           "expected " + std::string(to_string(leaf->type)) + ", got " + type_name(value)});
        };
        switch (leaf->type) {
            case LeafType::Boolean:
                if (!value.is_boolean()) mismatch();
                break;
            case LeafType::Note:
                if (!value.is_string()) mismatch();
                break;
            case LeafType::Enum:
                if (!value.is_string()) {
                    mismatch();
                } else if (std::find(leaf->values.begin(), leaf->values.end(), value.get<std::string>()) ==
                           leaf->values.end()) {
                    out.push_back({path, ViolationKind::TypeMismatch,
                                   "'" + value.get<std::string>() + "' is not a member of the enum"});
                }
                break;
            case LeafType::Number: {
                if (!value.is_number()) {
                    mismatch();
                    break;
                }
                const double x = value.get<double>();
                if (!std::isfinite(x) || (leaf->min && x < *leaf->min) || (leaf->max && x > *leaf->max)) {
                    out.push_back({path, ViolationKind::OutOfRange, "value outside the declared range"});
                }
                break;
            }
        }
    }
    return out;
}

std::string describe(const std::vector<SchemaViolation>& violations) {
    std::string out;
    for (const auto& v : violations) {
        if (!out.empty()) out += "; ";
        out += v.path + " (" + std::string(to_string(v.kind)) + ": " + v.detail + ")";
    }
    return out;
}

}  // namespace htp
