#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace htp {

enum class ErrorKind {
    // case identifiers and domain values
    MalformedCaseId,
    InvalidDate,
    AgeOutOfRange,
    MissingDimension,
    UnknownDimension,
    ValueOutOfRange,
    EmptyText,
    DigestMismatch,
    // backends
    Transport,
    Timeout,
    EmptyResponse,
    Unscripted,
    DimensionMismatch,
    NonFinite,
    WrongBackendKind,
    BadResponse,
    // numerics
    ZeroNorm,
    EmptyInput,
    InvalidArgument,
    InsufficientData,
    // pipeline and fusion
    SchemaViolation,
    DanglingEvidence,
    MissingSourceNote,
    StructureViolation,
    UnknownFinding,
    InsufficientInterpretations,
    PreconditionFailed,
    PromptTemplate,
    // store and configuration
    DuplicateId,
    NotFound,
    AlreadyExists,
    Io,
    Config,
};

std::string_view to_string(ErrorKind kind);

/// True for failures that originate in a model backend (transport, timeout,
/// malformed or empty responses). The CLI maps these to exit code 2.
bool is_backend_failure(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Error(ErrorKind kind, const std::string& message, int attempts)
        : std::runtime_error(message), kind_(kind), attempts_(attempts) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Number of backend attempts made before giving up, when applicable.
    std::optional<int> attempts() const noexcept { return attempts_; }

private:
    ErrorKind kind_;
    std::optional<int> attempts_;
};

}  // namespace htp
