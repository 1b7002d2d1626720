#include "htp/error.hpp"

namespace htp {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedCaseId: return "malformed_case_id";
        case ErrorKind::InvalidDate: return "invalid_date";
        case ErrorKind::AgeOutOfRange: return "age_out_of_range";
        case ErrorKind::MissingDimension: return "missing_dimension";
        case ErrorKind::UnknownDimension: return "unknown_dimension";
        case ErrorKind::ValueOutOfRange: return "value_out_of_range";
        case ErrorKind::EmptyText: return "empty_text";
        case ErrorKind::DigestMismatch: return "digest_mismatch";
        case ErrorKind::Transport: return "transport";
        case ErrorKind::Timeout: return "timeout";
        case ErrorKind::EmptyResponse: return "empty_response";
        case ErrorKind::Unscripted: return "unscripted_request";
        case ErrorKind::DimensionMismatch: return "dimension_mismatch";
        case ErrorKind::NonFinite: return "non_finite_entry";
        case ErrorKind::WrongBackendKind: return "wrong_backend_kind";
        case ErrorKind::BadResponse: return "bad_response";
        case ErrorKind::ZeroNorm: return "zero_norm";
        case ErrorKind::EmptyInput: return "empty_input";
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::InsufficientData: return "insufficient_data";
        case ErrorKind::SchemaViolation: return "schema_violation";
        case ErrorKind::DanglingEvidence: return "dangling_evidence";
        case ErrorKind::MissingSourceNote: return "missing_source_note";
        case ErrorKind::StructureViolation: return "structure_violation";
        case ErrorKind::UnknownFinding: return "unknown_finding";
        case ErrorKind::InsufficientInterpretations: return "insufficient_interpretations";
        case ErrorKind::PreconditionFailed: return "precondition_failed";
        case ErrorKind::PromptTemplate: return "prompt_template";
        case ErrorKind::DuplicateId: return "duplicate_id";
        case ErrorKind::NotFound: return "not_found";
        case ErrorKind::AlreadyExists: return "already_exists";
        case ErrorKind::Io: return "io";
        case ErrorKind::Config: return "config";
    }
    return "unknown";
}

bool is_backend_failure(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Transport:
        case ErrorKind::Timeout:
        case ErrorKind::EmptyResponse:
        case ErrorKind::Unscripted:
        case ErrorKind::DimensionMismatch:
        case ErrorKind::NonFinite:
        case ErrorKind::BadResponse:
        case ErrorKind::InsufficientInterpretations:
            return true;
        default:
            return false;
    }
}

}  // namespace htp
