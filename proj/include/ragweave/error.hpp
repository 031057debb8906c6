#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ragweave {

/// Error classes surfaced across the library. Tests match on the code, not
/// the message.
enum class Errc {
    // token_grammar
    InvalidUtf8,
    UnbalancedSpan,
    NestedSpan,
    InterleavedSpan,
    InvalidTrajectory,
    // decode_engine
    GeneratorViolation,
    DisallowedModality,
    RetrieverError,
    // retrieval_core
    DimensionMismatch,
    DuplicateDocId,
    InvalidEmbedding,
    EmbedderError,
    // region_ops
    DecodeFailure,
    InvalidBox,
    // loss_kit
    MalformedSpans,
    AllMasked,
    ShapeMismatch,
    // eval_harness / behavior_analytics
    EmptyInput,
    UnknownBucketField,
    // sft_builder
    ClientError,
    UnparseableLabel,
    NoValidCandidate,
    AssignmentCountMismatch,
    // shared
    IoError,
    ConfigError,
};

constexpr std::string_view errc_name(Errc code) {
    switch (code) {
        case Errc::InvalidUtf8: return "InvalidUtf8";
        case Errc::UnbalancedSpan: return "UnbalancedSpan";
        case Errc::NestedSpan: return "NestedSpan";
        case Errc::InterleavedSpan: return "InterleavedSpan";
        case Errc::InvalidTrajectory: return "InvalidTrajectory";
        case Errc::GeneratorViolation: return "GeneratorViolation";
        case Errc::DisallowedModality: return "DisallowedModality";
        case Errc::RetrieverError: return "RetrieverError";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::DuplicateDocId: return "DuplicateDocId";
        case Errc::InvalidEmbedding: return "InvalidEmbedding";
        case Errc::EmbedderError: return "EmbedderError";
        case Errc::DecodeFailure: return "DecodeFailure";
        case Errc::InvalidBox: return "InvalidBox";
        case Errc::MalformedSpans: return "MalformedSpans";
        case Errc::AllMasked: return "AllMasked";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::UnknownBucketField: return "UnknownBucketField";
        case Errc::ClientError: return "ClientError";
        case Errc::UnparseableLabel: return "UnparseableLabel";
        case Errc::NoValidCandidate: return "NoValidCandidate";
        case Errc::AssignmentCountMismatch: return "AssignmentCountMismatch";
        case Errc::IoError: return "IoError";
        case Errc::ConfigError: return "ConfigError";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message),
          code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

} // namespace ragweave
