#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace foilgen {

enum class Errc {
    MalformedFile,
    AmbiguousFormat,
    InvalidCount,
    DegenerateSurface,
    EmptyDataset,
    AllZero,
    BadWindow,
    ShapeMismatch,
    StaleCache,
    NonFiniteLoss,
    OutOfRangeProbability,
    IoFailure,
    VersionMismatch,
    CorruptChecksum,
    NotAffine,
    TooFewPoints,
    InsufficientData,
    TooFewSamples,
    NonFiniteResult,
    ExecutableMissing,
    Timeout,
    ParseFailure,
    DegenerateGeometry,
    NonPositiveTarget,
    EvaluatorFailure,
    ConfigInvalid,
    Unevaluated,
    DimensionMismatch,
    NoFilesFound,
    UnknownAirfoil,
    BadCoefficients,
};

inline std::string_view errc_name(Errc code) {
    switch (code) {
        case Errc::MalformedFile: return "MalformedFile";
        case Errc::AmbiguousFormat: return "AmbiguousFormat";
        case Errc::InvalidCount: return "InvalidCount";
        case Errc::DegenerateSurface: return "DegenerateSurface";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::AllZero: return "AllZero";
        case Errc::BadWindow: return "BadWindow";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::StaleCache: return "StaleCache";
        case Errc::NonFiniteLoss: return "NonFiniteLoss";
        case Errc::OutOfRangeProbability: return "OutOfRangeProbability";
        case Errc::IoFailure: return "IoFailure";
        case Errc::VersionMismatch: return "VersionMismatch";
        case Errc::CorruptChecksum: return "CorruptChecksum";
        case Errc::NotAffine: return "NotAffine";
        case Errc::TooFewPoints: return "TooFewPoints";
        case Errc::InsufficientData: return "InsufficientData";
        case Errc::TooFewSamples: return "TooFewSamples";
        case Errc::NonFiniteResult: return "NonFiniteResult";
        case Errc::ExecutableMissing: return "ExecutableMissing";
        case Errc::Timeout: return "Timeout";
        case Errc::ParseFailure: return "ParseFailure";
        case Errc::DegenerateGeometry: return "DegenerateGeometry";
        case Errc::NonPositiveTarget: return "NonPositiveTarget";
        case Errc::EvaluatorFailure: return "EvaluatorFailure";
        case Errc::ConfigInvalid: return "ConfigInvalid";
        case Errc::Unevaluated: return "Unevaluated";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::NoFilesFound: return "NoFilesFound";
        case Errc::UnknownAirfoil: return "UnknownAirfoil";
        case Errc::BadCoefficients: return "BadCoefficients";
    }
    return "Unknown";
}

/// Exception carrying a machine-readable error class alongside the message.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace foilgen
