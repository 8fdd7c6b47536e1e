#ifndef SPELUNK_ERROR_HPP
#define SPELUNK_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace spelunk {

enum class ErrorCode {
    ParseError,
    DimensionMismatch,
    NonFiniteWeight,
    InvalidParameter,
    NonOrthogonalAxes,
    UnsupportedActivation,
    IndexOutOfRange,
    InvalidRay,
    InvalidCamera,
    InvalidBounds,
    DepthOverflow,
    OnSurface,
    EmptyBand,
    ResolutionTooSmall,
    NoSurfaceFound,
    IOError,
    NoNetworks,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteWeight: return "NonFiniteWeight";
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::NonOrthogonalAxes: return "NonOrthogonalAxes";
        case ErrorCode::UnsupportedActivation: return "UnsupportedActivation";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::InvalidRay: return "InvalidRay";
        case ErrorCode::InvalidCamera: return "InvalidCamera";
        case ErrorCode::InvalidBounds: return "InvalidBounds";
        case ErrorCode::DepthOverflow: return "DepthOverflow";
        case ErrorCode::OnSurface: return "OnSurface";
        case ErrorCode::EmptyBand: return "EmptyBand";
        case ErrorCode::ResolutionTooSmall: return "ResolutionTooSmall";
        case ErrorCode::NoSurfaceFound: return "NoSurfaceFound";
        case ErrorCode::IOError: return "IOError";
        case ErrorCode::NoNetworks: return "NoNetworks";
    }
    return "Unknown";
}

/// All library failures are reported as this exception; `code()` identifies
/// the failure class.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace spelunk

#endif
