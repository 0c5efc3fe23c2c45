// Error kinds shared by every module.
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wpsle {

enum class ErrorCode {
    AbsentExponent,
    DomainError,
    DegenerateC,
    NonConvergent,
    PoleError,
    GridTooCoarse,
    StencilOutOfGrid,
    NoValidAnnulus,
    SingularApproach,
    NonFinite,
    InsufficientLadder,
    ConfigError,
    CheckpointMismatch,
};

constexpr std::string_view to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::AbsentExponent: return "AbsentExponent";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DegenerateC: return "DegenerateC";
    case ErrorCode::NonConvergent: return "NonConvergent";
    case ErrorCode::PoleError: return "PoleError";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::StencilOutOfGrid: return "StencilOutOfGrid";
    case ErrorCode::NoValidAnnulus: return "NoValidAnnulus";
    case ErrorCode::SingularApproach: return "SingularApproach";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InsufficientLadder: return "InsufficientLadder";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace wpsle
