#include "kpzcond/errors.hpp"

namespace kpzcond {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
        case ErrorCode::CostGuard: return "CostGuard";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::Divergent: return "Divergent";
        case ErrorCode::BlowUp: return "BlowUp";
        case ErrorCode::InsufficientRange: return "InsufficientRange";
        case ErrorCode::ResidualTooLarge: return "ResidualTooLarge";
    }
    return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::OutOfRange:
        case ErrorCode::DimensionTooLarge:
        case ErrorCode::CostGuard:
            return true;
        default:
            return false;
    }
}

}  // namespace kpzcond
