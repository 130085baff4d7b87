#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kpzcond {

enum class ErrorCode {
    InvalidArgument,
    OutOfRange,
    DimensionTooLarge,
    CostGuard,
    NonFinite,
    Divergent,
    BlowUp,
    InsufficientRange,
    ResidualTooLarge,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by a rejected input rather than by a failed
/// numerical diagnostic. The CLI maps these to different exit codes.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace kpzcond
