#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace execfee {

enum class ErrorKind {
    InvalidArgument,
    DegenerateRiccati,
    InvalidRegime,
    SingularTridiagonal,
    NonFinite,
    Overflow,
    RequiresZeroRate,
    OutOfGrid,
    Config,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (and tests)
/// can branch on the cause without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace execfee
