#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rfmdp {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
    range,       ///< index or value outside its declared range
    domain,      ///< argument outside the mathematical domain of an operation
    validation,  ///< model violates a structural invariant
    parse,       ///< model/config file could not be read
    config,      ///< incompatible options (e.g. backend vs. set kind)
    size,        ///< a configured cap was exceeded
    infeasible,  ///< an uncertainty set has empty intersection with the simplex
    solver,      ///< numerical breakdown or iteration cap
    divergence,  ///< values diverged (expected-steps objective)
};

std::string_view to_string(ErrorKind kind);

/// Process exit code for a failure kind: 2 config, 3 model, 4 solver, 5 cap.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace rfmdp
