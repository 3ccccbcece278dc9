#include "rfmdp/error.hpp"

namespace rfmdp {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::range: return "range";
    case ErrorKind::domain: return "domain";
    case ErrorKind::validation: return "validation";
    case ErrorKind::parse: return "parse";
    case ErrorKind::config: return "config";
    case ErrorKind::size: return "size";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::solver: return "solver";
    case ErrorKind::divergence: return "divergence";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::range:
    case ErrorKind::domain:
    case ErrorKind::validation:
    case ErrorKind::parse: return 3;
    case ErrorKind::infeasible:
    case ErrorKind::solver:
    case ErrorKind::divergence: return 4;
    case ErrorKind::size: return 5;
    }
    return 1;
}

} // namespace rfmdp
