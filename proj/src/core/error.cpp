#include "core/error.hpp"

namespace pg {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension error";
        case ErrorKind::Contract: return "contract error";
        case ErrorKind::Config: return "configuration error";
        case ErrorKind::DegenerateInput: return "degenerate input";
        case ErrorKind::UnsatisfiableConstraint: return "unsatisfiable constraint";
        case ErrorKind::NoDrawingPixels: return "no drawing pixels";
        case ErrorKind::Incompatible: return "incompatible artifact";
        case ErrorKind::Numeric: return "numeric failure";
        case ErrorKind::Io: return "I/O error";
    }
    return "error";
}

}  // namespace pg
