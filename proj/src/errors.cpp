#include "fedad/errors.hpp"

namespace fedad {

const char* category_name(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Shape: return "shape";
    case ErrorCategory::Numeric: return "numeric";
    }
    return "unknown";
}

int category_exit_code(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Io: return 3;
    case ErrorCategory::Data: return 4;
    case ErrorCategory::Shape: return 5;
    case ErrorCategory::Numeric: return 6;
    }
    return 1;
}

} // namespace fedad
