#include "truthprobe/error.hpp"

namespace truthprobe {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::format: return "format";
        case ErrorKind::missing_file: return "missing_file";
        case ErrorKind::shape_mismatch: return "shape_mismatch";
        case ErrorKind::non_finite: return "non_finite";
        case ErrorKind::out_of_range: return "out_of_range";
        case ErrorKind::unknown_enum: return "unknown_enum";
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::single_class: return "single_class";
        case ErrorKind::collinear: return "collinear";
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::empty: return "empty";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

}  // namespace truthprobe
