#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace truthprobe {

enum class ErrorKind {
    format,            // malformed battery/CSV/JSON input
    missing_file,      // expected file absent
    shape_mismatch,    // matrix size disagrees with manifest
    non_finite,        // NaN/Inf in activations or inputs
    out_of_range,      // numeric field outside its domain
    unknown_enum,      // unrecognized enum string
    invalid_argument,  // precondition violated by caller
    single_class,      // fit needs both labels (or both polarities)
    collinear,         // TTPD design matrix is rank deficient
    dimension,         // vector length disagrees with probe
    empty,             // nothing left to work on
    io,                // unwritable path, short read/write
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace truthprobe
