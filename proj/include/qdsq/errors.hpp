#pragma once

#include <stdexcept>
#include <string>

namespace qdsq {

// Bad input: parameter values, configs, grids. The CLI maps these to exit code 1.
struct invalid_parameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct config_error : invalid_parameter {
    config_error(const std::string& msg, int line_no = 0)
        : invalid_parameter(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
          line(line_no) {}
    int line;
};

struct grid_mismatch : invalid_parameter {
    using invalid_parameter::invalid_parameter;
};

// Unreadable input or unwritable output; the message names the path.
struct io_error : invalid_parameter {
    using invalid_parameter::invalid_parameter;
};

// Failures of the numerics proper. The CLI maps these to exit code 2.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numerical_blowup : numerical_error {
    explicit numerical_blowup(const std::string& field_name)
        : numerical_error("non-finite derivative in field '" + field_name + "'"), field(field_name) {}
    std::string field;
};

struct symmetry_drift : numerical_error {
    using numerical_error::numerical_error;
};

struct stiffness_failure : numerical_error {
    using numerical_error::numerical_error;
};

struct truncation_error : numerical_error {
    using numerical_error::numerical_error;
};

struct undefined_observable : std::domain_error {
    using std::domain_error::domain_error;
};

}  // namespace qdsq
