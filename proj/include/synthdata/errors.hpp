#pragma once

#include <stdexcept>
#include <string>

namespace synthdata {

// Bad user input: schemas, configs, arguments. CLI maps these to exit code 2.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures during an otherwise valid run (divergence, IO, corrupt files). Exit code 1.
struct runtime_failure : std::runtime_error {
    explicit runtime_failure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace synthdata
