#pragma once

#include <stdexcept>
#include <string>

namespace cranberry {

// Bad input data, malformed files, failed fits. CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A pipeline stage failed mid-run. CLI maps this to exit code 1.
struct PipelineError : std::runtime_error {
    PipelineError(std::string stage_name, const std::string& what)
        : std::runtime_error("stage '" + stage_name + "': " + what),
          stage(std::move(stage_name)) {}
    std::string stage;
};

}  // namespace cranberry
