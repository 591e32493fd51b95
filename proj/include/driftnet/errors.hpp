#pragma once

#include <stdexcept>

namespace driftnet {

// Domain error taxonomy. Plain precondition violations (shape mismatches,
// bad scalar arguments) use std::invalid_argument directly.

struct InsufficientSamples : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenerationFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoKnowledge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateTrace : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace driftnet
