// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sdfrecon {

// Bad command line / unknown subcommand. CLI exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid input data (files, arguments out of contract). CLI exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values detected during optimization. CLI exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation invoked in a state that forbids it (e.g. frozen grid).
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sdfrecon
