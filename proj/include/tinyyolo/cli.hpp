// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tinyyolo::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 1 validation failure or bad usage, 2 runtime error.
int run(int argc, char** argv);

/// Same as above with explicit arguments (without the program name) and streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tinyyolo::cli
