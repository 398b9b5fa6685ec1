// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/cli.hpp"

int main(int argc, char** argv) { return tinyyolo::cli::run(argc, argv); }
