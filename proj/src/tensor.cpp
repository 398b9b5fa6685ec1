// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/tensor.hpp"

#include <cmath>

namespace tinyyolo {

std::string to_string(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

void require_finite(std::span<const float> values, const char* where) {
    for (float v : values) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + where);
    }
}

}  // namespace tinyyolo
