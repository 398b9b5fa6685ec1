// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tinyyolo/model_config.hpp"

namespace tinyyolo {

/// One device operating point and what was measured there.
struct DeviceMeasurement {
    std::string device;
    double voltage_v = 0.0;
    double clock_mhz = 0.0;
    double latency_ms = 0.0;
    double power_mw = 0.0;

    friend bool operator==(const DeviceMeasurement&, const DeviceMeasurement&) = default;
};

/// MACs / (latency_ms * 1e-3 * clock_mhz * 1e6).
double inference_efficiency(double macs, double latency_ms, double clock_mhz);
/// power_mw * 1000 / clock_mhz, in uW/MHz.
double power_efficiency(double power_mw, double clock_mhz);
/// power_mw * latency_ms, in uJ.
double energy_per_inference(double power_mw, double latency_ms);

struct Footprint {
    std::uint64_t weight_bytes = 0;      // int8 weights + 4-byte biases
    std::uint64_t input_bytes = 0;       // C*H*W at one byte per value
    std::uint64_t activation_bytes = 0;  // max over layers of int8 input + output
    std::vector<std::uint64_t> per_layer_activation;
};

Footprint footprint(const ModelConfig& cfg);

struct DeviceMetrics {
    DeviceMeasurement measurement;
    double power_efficiency_uw_per_mhz = 0.0;
    double inference_efficiency_mac_per_cycle = 0.0;  // from the model config's MAC count
    std::optional<double> reference_inference_efficiency;  // from reference_macs, when given
    double energy_uj = 0.0;
};

struct MetricsReport {
    std::vector<DeviceMetrics> devices;  // input order
    std::uint64_t model_macs = 0;
    std::optional<std::uint64_t> reference_macs;
    Footprint memory;
    /// ratio[i][j] = metric(j) / metric(i): how many times lower device i's latency (energy) is than j's.
    std::vector<std::vector<double>> latency_ratio;
    std::vector<std::vector<double>> energy_ratio;
    std::vector<std::string> notes;
};

/// Header `device,voltage_v,clock_mhz,latency_ms,power_mw`; '#' lines and blank lines are ignored.
/// Errors carry the 1-based line number.
std::vector<DeviceMeasurement> parse_measurements_csv(std::string_view text);
std::vector<DeviceMeasurement> load_measurements_csv(const std::string& path);

MetricsReport compare_report(const std::vector<DeviceMeasurement>& rows, const ModelConfig& cfg,
                             std::optional<std::uint64_t> reference_macs = std::nullopt);

/// Three significant figures, the precision report tables use.
std::string sig3(double v);

std::string to_csv(const MetricsReport& r);
/// Per-device table, ranked tables per metric, and ratio matrices.
std::string to_text(const MetricsReport& r);

}  // namespace tinyyolo
