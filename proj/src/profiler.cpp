// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/profiler.hpp"

#include "tinyyolo/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tinyyolo {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string(what) + " must be positive");
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_number(const std::string& s, std::size_t line, const char* column) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(std::string("invalid number '") + s + "' in column " + column, line);
    if (!(v > 0.0) || !std::isfinite(v)) throw ParseError(std::string(column) + " must be positive", line);
    return v;
}

}  // namespace

double inference_efficiency(double macs, double latency_ms, double clock_mhz) {
    require_positive(macs, "MAC count");
    require_positive(latency_ms, "latency");
    require_positive(clock_mhz, "clock");
    return macs / (latency_ms * 1e-3 * clock_mhz * 1e6);
}

double power_efficiency(double power_mw, double clock_mhz) {
    require_positive(power_mw, "power");
    require_positive(clock_mhz, "clock");
    return power_mw * 1000.0 / clock_mhz;
}

double energy_per_inference(double power_mw, double latency_ms) {
    require_positive(power_mw, "power");
    require_positive(latency_ms, "latency");
    return power_mw * latency_ms;
}

Footprint footprint(const ModelConfig& cfg) {
    Footprint f;
    f.weight_bytes = int8_weight_bytes(cfg);
    f.input_bytes = shape_size(cfg.input_shape());
    const auto shapes = propagate_shapes(cfg);
    std::uint64_t in = f.input_bytes;
    for (const Shape& s : shapes) {
        const std::uint64_t out = shape_size(s);
        f.per_layer_activation.push_back(in + out);
        f.activation_bytes = std::max(f.activation_bytes, in + out);
        in = out;
    }
    return f;
}

std::vector<DeviceMeasurement> parse_measurements_csv(std::string_view text) {
    static const std::vector<std::string> header{"device", "voltage_v", "clock_mhz", "latency_ms", "power_mw"};
    std::vector<DeviceMeasurement> rows;
    bool seen_header = false;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        const std::string line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv(line);
        if (!seen_header) {
            if (cells != header) throw ParseError("expected header 'device,voltage_v,clock_mhz,latency_ms,power_mw'", line_no);
            seen_header = true;
            continue;
        }
        if (cells.size() != header.size())
            throw ParseError("expected 5 columns, got " + std::to_string(cells.size()), line_no);
        if (cells[0].empty()) throw ParseError("empty device name", line_no);
        rows.push_back({cells[0], parse_number(cells[1], line_no, "voltage_v"), parse_number(cells[2], line_no, "clock_mhz"),
                        parse_number(cells[3], line_no, "latency_ms"), parse_number(cells[4], line_no, "power_mw")});
    }
    if (!seen_header) throw ParseError("missing header row", line_no);
    return rows;
}

std::vector<DeviceMeasurement> load_measurements_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_measurements_csv(ss.str());
    } catch (const ParseError& e) {
        throw Error(path + ": " + e.what());
    }
}

MetricsReport compare_report(const std::vector<DeviceMeasurement>& rows, const ModelConfig& cfg,
                             std::optional<std::uint64_t> reference_macs) {
    if (rows.empty()) throw Error("need at least one measurement row");
    MetricsReport r;
    r.model_macs = count_macs(cfg).total;
    r.reference_macs = reference_macs;
    r.memory = footprint(cfg);
    for (const DeviceMeasurement& m : rows) {
        DeviceMetrics d;
        d.measurement = m;
        d.power_efficiency_uw_per_mhz = power_efficiency(m.power_mw, m.clock_mhz);
        d.inference_efficiency_mac_per_cycle = inference_efficiency(static_cast<double>(r.model_macs), m.latency_ms, m.clock_mhz);
        if (reference_macs)
            d.reference_inference_efficiency = inference_efficiency(static_cast<double>(*reference_macs), m.latency_ms, m.clock_mhz);
        d.energy_uj = energy_per_inference(m.power_mw, m.latency_ms);
        r.devices.push_back(d);
    }
    if (rows.size() > 1) {
        const std::size_t n = rows.size();
        r.latency_ratio.assign(n, std::vector<double>(n));
        r.energy_ratio.assign(n, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                r.latency_ratio[i][j] = r.devices[j].measurement.latency_ms / r.devices[i].measurement.latency_ms;
                r.energy_ratio[i][j] = r.devices[j].energy_uj / r.devices[i].energy_uj;
            }
    }
    if (reference_macs && *reference_macs != r.model_macs) {
        r.notes.push_back("model config '" + cfg.name + "' has " + std::to_string(r.model_macs) +
                          " MACs; reference MAC count is " + std::to_string(*reference_macs) +
                          ". Both inference efficiencies are reported.");
    }
    return r;
}

std::string sig3(double v) {
    char buf[48];
    if (v != 0.0 && std::fabs(v) >= 1000.0) {
        // keep large values in plain notation, rounded to 3 significant figures
        const int digits = static_cast<int>(std::floor(std::log10(std::fabs(v)))) + 1;
        const double unit = std::pow(10.0, digits - 3);
        std::snprintf(buf, sizeof buf, "%.0f", std::round(v / unit) * unit);
    } else {
        std::snprintf(buf, sizeof buf, "%.3g", v);
    }
    return buf;
}

std::string to_csv(const MetricsReport& r) {
    std::ostringstream os;
    os << "device,voltage_v,clock_mhz,latency_ms,power_mw,power_efficiency_uw_per_mhz,inference_efficiency_mac_per_cycle,"
          "reference_inference_efficiency_mac_per_cycle,energy_uj\n";
    char buf[512];
    for (const DeviceMetrics& d : r.devices) {
        const DeviceMeasurement& m = d.measurement;
        std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%s,%.6g\n", m.device.c_str(), m.voltage_v,
                      m.clock_mhz, m.latency_ms, m.power_mw, d.power_efficiency_uw_per_mhz,
                      d.inference_efficiency_mac_per_cycle,
                      d.reference_inference_efficiency ? std::to_string(*d.reference_inference_efficiency).c_str() : "",
                      d.energy_uj);
        os << buf;
    }
    return os.str();
}

namespace {

std::string table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> w;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (w.size() <= i) w.push_back(0);
            w[i] = std::max(w[i], r[i].size());
        }
    std::ostringstream os;
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
        for (std::size_t i = 0; i < rows[ri].size(); ++i) {
            const std::string& c = rows[ri][i];
            // first column left-aligned, numbers right-aligned
            if (i == 0) os << c << std::string(w[i] - c.size(), ' ');
            else os << "  " << std::string(w[i] - c.size(), ' ') << c;
        }
        os << '\n';
        if (ri == 0) os << std::string(std::accumulate(w.begin(), w.end(), std::size_t{0}) + 2 * (w.size() - 1), '-') << '\n';
    }
    return os.str();
}

template <class Key>
std::string ranked(const MetricsReport& r, const std::string& title, const std::string& unit, Key key, bool ascending) {
    std::vector<std::size_t> order(r.devices.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ka = key(r.devices[a]), kb = key(r.devices[b]);
        if (ka != kb) return ascending ? ka < kb : ka > kb;
        return r.devices[a].measurement.device < r.devices[b].measurement.device;
    });
    std::vector<std::vector<std::string>> rows{{"rank", "device", title + " [" + unit + "]"}};
    for (std::size_t i = 0; i < order.size(); ++i)
        rows.push_back({std::to_string(i + 1), r.devices[order[i]].measurement.device, sig3(key(r.devices[order[i]]))});
    return table(rows);
}

std::string ratio_table(const MetricsReport& r, const std::vector<std::vector<double>>& ratio) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"row vs column"};
    for (const auto& d : r.devices) header.push_back(d.measurement.device);
    rows.push_back(header);
    for (std::size_t i = 0; i < r.devices.size(); ++i) {
        std::vector<std::string> row{r.devices[i].measurement.device};
        for (std::size_t j = 0; j < r.devices.size(); ++j) row.push_back(i == j ? "-" : sig3(ratio[i][j]) + "x");
        rows.push_back(row);
    }
    return table(rows);
}

}  // namespace

std::string to_text(const MetricsReport& r) {
    std::ostringstream os;
    os << "Model: " << r.model_macs << " MACs";
    if (r.reference_macs) os << " (reference: " << *r.reference_macs << " MACs)";
    os << "\nMemory: weights " << r.memory.weight_bytes << " B, input " << r.memory.input_bytes << " B, activations "
       << r.memory.activation_bytes << " B (int8)\n\n";

    std::vector<std::vector<std::string>> rows{{"device", "V", "MHz", "latency [ms]", "power [mW]", "power eff. [uW/MHz]",
                                                "inf. eff. [MAC/cycle]", "ref. inf. eff. [MAC/cycle]", "energy [uJ/inf]"}};
    for (const DeviceMetrics& d : r.devices) {
        const DeviceMeasurement& m = d.measurement;
        rows.push_back({m.device, sig3(m.voltage_v), sig3(m.clock_mhz), sig3(m.latency_ms), sig3(m.power_mw),
                        sig3(d.power_efficiency_uw_per_mhz), sig3(d.inference_efficiency_mac_per_cycle),
                        d.reference_inference_efficiency ? sig3(*d.reference_inference_efficiency) : "-", sig3(d.energy_uj)});
    }
    os << table(rows) << '\n';

    os << "a) latency\n" << ranked(r, "latency", "ms", [](const DeviceMetrics& d) { return d.measurement.latency_ms; }, true) << '\n';
    const bool use_ref = r.reference_macs.has_value();
    os << "b) inference efficiency" << (use_ref ? " (reference MACs)" : "") << '\n'
       << ranked(r, "inference efficiency", "MAC/cycle",
                 [use_ref](const DeviceMetrics& d) {
                     return use_ref ? *d.reference_inference_efficiency : d.inference_efficiency_mac_per_cycle;
                 },
                 false)
       << '\n';
    os << "c) power efficiency\n"
       << ranked(r, "power efficiency", "uW/MHz", [](const DeviceMetrics& d) { return d.power_efficiency_uw_per_mhz; }, true)
       << '\n';
    os << "d) energy per inference\n"
       << ranked(r, "energy", "uJ", [](const DeviceMetrics& d) { return d.energy_uj; }, true);

    if (!r.latency_ratio.empty()) {
        os << "\nlatency ratio (column latency / row latency)\n" << ratio_table(r, r.latency_ratio);
        os << "\nenergy ratio (column energy / row energy)\n" << ratio_table(r, r.energy_ratio);
    }
    for (const std::string& n : r.notes) os << "\nnote: " << n << '\n';
    return os.str();
}

}  // namespace tinyyolo
