#include "wesar/telemetry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace wesar {

double update_ratio_from_norms(double delta_norm, double w_norm) {
    if (w_norm == 0.0) {
        std::cerr << "telemetry: update ratio against a zero-norm parameter; reporting inf\n";
        return std::numeric_limits<double>::infinity();
    }
    return delta_norm / w_norm;
}

double update_ratio(const Matrix& delta, const Matrix& w) {
    if (delta.rows != w.rows || delta.cols != w.cols) {
        throw std::invalid_argument("telemetry: update_ratio shape mismatch");
    }
    return update_ratio_from_norms(fro_norm(delta), fro_norm(w));
}

std::vector<SpikeEvent> detect_spike(const std::vector<double>& loss_history,
                                     const SpikeDetector& det) {
    if (det.window < 1) {
        throw std::invalid_argument("telemetry: spike window must be >= 1");
    }
    if (loss_history.size() < static_cast<std::size_t>(det.window)) {
        throw std::invalid_argument("telemetry: loss history shorter than the spike window");
    }
    std::vector<SpikeEvent> events;
    for (std::size_t t = 1; t < loss_history.size(); ++t) {
        long step = static_cast<long>(t) + 1;
        if (step <= det.armed_after) continue;
        std::size_t lo = (t > static_cast<std::size_t>(det.window))
                             ? t - static_cast<std::size_t>(det.window)
                             : 0;
        double m = loss_history[lo];
        for (std::size_t j = lo + 1; j < t; ++j) m = std::min(m, loss_history[j]);
        if (loss_history[t] > m + det.delta) {
            events.push_back(SpikeEvent{step, loss_history[t], m});
        }
    }
    return events;
}

namespace {

// 9 significant digits, enough to reconstruct the shape of every curve while
// keeping files diffable; byte-stable across runs for a given value.
std::string fmt9(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: no CRLF translation anywhere
    if (!out) {
        throw std::runtime_error("telemetry: cannot open for writing: " + path);
    }
    return out;
}

}  // namespace

void write_csv(const std::vector<TelemetryRecord>& records, const std::string& path,
               const std::vector<std::string>* header_from) {
    std::ofstream out = open_out(path);
    std::vector<std::string> names;
    if (!records.empty()) {
        for (const TensorTelemetry& t : records.front().tensors) names.push_back(t.name);
    } else if (header_from != nullptr) {
        names = *header_from;
    }
    out << "step,lr,loss,tokens_seen";
    for (const std::string& n : names) {
        out << ',' << n << ".param_norm," << n << ".grad_norm," << n << ".update_ratio," << n
            << ".gate_value";
    }
    out << '\n';
    for (const TelemetryRecord& r : records) {
        if (r.tensors.size() != names.size()) {
            throw std::invalid_argument("telemetry: inconsistent tensor set across records");
        }
        out << r.step << ',' << fmt9(r.lr) << ',' << fmt9(r.loss) << ',' << r.tokens_seen;
        for (std::size_t i = 0; i < r.tensors.size(); ++i) {
            const TensorTelemetry& t = r.tensors[i];
            if (t.name != names[i]) {
                throw std::invalid_argument("telemetry: inconsistent tensor set across records");
            }
            out << ',' << fmt9(t.param_norm) << ',' << fmt9(t.grad_norm) << ','
                << fmt9(t.update_ratio) << ',' << fmt9(t.gate_value);
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("telemetry: write failed: " + path);
    }
}

void write_spikes(const std::vector<SpikeEvent>& events, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "step,loss,trailing_min\n";
    for (const SpikeEvent& e : events) {
        out << e.step << ',' << fmt9(e.loss) << ',' << fmt9(e.trailing_min) << '\n';
    }
    if (!out) {
        throw std::runtime_error("telemetry: write failed: " + path);
    }
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("telemetry: cannot open for reading: " + path);
    }
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("telemetry: empty csv: " + path);
    }
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream rs(line);
        while (std::getline(rs, cell, ',')) {
            char* end = nullptr;
            double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) {
                throw std::runtime_error("telemetry: non-numeric cell in " + path + ": " + cell);
            }
            row.push_back(v);
        }
        if (row.size() != table.header.size()) {
            throw std::runtime_error("telemetry: ragged row in " + path);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace wesar
