// Per-step training telemetry: parameter/gradient norms, update ratios, and
// gate values per tensor, plus loss-spike detection and CSV export.  All of
// this is observation only — nothing here may touch training state.
#pragma once

#include <string>
#include <vector>

#include "wesar/matrix.hpp"

namespace wesar {

struct TensorTelemetry {
    std::string name;
    double param_norm = 0.0;
    double grad_norm = 0.0;       // post-clip
    double update_ratio = 0.0;    // ||applied delta|| / ||W before the step||
    double gate_value = 1.0;      // scalar gate, RMS of per-row gates, or 1
};

struct TelemetryRecord {
    long step = 0;
    double lr = 0.0;
    double loss = 0.0;            // training objective incl. any z term
    long long tokens_seen = 0;
    std::vector<TensorTelemetry> tensors;
};

// ||delta||_F / ||w||_F.  A zero-norm parameter cannot anchor a ratio, so
// that case reports +inf and warns on stderr rather than dividing by zero.
double update_ratio(const Matrix& delta, const Matrix& w);
double update_ratio_from_norms(double delta_norm, double w_norm);

struct SpikeDetector {
    int window = 100;        // steps of trailing history
    double delta = 0.5;      // nats above the trailing minimum
    long armed_after = 0;    // no events at or before this step
};

struct SpikeEvent {
    long step = 0;           // 1-based; entry i of the history is step i+1
    double loss = 0.0;
    double trailing_min = 0.0;
};

// Scans a full loss history (entry i = step i+1).  An event fires at step t
// when loss_t exceeds the minimum over the previous `window` steps by more
// than `delta`, and t > armed_after.  Requires at least `window` entries.
std::vector<SpikeEvent> detect_spike(const std::vector<double>& loss_history,
                                     const SpikeDetector& det);

// Fixed schema: step,lr,loss,tokens_seen then four columns per tensor
// (<name>.param_norm, .grad_norm, .update_ratio, .gate_value).  Floats use
// 9 significant digits; lines end with LF.  Tensor keys must agree across
// records.  Zero records still produce the header (taken from `header_from`
// when provided, else the file is just "step,lr,loss,tokens_seen").
void write_csv(const std::vector<TelemetryRecord>& records, const std::string& path,
               const std::vector<std::string>* header_from = nullptr);

void write_spikes(const std::vector<SpikeEvent>& events, const std::string& path);

// Minimal reader for round-trip tests and post-hoc checks: header names plus
// all-numeric rows ("inf" parses to infinity).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    int column(const std::string& name) const;  // -1 when absent
};
CsvTable read_csv(const std::string& path);

}  // namespace wesar
