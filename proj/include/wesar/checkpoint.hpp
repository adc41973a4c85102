// Checkpoint container: a text header carrying the model-defining config and
// tensor shapes, followed by raw little-endian float64 payloads.  Save and
// load round-trip bit-exactly, which is what makes run determinism checkable
// by comparing files.
#pragma once

#include <string>

#include "wesar/config.hpp"
#include "wesar/params.hpp"

namespace wesar {

struct Checkpoint {
    RunConfig cfg;   // model./init./reparam./optim. keys; run.*/telemetry.* stay at defaults
    Params params;
};

void save_checkpoint(const Params& p, const RunConfig& cfg, const std::string& path);

// Rebuilds Params from the embedded config, then fills weights, gates, and
// power-iteration state from the payload.  Any mismatch between header and
// payload is a hard error.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace wesar
