// End-to-end harness: byte corpus ingestion, batch sampling, the training
// loop (model + optimizer + telemetry + spike scan), and held-out
// perplexity.  Everything is deterministic from (config, corpus bytes).
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wesar/config.hpp"
#include "wesar/model.hpp"
#include "wesar/params.hpp"
#include "wesar/rng.hpp"
#include "wesar/telemetry.hpp"

namespace wesar {

struct Corpus {
    std::vector<unsigned char> bytes;   // vocabulary = the 256 byte values
    std::size_t train_len = 0;          // [0, train_len) trains; the tail is held out

    std::size_t heldout_len() const { return bytes.size() - train_len; }
    const unsigned char* heldout() const { return bytes.data() + train_len; }
};

// Reads the whole file; the final heldout_fraction of bytes becomes the
// held-out tail.  Files smaller than 10*ctx bytes are refused up front.
Corpus load_corpus(const std::string& path, double heldout_fraction, int ctx);

// Fills nseq rows of ctx inputs and ctx next-byte targets, each row drawn at
// a uniform random offset (with replacement) inside the train span.
void next_batch(const Corpus& c, int ctx, int nseq, Rng& rng, std::vector<int>& tokens,
                std::vector<int>& targets);

struct TrainResult {
    Params params;
    std::vector<TelemetryRecord> records;  // one per recorded step (stride-thinned)
    std::vector<double> loss_history;      // every step, index i = step i+1
    std::vector<SpikeEvent> spikes;
    double final_loss = 0.0;
    long steps_run = 0;
    bool diverged = false;
    std::string divergence_note;
};

// Runs the whole schedule (or stops early on divergence).  Pure computation:
// file outputs (checkpoint/CSV/spikes) are the caller's business.  progress,
// when set, is called once per completed step (observation only).
using ProgressFn = std::function<void(long step, double loss)>;
TrainResult train_run(const RunConfig& cfg, const ProgressFn& progress = {});

// exp(mean next-token NLL) over non-overlapping ctx-token windows of the
// held-out tail; the z regularizer is excluded from the metric.  Each window
// needs ctx+1 bytes (inputs plus one lookahead byte for the last target).
double eval_perplexity(Model& m, const Corpus& corpus);

}  // namespace wesar
