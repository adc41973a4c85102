#include "wesar/trainer.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "wesar/init.hpp"
#include "wesar/optim.hpp"

namespace wesar {

Corpus load_corpus(const std::string& path, double heldout_fraction, int ctx) {
    if (heldout_fraction < 0.0 || heldout_fraction >= 1.0) {
        throw std::invalid_argument("corpus: heldout fraction must lie in [0, 1)");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("corpus: cannot open: " + path);
    }
    Corpus c;
    c.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (c.bytes.size() < static_cast<std::size_t>(10) * static_cast<std::size_t>(ctx)) {
        throw std::runtime_error("corpus: " + path + " has " + std::to_string(c.bytes.size()) +
                                 " bytes; need at least 10*ctx = " + std::to_string(10 * ctx));
    }
    // The tail split needs no randomness, so it is trivially reproducible.
    std::size_t heldout =
        static_cast<std::size_t>(heldout_fraction * static_cast<double>(c.bytes.size()));
    c.train_len = c.bytes.size() - heldout;
    return c;
}

void next_batch(const Corpus& c, int ctx, int nseq, Rng& rng, std::vector<int>& tokens,
                std::vector<int>& targets) {
    if (ctx < 1 || nseq < 1) {
        throw std::invalid_argument("batch: ctx and sequence count must be positive");
    }
    std::size_t need = static_cast<std::size_t>(ctx) + 1;  // inputs + one lookahead target
    if (c.train_len < need) {
        throw std::runtime_error("batch: train span shorter than one ctx+1 window");
    }
    tokens.resize(static_cast<std::size_t>(nseq) * ctx);
    targets.resize(static_cast<std::size_t>(nseq) * ctx);
    std::size_t span = c.train_len - need + 1;  // admissible offsets
    for (int s = 0; s < nseq; ++s) {
        std::size_t off = static_cast<std::size_t>(bounded_u64(rng, span));
        int* tok = tokens.data() + static_cast<std::size_t>(s) * ctx;
        int* tgt = targets.data() + static_cast<std::size_t>(s) * ctx;
        for (int j = 0; j < ctx; ++j) {
            tok[j] = c.bytes[off + static_cast<std::size_t>(j)];
            tgt[j] = c.bytes[off + static_cast<std::size_t>(j) + 1];
        }
    }
}

TrainResult train_run(const RunConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    if (cfg.data_path.empty()) {
        throw ConfigError("config: data.path is required for training");
    }
    Corpus corpus = load_corpus(cfg.data_path, cfg.heldout_fraction, cfg.model.ctx);

    TrainResult out;
    out.params = make_params(cfg.model, cfg.reparam);
    Rng root(cfg.seed);
    Rng init_rng = root.split("init");
    initialize_model(out.params, cfg.init_spec(), init_rng);
    Model model(out.params, cfg.init_spec(), cfg.optim.z_coeff);
    Optimizer opt(out.params, cfg.optim);
    Rng batch_rng = root.split("batch");

    const int ctx = cfg.model.ctx;
    const int nseq = cfg.optim.batch_tokens / ctx;
    std::vector<int> tokens, targets;
    long long tokens_seen = 0;
    out.loss_history.reserve(static_cast<std::size_t>(cfg.optim.total_steps));

    for (long step = 1; step <= cfg.optim.total_steps; ++step) {
        next_batch(corpus, ctx, nseq, batch_rng, tokens, targets);
        model.begin_step();
        double loss_sum = 0.0;
        for (int s = 0; s < nseq; ++s) {
            loss_sum += model.forward_loss(tokens.data() + static_cast<std::size_t>(s) * ctx,
                                           targets.data() + static_cast<std::size_t>(s) * ctx, ctx);
            model.backward();
        }
        model.end_step(nseq);
        double step_loss = loss_sum / nseq;
        out.loss_history.push_back(step_loss);
        tokens_seen += cfg.optim.batch_tokens;
        out.steps_run = step;
        out.final_loss = step_loss;
        if (!std::isfinite(step_loss)) {
            out.diverged = true;
            out.divergence_note = "non-finite loss at step " + std::to_string(step);
            break;
        }
        Optimizer::StepStats st;
        try {
            st = opt.step(step);
        } catch (const std::runtime_error& e) {
            out.diverged = true;
            out.divergence_note = std::string(e.what()) + " at step " + std::to_string(step);
            break;
        }
        if (cfg.telemetry_enabled && (step - 1) % cfg.telemetry_stride == 0) {
            TelemetryRecord rec;
            rec.step = step;
            rec.lr = st.lr;
            rec.loss = step_loss;
            rec.tokens_seen = tokens_seen;
            rec.tensors.reserve(out.params.tensors.size());
            for (std::size_t i = 0; i < out.params.tensors.size(); ++i) {
                TensorTelemetry t;
                t.name = out.params.tensors[i].name;
                t.param_norm = st.tensors[i].param_norm;
                t.grad_norm = st.tensors[i].grad_norm;
                t.update_ratio =
                    update_ratio_from_norms(st.tensors[i].update_norm, st.tensors[i].param_norm);
                t.gate_value = st.tensors[i].gate_value;
                rec.tensors.push_back(std::move(t));
            }
            out.records.push_back(std::move(rec));
        }
        if (progress) progress(step, step_loss);
    }

    if (out.loss_history.size() >= static_cast<std::size_t>(cfg.telemetry.window)) {
        SpikeDetector det;
        det.window = cfg.telemetry.window;
        det.delta = cfg.telemetry.delta;
        det.armed_after = cfg.armed_after_steps();
        out.spikes = detect_spike(out.loss_history, det);
    }
    return out;
}

double eval_perplexity(Model& m, const Corpus& corpus) {
    const int ctx = m.cfg().ctx;
    std::size_t H = corpus.heldout_len();
    if (H < static_cast<std::size_t>(ctx) + 1) {
        throw std::runtime_error("eval: held-out tail shorter than one ctx+1 window");
    }
    m.refresh_virtual_only();
    std::size_t nwin = (H - 1) / static_cast<std::size_t>(ctx);
    const unsigned char* base = corpus.heldout();
    std::vector<int> tokens(static_cast<std::size_t>(ctx));
    std::vector<int> targets(static_cast<std::size_t>(ctx));
    double nll_sum = 0.0;
    for (std::size_t w = 0; w < nwin; ++w) {
        const unsigned char* p = base + w * static_cast<std::size_t>(ctx);
        for (int j = 0; j < ctx; ++j) {
            tokens[static_cast<std::size_t>(j)] = p[j];
            targets[static_cast<std::size_t>(j)] = p[j + 1];
        }
        nll_sum += m.eval_nll(tokens.data(), targets.data(), ctx);
    }
    return std::exp(nll_sum / static_cast<double>(nwin));
}

}  // namespace wesar
