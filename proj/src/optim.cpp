#include "wesar/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace wesar {

double lr_at(long step, const TrainConfig& cfg) {
    if (step < 1) {
        throw std::invalid_argument("optim: schedule steps count from 1");
    }
    if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps) {
        // Linear ramp; step == warmup_steps lands exactly on cfg.lr.
        return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    }
    if (cfg.total_steps <= cfg.warmup_steps) {
        return cfg.lr;  // degenerate schedule: no decay span
    }
    double prog = static_cast<double>(step - cfg.warmup_steps) /
                  static_cast<double>(cfg.total_steps - cfg.warmup_steps);
    if (prog > 1.0) prog = 1.0;  // hold the floor past total_steps
    // Cosine from lr down to 0.1*lr: lr * (0.1 + 0.45*(1+cos(pi*prog))).
    return cfg.lr * (0.1 + 0.45 * (1.0 + std::cos(M_PI * prog)));
}

namespace {

double sum_sq(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return s;
}

double sum_sq(const Matrix& a) {
    double s = 0.0;
    for (double x : a.data) s += x * x;
    return s;
}

}  // namespace

double global_grad_norm(const Params& p) {
    double s = 0.0;
    for (const ParamTensor& t : p.tensors) {
        s += sum_sq(t.grad_weight);
        if (t.has_gate() && t.gate_trainable) {
            s += sum_sq(t.grad_gate);
        }
    }
    return std::sqrt(s);
}

double clip_global(Params& p, double threshold) {
    double norm = global_grad_norm(p);
    if (norm > threshold) {
        double scale = threshold / norm;
        for (ParamTensor& t : p.tensors) {
            t.grad_weight.scale(scale);
            if (t.has_gate() && t.gate_trainable) {
                for (double& g : t.grad_gate) g *= scale;
            }
        }
    }
    return norm;
}

double adam_step_array(double* w, const double* g, double* m, double* v, long t, std::size_t n,
                       double lr, const TrainConfig& cfg, bool decay, double* delta_out) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(g[i])) {
            throw std::runtime_error("optim: non-finite gradient entry; aborting the step");
        }
    }
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    double wd = decay ? cfg.weight_decay : 0.0;
    double dsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        double mhat = m[i] / bc1;
        double denom = std::sqrt(v[i] / bc2) + cfg.eps;
        double d = (denom > 0.0) ? (-lr * mhat / denom) : 0.0;
        d -= lr * wd * w[i];
        w[i] += d;
        dsq += d * d;
        if (delta_out != nullptr) delta_out[i] = d;
    }
    return std::sqrt(dsq);
}

double adam_step(Matrix& w, const Matrix& g, AdamState& st, double lr, const TrainConfig& cfg,
                 bool decay, Matrix* delta_out) {
    if (g.rows != w.rows || g.cols != w.cols || st.m.rows != w.rows || st.m.cols != w.cols) {
        throw std::invalid_argument("optim: adam_step shape mismatch");
    }
    if (delta_out != nullptr && (delta_out->rows != w.rows || delta_out->cols != w.cols)) {
        throw std::invalid_argument("optim: delta_out shape mismatch");
    }
    st.t += 1;
    return adam_step_array(w.data.data(), g.data.data(), st.m.data.data(), st.v.data.data(), st.t,
                           w.size(), lr, cfg, decay,
                           delta_out != nullptr ? delta_out->data.data() : nullptr);
}

Optimizer::Optimizer(Params& p, const TrainConfig& cfg) : p_(p), cfg_(cfg) {
    wstate_.reserve(p_.tensors.size());
    gstate_.reserve(p_.tensors.size());
    for (const ParamTensor& t : p_.tensors) {
        AdamState ws;
        ws.m = Matrix(t.weight.rows, t.weight.cols);
        ws.v = Matrix(t.weight.rows, t.weight.cols);
        wstate_.push_back(std::move(ws));
        AdamState gs;
        if (t.has_gate() && t.gate_trainable) {
            gs.m = Matrix(1, static_cast<int>(t.gate.size()));
            gs.v = Matrix(1, static_cast<int>(t.gate.size()));
        }
        gstate_.push_back(std::move(gs));
    }
}

Optimizer::StepStats Optimizer::step(long global_step) {
    StepStats out;
    out.lr = lr_at(global_step, cfg_);
    out.grad_norm_preclip = clip_global(p_, cfg_.clip_threshold);
    out.clipped = out.grad_norm_preclip > cfg_.clip_threshold;
    out.tensors.reserve(p_.tensors.size());
    for (std::size_t i = 0; i < p_.tensors.size(); ++i) {
        ParamTensor& t = p_.tensors[i];
        TensorStepStats ts;
        ts.param_norm = fro_norm(t.weight);
        ts.grad_norm = fro_norm(t.grad_weight);
        if (t.has_gate()) {
            double s = sum_sq(t.gate);
            ts.gate_value = (t.gate.size() == 1)
                                ? t.gate[0]
                                : std::sqrt(s / static_cast<double>(t.gate.size()));
        }
        ts.update_norm = adam_step(t.weight, t.grad_weight, wstate_[i], out.lr, cfg_,
                                   t.wd_applies, nullptr);
        if (t.has_gate() && t.gate_trainable) {
            AdamState& gs = gstate_[i];
            gs.t += 1;
            adam_step_array(t.gate.data(), t.grad_gate.data(), gs.m.data.data(), gs.v.data.data(),
                            gs.t, t.gate.size(), out.lr, cfg_, /*decay=*/false, nullptr);
        }
        out.tensors.push_back(ts);
    }
    return out;
}

}  // namespace wesar
