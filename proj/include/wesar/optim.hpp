// Adam with linear warmup + cosine decay, global-norm clipping, and
// decoupled weight decay.  The Optimizer walks a Params set; per-tensor
// update norms come back to the caller so telemetry can form update ratios
// from the deltas that were actually applied.
#pragma once

#include <vector>

#include "wesar/config.hpp"
#include "wesar/matrix.hpp"
#include "wesar/params.hpp"

namespace wesar {

struct AdamState {
    Matrix m;  // first-moment EMA
    Matrix v;  // second-moment EMA, entrywise >= 0
    long t = 0;
};

// Schedule: linear 0 -> lr over warmup_steps, then cosine from lr down to
// 0.1*lr at total_steps (clamped there for any later step).  step counts
// from 1.
double lr_at(long step, const TrainConfig& cfg);

// Frobenius norm over every gradient in the set: weight grads, gamma grads,
// and the gate grads of trainable gates.
double global_grad_norm(const Params& p);

// Scales all gradients by threshold/norm when the global norm exceeds the
// threshold.  Returns the pre-clip norm.
double clip_global(Params& p, double threshold);

// Core update on a flat array:
//   t' = t+1;  M <- b1*M + (1-b1)*g;  V <- b2*V + (1-b2)*g^2
//   dW = -lr * Mhat / (sqrt(Vhat) + eps) - lr*wd*w       (decay optional)
// applied in place; returns ||dW||_F.  A zero denominator (possible only at
// eps=0 with an all-zero gradient history) contributes a zero update.
// Non-finite gradient entries throw: the step must abort, not corrupt state.
double adam_step_array(double* w, const double* g, double* m, double* v, long t, std::size_t n,
                       double lr, const TrainConfig& cfg, bool decay, double* delta_out);

// Matrix wrapper; increments st.t.  delta_out (optional) receives the
// applied delta for inspection.
double adam_step(Matrix& w, const Matrix& g, AdamState& st, double lr, const TrainConfig& cfg,
                 bool decay, Matrix* delta_out = nullptr);

// Per-tensor numbers captured around one optimizer step, in tensor order.
// param_norm is pre-update, grad_norm post-clip, update_norm the applied
// ||dW||; gate_value summarizes the gate before its update (scalar gates
// directly, per-row gates as their RMS, 1 when the tensor has no gate).
struct TensorStepStats {
    double param_norm = 0.0;
    double grad_norm = 0.0;
    double update_norm = 0.0;
    double gate_value = 1.0;
};

class Optimizer {
  public:
    Optimizer(Params& p, const TrainConfig& cfg);

    struct StepStats {
        double lr = 0.0;
        double grad_norm_preclip = 0.0;
        bool clipped = false;
        std::vector<TensorStepStats> tensors;
    };

    // Clip globally, then Adam-update every weight matrix, gamma, and
    // trainable gate.  global_step (from 1) drives the schedule.  Weight
    // decay applies to weight matrices only — never gates or gamma.
    StepStats step(long global_step);

  private:
    Params& p_;
    TrainConfig cfg_;
    std::vector<AdamState> wstate_;
    std::vector<AdamState> gstate_;  // 1 x gate-length moments; empty shape if no gate
};

}  // namespace wesar
