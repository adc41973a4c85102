// Pre-LN Transformer decoder with a fully manual backward pass.
//
// Forward per block:  x -> x + m * attn(rmsnorm(x)) -> x + m * ffn(rmsnorm(x))
// where m is 1 except under residual scaling (1/sqrt(2N)).  A final rmsnorm
// feeds the prediction head.  The loss is mean next-token cross-entropy plus
// a z-loss term z * mean(lse^2) on the log-partition.
//
// The model binds to an externally owned Params set.  A training step is:
//   begin_step() -> { forward_loss(seq); backward(); } per sequence
//   -> end_step(n_sequences)
// after which grad_weight/grad_gate hold the batch-mean gradients.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "wesar/config.hpp"
#include "wesar/matrix.hpp"
#include "wesar/params.hpp"

namespace wesar {

// --- rmsnorm ------------------------------------------------------------
// Forward: y_j = gamma_j * x_j / sqrt(mean(x^2) + eps).  Returns the raw
// mean square and the with-eps reciprocal root through out-params so the
// backward can reuse them.
void rmsnorm_row_forward(const double* x, const double* gamma, int d, double eps, double* y,
                         double& ms_raw, double& rstd_eps);

// Backward of the eps=0 form: with r0 = 1/sqrt(ms_raw), z_j = gamma_j*dy_j,
//   dx_j = r0 * (z_j - x_j * (sum_i x_i z_i) / (d * ms_raw))
//   dgamma_j += x_j * rstd_eps * dy_j            (exact: y is linear in gamma)
// The projector makes <x, dx> vanish identically when gamma is constant.
// omit_projection is a fault-injection hook for the mutation probe: it drops
// the second term, which a finite-difference check must catch.
void rmsnorm_row_backward(const double* x, const double* gamma, const double* dy, int d,
                          double ms_raw, double rstd_eps, double* dx, double* dgamma_acc,
                          bool omit_projection = false);

// Vector wrappers over the row kernels for property tests.
std::vector<double> rmsnorm_forward(const std::vector<double>& x, const std::vector<double>& gamma,
                                    double eps);
std::pair<std::vector<double>, std::vector<double>> rmsnorm_backward(
    const std::vector<double>& x, const std::vector<double>& gamma, const std::vector<double>& dy,
    double eps);

// --- gelu ---------------------------------------------------------------
// Exact erf formulation: g = 0.5 * u * (1 + erf(u/sqrt(2))).  The forward
// stores erf(u/sqrt(2)) so the backward needs only one exp:
//   g'(u) = 0.5 * (1 + erf(u/sqrt(2))) + u * exp(-u^2/2) / sqrt(2*pi).
void gelu_forward_array(const double* u, double* g, double* erf_cache, std::size_t n);
// du_i = dg_i * g'(u_i); scratch must hold n doubles.
void gelu_backward_array(const double* u, const double* erf_cache, const double* dg, double* du,
                         std::size_t n, double* scratch);

// --- rotary position embedding -----------------------------------------
// Interleaved-pair convention: within each head, dims (2j, 2j+1) rotate by
// angle pos * base^(-2j/head_dim).
struct RopeTable {
    Matrix cos_t;  // ctx x head_dim/2
    Matrix sin_t;
    int head_dim = 0;
};
RopeTable make_rope_table(int ctx, int head_dim, double base = 10000.0);
void rope_apply(Matrix& x, const RopeTable& table, int n_heads);     // in place
void rope_apply_inverse(Matrix& x, const RopeTable& table, int n_heads);

// --- the decoder --------------------------------------------------------

class Model {
  public:
    // Binds to params (not owned).  spec supplies the embedding multiplier;
    // z_coeff the z-loss weight.  All work buffers are allocated here.
    Model(Params& params, const InitSpec& spec, double z_coeff);

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelConfig& cfg() const { return p_.cfg; }
    Params& params() { return p_; }
    double embed_mult() const { return emb_mult_; }
    double resid_mult() const { return resid_mult_; }

    // Step lifecycle.  begin_step runs the sigmareparam power iteration
    // (when present), refreshes virtual weights and their transposes, and
    // zeroes all gradient accumulators.
    void begin_step();
    // Refresh virtual weights/transposes without advancing power-iteration
    // state: the spectral estimate must stay frozen while a finite-difference
    // loop perturbs weights, matching the backward that treats it constant.
    void refresh_virtual_only();
    // Zero vgrad and gamma-grad accumulators only.
    void zero_grads();

    // Mean loss over the sequence: cross-entropy + z-loss.  tokens/targets
    // are length T; T must equal cfg().ctx (caches assume full context).
    // Token ids outside [0, vocab) throw.
    double forward_loss(const int* tokens, const int* targets, int T);
    // CE and z components of the last forward's loss.
    double last_ce() const { return last_ce_; }
    double last_zloss() const { return last_z_; }

    // Accumulates d(loss)/d(virtual weight) into vgrad slots and gamma
    // gradients into grad_weight; requires the cache of the immediately
    // preceding forward_loss.
    void backward();

    // Divide accumulated gradients by n_sequences and map virtual-weight
    // gradients to actual-weight/gate gradients.
    void end_step(int n_sequences);

    // Forward only; returns the mean cross-entropy without the z term.
    double eval_nll(const int* tokens, const int* targets, int T);

    const Matrix& logits() const { return logits_; }

    // Sublayer forwards on a given (already normalized) input, for oracle
    // tests: attention is projections + rope + causal softmax + W_o, ffn is
    // gelu(x Wu) Wd.  Neither includes rmsnorm, residual, or the residual
    // multiplier.  x is T x d with T == ctx.
    Matrix attention_forward(const Matrix& x, int layer);
    Matrix ffn_forward(const Matrix& x, int layer);

    // Scales the gradient injected at the logits; 0 turns the loss surface
    // flat for the zero-gradient probe, 2 doubles every gradient.
    void set_loss_scale(double s) { loss_scale_ = s; }
    // Fault injection for the mutation probe (drops the rmsnorm projection
    // term in backward).
    void set_break_rmsnorm_backward(bool b) { break_rmsnorm_ = b; }

  private:
    struct LayerCache {
        Matrix x_in, ln1_out, q, k, v, att_out, x_mid, ln2_out;
        Matrix ffn_pre, ffn_act, ffn_erf;
        std::vector<double> ln1_ms, ln1_rstd, ln2_ms, ln2_rstd;
        std::vector<Matrix> probs;  // per head, T x T, strictly causal rows
    };

    void attention_into(int layer, const Matrix& input, Matrix& out);
    void ffn_into(int layer, const Matrix& input, Matrix& out);
    double forward_internal(const int* tokens, const int* targets, int T);

    Params& p_;
    double emb_mult_ = 1.0;
    double resid_mult_ = 1.0;
    double z_coeff_ = 0.0;
    double loss_scale_ = 1.0;
    bool break_rmsnorm_ = false;

    int T_ = 0, d_ = 0, f_ = 0, heads_ = 0, dh_ = 0, vocab_ = 0;
    double inv_sqrt_dh_ = 0.0;
    RopeTable rope_;

    std::vector<Matrix> vwt_;  // transposed virtual weights, by tensor index

    std::vector<LayerCache> layers_;
    Matrix x_final_, fin_out_, logits_, probs_out_;
    std::vector<double> fin_ms_, fin_rstd_, lse_;
    std::vector<int> tokens_, targets_;
    double last_ce_ = 0.0, last_z_ = 0.0;
    bool cache_valid_ = false;

    // backward scratch
    Matrix dlogits_, dstream_, dmid_, dbranch_, datt_, dq_, dk_, dv_, dln_;
    Matrix dU_, dG_, dP_;
    std::vector<double> gelu_scratch_;
    // per-head compact buffers: score and mix products run as dense matmuls on
    // T x dh copies (with the causal tail of P zeroed) instead of strided loops
    Matrix qh_, kh_, vh_, oh_, doh_, dqh_, dkh_, dvh_;
    Matrix khT_, vhT_;

    // cached flat indices of per-layer tensors
    struct LayerIdx {
        int ln1, wq, wk, wv, wo, ln2, wu, wd;
    };
    std::vector<LayerIdx> idx_;
    int we_ = 0, fin_gamma_ = 0, wp_ = 0;
};

}  // namespace wesar
