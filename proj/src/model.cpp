#include "wesar/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "wesar/fastmath.hpp"
#include "wesar/init.hpp"
#include "wesar/reparam.hpp"

namespace wesar {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752;
constexpr double kInvSqrt2Pi = 0.39894228040143268;

// Attention scores and their gradients run over row blocks of this many
// queries at a time; each block only touches columns up to its last row, so
// the never-used upper triangle beyond the block span is skipped entirely.
constexpr int kAttBlock = 64;

}  // namespace

void rmsnorm_row_forward(const double* x, const double* gamma, int d, double eps, double* y,
                         double& ms_raw, double& rstd_eps) {
    if (d <= 0) throw ConfigError("rmsnorm: zero-length input");
    double ss = 0.0;
    for (int j = 0; j < d; ++j) ss += x[j] * x[j];
    ms_raw = ss / d;
    const double denom = ms_raw + eps;
    rstd_eps = denom > 0.0 ? 1.0 / std::sqrt(denom) : 0.0;
    for (int j = 0; j < d; ++j) y[j] = gamma[j] * x[j] * rstd_eps;
}

void rmsnorm_row_backward(const double* x, const double* gamma, const double* dy, int d,
                          double ms_raw, double rstd_eps, double* dx, double* dgamma_acc,
                          bool omit_projection) {
    const double r0 = ms_raw > 0.0 ? 1.0 / std::sqrt(ms_raw) : 0.0;
    double xz = 0.0;
    for (int j = 0; j < d; ++j) xz += x[j] * gamma[j] * dy[j];
    const double proj = (ms_raw > 0.0 && !omit_projection) ? xz / (d * ms_raw) : 0.0;
    for (int j = 0; j < d; ++j) {
        const double z = gamma[j] * dy[j];
        dx[j] = r0 * (z - x[j] * proj);
        dgamma_acc[j] += x[j] * rstd_eps * dy[j];
    }
}

std::vector<double> rmsnorm_forward(const std::vector<double>& x, const std::vector<double>& gamma,
                                    double eps) {
    if (x.size() != gamma.size()) throw ConfigError("rmsnorm: x and gamma lengths differ");
    std::vector<double> y(x.size());
    double ms = 0.0, rstd = 0.0;
    rmsnorm_row_forward(x.data(), gamma.data(), static_cast<int>(x.size()), eps, y.data(), ms, rstd);
    return y;
}

std::pair<std::vector<double>, std::vector<double>> rmsnorm_backward(
    const std::vector<double>& x, const std::vector<double>& gamma, const std::vector<double>& dy,
    double eps) {
    if (x.size() != gamma.size() || x.size() != dy.size())
        throw ConfigError("rmsnorm: backward shape mismatch");
    const int d = static_cast<int>(x.size());
    std::vector<double> y(x.size());
    double ms = 0.0, rstd = 0.0;
    rmsnorm_row_forward(x.data(), gamma.data(), d, eps, y.data(), ms, rstd);
    std::vector<double> dx(x.size()), dgamma(x.size(), 0.0);
    rmsnorm_row_backward(x.data(), gamma.data(), dy.data(), d, ms, rstd, dx.data(), dgamma.data());
    return {dx, dgamma};
}

void gelu_forward_array(const double* u, double* g, double* erf_cache, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) erf_cache[i] = u[i] * kInvSqrt2;
    erf_array(erf_cache, erf_cache, n);
    for (std::size_t i = 0; i < n; ++i) g[i] = 0.5 * u[i] * (1.0 + erf_cache[i]);
}

void gelu_backward_array(const double* u, const double* erf_cache, const double* dg, double* du,
                         std::size_t n, double* scratch) {
    for (std::size_t i = 0; i < n; ++i) scratch[i] = -0.5 * u[i] * u[i];
    exp_array(scratch, scratch, n);
    for (std::size_t i = 0; i < n; ++i)
        du[i] = dg[i] * (0.5 * (1.0 + erf_cache[i]) + u[i] * scratch[i] * kInvSqrt2Pi);
}

RopeTable make_rope_table(int ctx, int head_dim, double base) {
    if (head_dim <= 0 || head_dim % 2 != 0) throw ConfigError("rope: head dimension must be even");
    if (ctx <= 0) throw ConfigError("rope: ctx must be positive");
    RopeTable t;
    t.head_dim = head_dim;
    const int half = head_dim / 2;
    t.cos_t = Matrix(ctx, half);
    t.sin_t = Matrix(ctx, half);
    for (int pos = 0; pos < ctx; ++pos) {
        for (int j = 0; j < half; ++j) {
            const double theta = pos * std::pow(base, -2.0 * j / head_dim);
            t.cos_t.at(pos, j) = std::cos(theta);
            t.sin_t.at(pos, j) = std::sin(theta);
        }
    }
    return t;
}

namespace {

template <bool kInverse>
void rope_apply_impl(Matrix& x, const RopeTable& t, int n_heads) {
    const int dh = t.head_dim;
    const int half = dh / 2;
    if (x.cols != n_heads * dh) throw std::invalid_argument("rope: width != n_heads * head_dim");
    if (x.rows > t.cos_t.rows) throw std::invalid_argument("rope: more rows than table positions");
    for (int r = 0; r < x.rows; ++r) {
        const double* cr = t.cos_t.row(r);
        const double* sr = t.sin_t.row(r);
        double* row = x.row(r);
        for (int h = 0; h < n_heads; ++h) {
            double* seg = row + h * dh;
            for (int j = 0; j < half; ++j) {
                const double c = cr[j];
                const double s = kInverse ? -sr[j] : sr[j];
                const double a = seg[2 * j];
                const double b = seg[2 * j + 1];
                seg[2 * j] = a * c - b * s;
                seg[2 * j + 1] = a * s + b * c;
            }
        }
    }
}

}  // namespace

void rope_apply(Matrix& x, const RopeTable& table, int n_heads) {
    rope_apply_impl<false>(x, table, n_heads);
}

void rope_apply_inverse(Matrix& x, const RopeTable& table, int n_heads) {
    rope_apply_impl<true>(x, table, n_heads);
}

Model::Model(Params& params, const InitSpec& spec, double z_coeff) : p_(params), z_coeff_(z_coeff) {
    const ModelConfig& c = p_.cfg;
    c.validate();
    T_ = c.ctx;
    d_ = c.d;
    f_ = c.ffn_dim();
    heads_ = c.n_heads;
    dh_ = c.head_dim();
    vocab_ = c.vocab;
    inv_sqrt_dh_ = 1.0 / std::sqrt(static_cast<double>(dh_));
    emb_mult_ = embed_multiplier(spec, d_);
    resid_mult_ = residual_multiplier(p_.mode.kind, c.n_layers);
    rope_ = make_rope_table(T_, dh_);

    vwt_.resize(p_.tensors.size());
    for (std::size_t i = 0; i < p_.tensors.size(); ++i) {
        const auto& t = p_.tensors[i];
        if (!t.is_gamma()) vwt_[i] = Matrix(t.weight.cols, t.weight.rows);
    }

    layers_.resize(static_cast<std::size_t>(c.n_layers));
    for (auto& L : layers_) {
        L.x_in = Matrix(T_, d_);
        L.ln1_out = Matrix(T_, d_);
        L.q = Matrix(T_, d_);
        L.k = Matrix(T_, d_);
        L.v = Matrix(T_, d_);
        L.att_out = Matrix(T_, d_);
        L.x_mid = Matrix(T_, d_);
        L.ln2_out = Matrix(T_, d_);
        L.ffn_pre = Matrix(T_, f_);
        L.ffn_act = Matrix(T_, f_);
        L.ffn_erf = Matrix(T_, f_);
        L.ln1_ms.assign(static_cast<std::size_t>(T_), 0.0);
        L.ln1_rstd.assign(static_cast<std::size_t>(T_), 0.0);
        L.ln2_ms.assign(static_cast<std::size_t>(T_), 0.0);
        L.ln2_rstd.assign(static_cast<std::size_t>(T_), 0.0);
        L.probs.assign(static_cast<std::size_t>(heads_), Matrix(T_, T_));
    }
    x_final_ = Matrix(T_, d_);
    fin_out_ = Matrix(T_, d_);
    logits_ = Matrix(T_, vocab_);
    probs_out_ = Matrix(T_, vocab_);
    fin_ms_.assign(static_cast<std::size_t>(T_), 0.0);
    fin_rstd_.assign(static_cast<std::size_t>(T_), 0.0);
    lse_.assign(static_cast<std::size_t>(T_), 0.0);
    tokens_.assign(static_cast<std::size_t>(T_), 0);
    targets_.assign(static_cast<std::size_t>(T_), 0);

    dlogits_ = Matrix(T_, vocab_);
    dstream_ = Matrix(T_, d_);
    dmid_ = Matrix(T_, d_);
    dbranch_ = Matrix(T_, d_);
    datt_ = Matrix(T_, d_);
    dq_ = Matrix(T_, d_);
    dk_ = Matrix(T_, d_);
    dv_ = Matrix(T_, d_);
    dln_ = Matrix(T_, d_);
    dU_ = Matrix(T_, f_);
    dG_ = Matrix(T_, f_);
    dP_ = Matrix(T_, T_);
    gelu_scratch_.assign(static_cast<std::size_t>(T_) * f_, 0.0);
    qh_ = Matrix(T_, dh_);
    kh_ = Matrix(T_, dh_);
    vh_ = Matrix(T_, dh_);
    oh_ = Matrix(T_, dh_);
    doh_ = Matrix(T_, dh_);
    dqh_ = Matrix(T_, dh_);
    dkh_ = Matrix(T_, dh_);
    dvh_ = Matrix(T_, dh_);
    khT_ = Matrix(dh_, T_);
    vhT_ = Matrix(dh_, T_);

    we_ = 0;
    idx_.resize(static_cast<std::size_t>(c.n_layers));
    for (int l = 0; l < c.n_layers; ++l) {
        const int b = p_.layer_base(l);
        idx_[static_cast<std::size_t>(l)] = {b, b + 1, b + 2, b + 3, b + 4, b + 5, b + 6, b + 7};
    }
    fin_gamma_ = static_cast<int>(p_.tensors.size()) - 2;
    wp_ = static_cast<int>(p_.tensors.size()) - 1;
    if (p_.tensors[static_cast<std::size_t>(we_)].role != Role::Embed ||
        p_.tensors[static_cast<std::size_t>(fin_gamma_)].role != Role::Gamma ||
        p_.tensors[static_cast<std::size_t>(wp_)].role != Role::Unembed)
        throw std::logic_error("model: params not in canonical tensor order");
}

void Model::begin_step() {
    begin_step_power(p_);
    refresh_virtual_only();
    zero_grads();
}

void Model::refresh_virtual_only() {
    refresh_virtual(p_);
    for (std::size_t i = 0; i < p_.tensors.size(); ++i)
        if (!p_.tensors[i].is_gamma()) transpose_into(vwt_[i], p_.tensors[i].vw);
    cache_valid_ = false;
}

void Model::zero_grads() {
    for (auto& t : p_.tensors) {
        t.grad_weight.zero();
        if (!t.is_gamma()) t.vgrad.zero();
        for (double& g : t.grad_gate) g = 0.0;
    }
}

void Model::attention_into(int layer, const Matrix& input, Matrix& out) {
    LayerCache& L = layers_[static_cast<std::size_t>(layer)];
    const LayerIdx& ix = idx_[static_cast<std::size_t>(layer)];
    matmul_into(L.q, input, p_.tensors[static_cast<std::size_t>(ix.wq)].vw);
    matmul_into(L.k, input, p_.tensors[static_cast<std::size_t>(ix.wk)].vw);
    matmul_into(L.v, input, p_.tensors[static_cast<std::size_t>(ix.wv)].vw);
    rope_apply(L.q, rope_, heads_);
    rope_apply(L.k, rope_, heads_);

    for (int h = 0; h < heads_; ++h) {
        const int off = h * dh_;
        Matrix& P = L.probs[static_cast<std::size_t>(h)];
        for (int t = 0; t < T_; ++t) {
            const double* qt = L.q.row(t) + off;
            const double* kt = L.k.row(t) + off;
            const double* vt = L.v.row(t) + off;
            double* qc = qh_.row(t);
            double* vc = vh_.row(t);
            for (int j = 0; j < dh_; ++j) {
                qc[j] = qt[j];
                vc[j] = vt[j];
                khT_.data[static_cast<std::size_t>(j) * T_ + t] = kt[j];
            }
        }
        for (int r0 = 0; r0 < T_; r0 += kAttBlock) {
            const int rb = std::min(kAttBlock, T_ - r0);
            const int span = r0 + rb;  // columns 0..span-1 cover every prefix in the block
            // raw scores for the block's rows; columns past each row's prefix
            // are overwritten or zeroed below
            matmul_block_into(P.row(r0), T_, qh_.row(r0), dh_, khT_.data.data(), T_, rb, dh_,
                              span);
            for (int t = r0; t < span; ++t) {
                double* Pt = P.row(t);
                for (int s = 0; s <= t; ++s) Pt[s] *= inv_sqrt_dh_;
                // causal softmax over the prefix 0..t
                double mx = Pt[0];
                for (int s = 1; s <= t; ++s) mx = Pt[s] > mx ? Pt[s] : mx;
                for (int s = 0; s <= t; ++s) Pt[s] -= mx;
                exp_array(Pt, Pt, static_cast<std::size_t>(t) + 1);
                double sum = 0.0;
                for (int s = 0; s <= t; ++s) sum += Pt[s];
                const double inv = 1.0 / sum;
                for (int s = 0; s <= t; ++s) Pt[s] *= inv;
                // zero out to the span so the dense mix below stays causal
                for (int s = t + 1; s < span; ++s) Pt[s] = 0.0;
            }
            matmul_block_into(oh_.row(r0), dh_, P.row(r0), T_, vh_.data.data(), dh_, rb, span,
                              dh_);
        }
        for (int t = 0; t < T_; ++t)
            std::memcpy(L.att_out.row(t) + off, oh_.row(t),
                        sizeof(double) * static_cast<std::size_t>(dh_));
    }
    matmul_into(out, L.att_out, p_.tensors[static_cast<std::size_t>(ix.wo)].vw);
}

void Model::ffn_into(int layer, const Matrix& input, Matrix& out) {
    LayerCache& L = layers_[static_cast<std::size_t>(layer)];
    const LayerIdx& ix = idx_[static_cast<std::size_t>(layer)];
    matmul_into(L.ffn_pre, input, p_.tensors[static_cast<std::size_t>(ix.wu)].vw);
    gelu_forward_array(L.ffn_pre.data.data(), L.ffn_act.data.data(), L.ffn_erf.data.data(),
                       L.ffn_pre.size());
    matmul_into(out, L.ffn_act, p_.tensors[static_cast<std::size_t>(ix.wd)].vw);
}

double Model::forward_internal(const int* tokens, const int* targets, int T) {
    if (T != T_)
        throw std::invalid_argument("model: sequence length must equal the configured ctx");
    for (int t = 0; t < T; ++t) {
        if (tokens[t] < 0 || tokens[t] >= vocab_ || targets[t] < 0 || targets[t] >= vocab_)
            throw std::out_of_range("model: token id outside vocabulary");
        tokens_[static_cast<std::size_t>(t)] = tokens[t];
        targets_[static_cast<std::size_t>(t)] = targets[t];
    }
    const double eps = p_.cfg.rmsnorm_eps;
    const int n_layers = p_.cfg.n_layers;

    // embedding rows, scaled by the scheme's constant multiplier
    Matrix& x0 = layers_[0].x_in;
    const Matrix& we = p_.tensors[static_cast<std::size_t>(we_)].vw;
    for (int t = 0; t < T; ++t) {
        const double* src = we.row(tokens[t]);
        double* dst = x0.row(t);
        for (int j = 0; j < d_; ++j) dst[j] = emb_mult_ * src[j];
    }

    for (int l = 0; l < n_layers; ++l) {
        LayerCache& L = layers_[static_cast<std::size_t>(l)];
        const LayerIdx& ix = idx_[static_cast<std::size_t>(l)];
        const double* g1 = p_.tensors[static_cast<std::size_t>(ix.ln1)].weight.row(0);
        for (int t = 0; t < T; ++t)
            rmsnorm_row_forward(L.x_in.row(t), g1, d_, eps, L.ln1_out.row(t),
                                L.ln1_ms[static_cast<std::size_t>(t)],
                                L.ln1_rstd[static_cast<std::size_t>(t)]);
        attention_into(l, L.ln1_out, dbranch_);
        for (std::size_t i = 0; i < L.x_mid.size(); ++i)
            L.x_mid.data[i] = L.x_in.data[i] + resid_mult_ * dbranch_.data[i];

        const double* g2 = p_.tensors[static_cast<std::size_t>(ix.ln2)].weight.row(0);
        for (int t = 0; t < T; ++t)
            rmsnorm_row_forward(L.x_mid.row(t), g2, d_, eps, L.ln2_out.row(t),
                                L.ln2_ms[static_cast<std::size_t>(t)],
                                L.ln2_rstd[static_cast<std::size_t>(t)]);
        ffn_into(l, L.ln2_out, dbranch_);
        Matrix& next = (l + 1 < n_layers) ? layers_[static_cast<std::size_t>(l) + 1].x_in : x_final_;
        for (std::size_t i = 0; i < next.size(); ++i)
            next.data[i] = L.x_mid.data[i] + resid_mult_ * dbranch_.data[i];
    }

    const double* gf = p_.tensors[static_cast<std::size_t>(fin_gamma_)].weight.row(0);
    for (int t = 0; t < T; ++t)
        rmsnorm_row_forward(x_final_.row(t), gf, d_, eps, fin_out_.row(t),
                            fin_ms_[static_cast<std::size_t>(t)],
                            fin_rstd_[static_cast<std::size_t>(t)]);
    matmul_into(logits_, fin_out_, p_.tensors[static_cast<std::size_t>(wp_)].vw);

    double ce = 0.0, zs = 0.0;
    for (int t = 0; t < T; ++t) {
        const double* lrow = logits_.row(t);
        double* prow = probs_out_.row(t);
        double mx = lrow[0];
        for (int j = 1; j < vocab_; ++j) mx = lrow[j] > mx ? lrow[j] : mx;
        for (int j = 0; j < vocab_; ++j) prow[j] = lrow[j] - mx;
        exp_array(prow, prow, static_cast<std::size_t>(vocab_));
        double sum = 0.0;
        for (int j = 0; j < vocab_; ++j) sum += prow[j];
        const double lse = mx + std::log(sum);
        lse_[static_cast<std::size_t>(t)] = lse;
        const double inv = 1.0 / sum;
        for (int j = 0; j < vocab_; ++j) prow[j] *= inv;
        ce += lse - lrow[targets[t]];
        zs += z_coeff_ * lse * lse;
    }
    last_ce_ = ce / T_;
    last_z_ = zs / T_;
    cache_valid_ = true;
    return last_ce_ + last_z_;
}

double Model::forward_loss(const int* tokens, const int* targets, int T) {
    return forward_internal(tokens, targets, T);
}

double Model::eval_nll(const int* tokens, const int* targets, int T) {
    forward_internal(tokens, targets, T);
    return last_ce_;
}

void Model::backward() {
    if (!cache_valid_)
        throw std::logic_error("model: backward requires the cache of a fresh forward");
    const double invT = 1.0 / T_;

    for (int t = 0; t < T_; ++t) {
        const double lse = lse_[static_cast<std::size_t>(t)];
        const double scale = (1.0 + 2.0 * z_coeff_ * lse) * invT * loss_scale_;
        const double* prow = probs_out_.row(t);
        double* dl = dlogits_.row(t);
        for (int j = 0; j < vocab_; ++j) dl[j] = scale * prow[j];
        dl[targets_[static_cast<std::size_t>(t)]] -= invT * loss_scale_;
    }

    matmul_ta_acc(p_.tensors[static_cast<std::size_t>(wp_)].vgrad, fin_out_, dlogits_);
    matmul_into(dmid_, dlogits_, vwt_[static_cast<std::size_t>(wp_)]);  // d(loss)/d(fin_out)

    ParamTensor& fg = p_.tensors[static_cast<std::size_t>(fin_gamma_)];
    for (int t = 0; t < T_; ++t)
        rmsnorm_row_backward(x_final_.row(t), fg.weight.row(0), dmid_.row(t), d_,
                             fin_ms_[static_cast<std::size_t>(t)],
                             fin_rstd_[static_cast<std::size_t>(t)], dstream_.row(t),
                             fg.grad_weight.row(0), break_rmsnorm_);

    for (int l = p_.cfg.n_layers - 1; l >= 0; --l) {
        LayerCache& L = layers_[static_cast<std::size_t>(l)];
        const LayerIdx& ix = idx_[static_cast<std::size_t>(l)];

        // ---- feed-forward sublayer ----
        for (std::size_t i = 0; i < dbranch_.size(); ++i)
            dbranch_.data[i] = resid_mult_ * dstream_.data[i];
        matmul_ta_acc(p_.tensors[static_cast<std::size_t>(ix.wd)].vgrad, L.ffn_act, dbranch_);
        matmul_into(dG_, dbranch_, vwt_[static_cast<std::size_t>(ix.wd)]);
        gelu_backward_array(L.ffn_pre.data.data(), L.ffn_erf.data.data(), dG_.data.data(),
                            dU_.data.data(), dU_.size(), gelu_scratch_.data());
        matmul_ta_acc(p_.tensors[static_cast<std::size_t>(ix.wu)].vgrad, L.ln2_out, dU_);
        matmul_into(dln_, dU_, vwt_[static_cast<std::size_t>(ix.wu)]);

        ParamTensor& g2 = p_.tensors[static_cast<std::size_t>(ix.ln2)];
        for (int t = 0; t < T_; ++t)
            rmsnorm_row_backward(L.x_mid.row(t), g2.weight.row(0), dln_.row(t), d_,
                                 L.ln2_ms[static_cast<std::size_t>(t)],
                                 L.ln2_rstd[static_cast<std::size_t>(t)], dmid_.row(t),
                                 g2.grad_weight.row(0), break_rmsnorm_);
        for (std::size_t i = 0; i < dstream_.size(); ++i) dstream_.data[i] += dmid_.data[i];

        // ---- attention sublayer ----
        for (std::size_t i = 0; i < dbranch_.size(); ++i)
            dbranch_.data[i] = resid_mult_ * dstream_.data[i];
        matmul_ta_acc(p_.tensors[static_cast<std::size_t>(ix.wo)].vgrad, L.att_out, dbranch_);
        matmul_into(datt_, dbranch_, vwt_[static_cast<std::size_t>(ix.wo)]);

        for (int h = 0; h < heads_; ++h) {
            const int off = h * dh_;
            Matrix& P = L.probs[static_cast<std::size_t>(h)];
            for (int t = 0; t < T_; ++t) {
                const double* qt = L.q.row(t) + off;
                const double* kt = L.k.row(t) + off;
                const double* vt = L.v.row(t) + off;
                const double* dot_row = datt_.row(t) + off;  // d(loss)/d(head output)
                double* qc = qh_.row(t);
                double* kc = kh_.row(t);
                double* dc = doh_.row(t);
                for (int j = 0; j < dh_; ++j) {
                    qc[j] = qt[j];
                    kc[j] = kt[j];
                    dc[j] = dot_row[j];
                    vhT_.data[static_cast<std::size_t>(j) * T_ + t] = vt[j];
                }
            }
            dkh_.zero();
            dvh_.zero();
            for (int r0 = 0; r0 < T_; r0 += kAttBlock) {
                const int rb = std::min(kAttBlock, T_ - r0);
                const int span = r0 + rb;
                // d(loss)/d(probs) for the block's rows
                matmul_block_into(dP_.row(r0), T_, doh_.row(r0), dh_, vhT_.data.data(), T_, rb,
                                  dh_, span);
                for (int t = r0; t < span; ++t) {
                    const double* Pt = P.row(t);
                    double* dPt = dP_.row(t);
                    // softmax backward within the causal prefix, folding in the
                    // 1/sqrt(dh) score scale so the two spreads below are plain matmuls
                    double rowdot = 0.0;
                    for (int s = 0; s <= t; ++s) rowdot += Pt[s] * dPt[s];
                    for (int s = 0; s <= t; ++s) {
                        const double g = Pt[s] * (dPt[s] - rowdot);
                        dPt[s] = g * inv_sqrt_dh_;
                    }
                    for (int s = t + 1; s < span; ++s) dPt[s] = 0.0;
                }
                matmul_block_into(dqh_.row(r0), dh_, dP_.row(r0), T_, kh_.data.data(), dh_, rb,
                                  span, dh_);
                // every key/value position a block attends to sits below its
                // span, so dK/dV gather block contributions in ascending row
                // order
                matmul_block_ta_acc(dkh_.data.data(), dh_, dP_.row(r0), T_, qh_.row(r0), dh_,
                                    span, rb, dh_);
                matmul_block_ta_acc(dvh_.data.data(), dh_, P.row(r0), T_, doh_.row(r0), dh_,
                                    span, rb, dh_);
            }
            for (int t = 0; t < T_; ++t) {
                std::memcpy(dq_.row(t) + off, dqh_.row(t),
                            sizeof(double) * static_cast<std::size_t>(dh_));
                std::memcpy(dk_.row(t) + off, dkh_.row(t),
                            sizeof(double) * static_cast<std::size_t>(dh_));
                std::memcpy(dv_.row(t) + off, dvh_.row(t),
                            sizeof(double) * static_cast<std::size_t>(dh_));
            }
        }
        rope_apply_inverse(dq_, rope_, heads_);
        rope_apply_inverse(dk_, rope_, heads_);

        matmul_ta_acc(p_.tensors[static_cast<std::size_t>(ix.wq)].vgrad, L.ln1_out, dq_);
        matmul_ta_acc(p_.tensors[static_cast<std::size_t>(ix.wk)].vgrad, L.ln1_out, dk_);
        matmul_ta_acc(p_.tensors[static_cast<std::size_t>(ix.wv)].vgrad, L.ln1_out, dv_);
        matmul_into(dln_, dq_, vwt_[static_cast<std::size_t>(ix.wq)]);
        matmul_acc(dln_, dk_, vwt_[static_cast<std::size_t>(ix.wk)]);
        matmul_acc(dln_, dv_, vwt_[static_cast<std::size_t>(ix.wv)]);

        ParamTensor& g1 = p_.tensors[static_cast<std::size_t>(ix.ln1)];
        for (int t = 0; t < T_; ++t)
            rmsnorm_row_backward(L.x_in.row(t), g1.weight.row(0), dln_.row(t), d_,
                                 L.ln1_ms[static_cast<std::size_t>(t)],
                                 L.ln1_rstd[static_cast<std::size_t>(t)], dmid_.row(t),
                                 g1.grad_weight.row(0), break_rmsnorm_);
        for (std::size_t i = 0; i < dstream_.size(); ++i) dstream_.data[i] += dmid_.data[i];
    }

    Matrix& dwe = p_.tensors[static_cast<std::size_t>(we_)].vgrad;
    for (int t = 0; t < T_; ++t) {
        double* dst = dwe.row(tokens_[static_cast<std::size_t>(t)]);
        const double* src = dstream_.row(t);
        for (int j = 0; j < d_; ++j) dst[j] += emb_mult_ * src[j];
    }
    cache_valid_ = false;  // caches consumed; a second backward would double-count
}

void Model::end_step(int n_sequences) {
    if (n_sequences <= 0) throw std::invalid_argument("model: end_step needs n_sequences >= 1");
    const double inv = 1.0 / n_sequences;
    for (auto& t : p_.tensors) {
        if (t.is_gamma())
            t.grad_weight.scale(inv);
        else
            t.vgrad.scale(inv);
    }
    reparam_backward(p_);
}

Matrix Model::attention_forward(const Matrix& x, int layer) {
    if (x.rows != T_ || x.cols != d_) throw std::invalid_argument("model: attention input shape");
    if (layer < 0 || layer >= p_.cfg.n_layers) throw std::invalid_argument("model: layer index");
    Matrix out(T_, d_);
    attention_into(layer, x, out);
    cache_valid_ = false;
    return out;
}

Matrix Model::ffn_forward(const Matrix& x, int layer) {
    if (x.rows != T_ || x.cols != d_) throw std::invalid_argument("model: ffn input shape");
    if (layer < 0 || layer >= p_.cfg.n_layers) throw std::invalid_argument("model: layer index");
    Matrix out(T_, d_);
    ffn_into(layer, x, out);
    cache_valid_ = false;
    return out;
}

}  // namespace wesar
