#include "wesar/verify.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "wesar/config.hpp"
#include "wesar/init.hpp"
#include "wesar/model.hpp"
#include "wesar/optim.hpp"
#include "wesar/params.hpp"
#include "wesar/reparam.hpp"

namespace wesar {

ProbeResult abs_probe(std::string name, double measured, double expected, double tolerance,
                      long samples) {
    ProbeResult r;
    r.name = std::move(name);
    r.measured = measured;
    r.expected = expected;
    r.tolerance = tolerance;
    r.relative = false;
    r.samples = samples;
    r.pass = std::isfinite(measured) && std::abs(measured - expected) <= tolerance;
    return r;
}

ProbeResult band_probe(std::string name, double measured, double expected, double tolerance,
                       long samples) {
    ProbeResult r;
    r.name = std::move(name);
    r.measured = measured;
    r.expected = expected;
    r.tolerance = tolerance;
    r.relative = true;
    r.samples = samples;
    if (std::isfinite(measured) && measured > 0.0 && expected > 0.0) {
        double ratio = std::max(measured / expected, expected / measured);
        r.pass = ratio <= 1.0 + tolerance;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

namespace {

constexpr double kFdStep = 1e-5;

ModelConfig fd_model_config() {
    ModelConfig mc;
    mc.d = 16;
    mc.n_layers = 2;
    mc.n_heads = 2;
    mc.vocab = 32;
    mc.ctx = 8;
    mc.ffn_mult = 4;
    // Zero eps makes the norm backward exact, so the 1e-4 budget is spent on
    // finite-difference truncation alone.
    mc.rmsnorm_eps = 0.0;
    return mc;
}

InitSpec fd_init_spec(ReparamKind kind) {
    if (kind == ReparamKind::WeSaR) {
        return InitSpec{InitScheme::WeSaR, std::sqrt(4e-5), EmbedScaling::None};
    }
    return InitSpec{InitScheme::He, std::sqrt(4e-5), EmbedScaling::ConstMultiplier};
}

struct FdOutcome {
    double max_rel = 0.0;   // worst relative error
    double max_abs = 0.0;   // worst |analytic| or |fd| magnitude (zero-loss probe)
    long coords = 0;
};

// Floor on the relative-error denominator.  Central differences at step 1e-5
// resolve the loss difference to roughly 4e-11 absolute (cancellation of two
// ~3.5 losses computed through ~1e5 flops), so coordinates with gradients far
// below 1e-5 would measure that noise floor rather than backward correctness.
// 1e-5 keeps the noise contribution near 4e-6, well under the 1e-4 gate,
// while a broken backward still shows up as errors of order one on the
// normally sized gradients.
constexpr double kFdDenomFloor = 1e-5;

double rel_err(double analytic, double fd) {
    return std::abs(analytic - fd) /
           std::max({kFdDenomFloor, std::abs(analytic), std::abs(fd)});
}

// Central differences over every weight/gate coordinate (each stride-th one
// when stride > 1) against the analytic backward.
FdOutcome run_fd(ReparamKind kind, std::uint64_t seed, bool break_rmsnorm, double loss_scale,
                 int stride) {
    ModelConfig mc = fd_model_config();
    ReparamMode mode;
    mode.kind = kind;
    mode.sigma_sq = 4e-5;
    InitSpec spec = fd_init_spec(kind);

    Params p = make_params(mc, mode);
    Rng init_rng = Rng(seed).split("fd-init");
    initialize_model(p, spec, init_rng);
    Model m(p, spec, /*z_coeff=*/1e-4);
    m.set_break_rmsnorm_backward(break_rmsnorm);
    m.set_loss_scale(loss_scale);

    Rng tok_rng = Rng(seed).split("fd-tokens");
    std::vector<int> tokens(static_cast<std::size_t>(mc.ctx));
    std::vector<int> targets(static_cast<std::size_t>(mc.ctx));
    for (auto& t : tokens) t = static_cast<int>(bounded_u64(tok_rng, mc.vocab));
    for (auto& t : targets) t = static_cast<int>(bounded_u64(tok_rng, mc.vocab));

    m.zero_grads();
    m.refresh_virtual_only();
    m.forward_loss(tokens.data(), targets.data(), mc.ctx);
    m.backward();
    m.end_step(1);

    std::vector<std::vector<double>> grad_w, grad_g;
    for (const ParamTensor& t : p.tensors) {
        grad_w.push_back(t.grad_weight.data);
        grad_g.push_back(t.grad_gate);
    }

    // The probe differentiates loss_scale * L so the zero-scale variant has
    // an exactly constant objective, matching what the backward pass saw.
    auto loss_at = [&]() {
        m.refresh_virtual_only();
        return loss_scale * m.forward_loss(tokens.data(), targets.data(), mc.ctx);
    };

    FdOutcome out;
    // Richardson-extrapolated central differences: gates amplify an actual
    // coordinate's effective step by alpha (up to ~158 on the embedding), so
    // a plain (L+ - L-)/2h is truncation-limited near 1e-4; combining the
    // full and half step cancels the h^2 term and restores margin.
    auto probe_coord = [&](double& coord, double analytic) {
        double orig = coord;
        coord = orig + kFdStep;
        double lp1 = loss_at();
        coord = orig - kFdStep;
        double lm1 = loss_at();
        coord = orig + 0.5 * kFdStep;
        double lp2 = loss_at();
        coord = orig - 0.5 * kFdStep;
        double lm2 = loss_at();
        coord = orig;
        double fd = (8.0 * (lp2 - lm2) - (lp1 - lm1)) / (6.0 * kFdStep);
        out.max_rel = std::max(out.max_rel, rel_err(analytic, fd));
        out.max_abs = std::max({out.max_abs, std::abs(analytic), std::abs(fd)});
        out.coords += 1;
    };
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        ParamTensor& t = p.tensors[i];
        for (std::size_t k = 0; k < t.weight.size(); k += static_cast<std::size_t>(stride)) {
            probe_coord(t.weight.data[k], grad_w[i][k]);
        }
        if (t.gate_trainable) {
            for (std::size_t k = 0; k < t.gate.size(); k += static_cast<std::size_t>(stride)) {
                probe_coord(t.gate[k], grad_g[i][k]);
            }
        }
    }
    return out;
}

const char* mode_tag(ReparamKind k) {
    switch (k) {
        case ReparamKind::None: return "none";
        case ReparamKind::WeSaR: return "wesar";
        case ReparamKind::WeightNorm: return "weightnorm";
        case ReparamKind::SigmaReparam: return "sigmareparam";
        case ReparamKind::ResidualScaling: return "residualscaling";
    }
    return "?";
}

}  // namespace

std::vector<ProbeResult> fd_grad_check(std::uint64_t seed) {
    std::vector<ProbeResult> out;
    for (ReparamKind kind :
         {ReparamKind::None, ReparamKind::WeSaR, ReparamKind::WeightNorm,
          ReparamKind::SigmaReparam, ReparamKind::ResidualScaling}) {
        FdOutcome fo = run_fd(kind, seed, /*break_rmsnorm=*/false, /*loss_scale=*/1.0,
                              /*stride=*/1);
        out.push_back(abs_probe(std::string("grad.fd.") + mode_tag(kind), fo.max_rel, 0.0, 1e-4,
                                fo.coords));
    }

    // Mutation canary: with the norm backward deliberately broken the same
    // check must blow past the tolerance, or the probe proves nothing.
    FdOutcome broken = run_fd(ReparamKind::None, seed, /*break_rmsnorm=*/true, /*loss_scale=*/1.0,
                              /*stride=*/13);
    ProbeResult canary = abs_probe("grad.mutation_canary", broken.max_rel > 1e-3 ? 1.0 : 0.0, 1.0,
                                   0.5, broken.coords);
    char note[96];
    std::snprintf(note, sizeof(note), "broken-backward max rel err %.3g (needs > 1e-3)",
                  broken.max_rel);
    canary.note = note;
    out.push_back(canary);

    // Zero-loss point: a constant objective must leave every analytic
    // gradient and finite-difference estimate at exactly zero.
    FdOutcome zero = run_fd(ReparamKind::WeSaR, seed, /*break_rmsnorm=*/false, /*loss_scale=*/0.0,
                            /*stride=*/29);
    out.push_back(abs_probe("grad.zero_loss", zero.max_abs, 0.0, 1e-8, zero.coords));
    return out;
}

// ---------------------------------------------------------------------------
// Gradient-scale preservation through an He chain
// ---------------------------------------------------------------------------

namespace {

ProbeResult scale_chain(const std::string& name, int L, int d, int trials, double weight_std,
                        double expected, double band, std::uint64_t seed) {
    Rng rng = Rng(seed).split("scale-chain");
    double num = 0.0, den = 0.0;
    std::vector<double> delta(static_cast<std::size_t>(d));
    std::vector<double> next(static_cast<std::size_t>(d));
    for (int trial = 0; trial < trials; ++trial) {
        for (double& x : delta) x = rng.gaussian();
        double in = 0.0;
        for (double x : delta) in += x * x;
        den += in;
        for (int l = 0; l < L; ++l) {
            Matrix w = gaussian_fill(rng, d, d, weight_std);
            for (int i = 0; i < d; ++i) {
                const double* row = w.row(i);
                double s = 0.0;
                for (int j = 0; j < d; ++j) s += row[j] * delta[static_cast<std::size_t>(j)];
                next[static_cast<std::size_t>(i)] = s;
            }
            delta.swap(next);
        }
        double fin = 0.0;
        for (double x : delta) fin += x * x;
        num += fin;
    }
    return band_probe(name, num / den, expected, band, trials);
}

}  // namespace

ProbeResult gradient_scale_probe(int L, int d, int trials, std::uint64_t seed) {
    return scale_chain("scale.he_chain", L, d, trials, std::sqrt(1.0 / d), 1.0, 0.25, seed);
}

std::vector<ProbeResult> gradient_scale_suite(std::uint64_t seed) {
    std::vector<ProbeResult> out;
    out.push_back(gradient_scale_probe(10, 256, 100, seed));
    // Doubling every weight must show the 4^L blow-up (failure direction).
    ProbeResult explode = scale_chain("scale.explode_4x", 10, 256, 30, 2.0 * std::sqrt(1.0 / 256.0),
                                      std::pow(4.0, 10), 3.0, seed + 1);
    explode.note = "doubled weights; growth must track 4^L";
    out.push_back(explode);
    // Law of large numbers: one wide layer concentrates tightly around 1.
    out.push_back(scale_chain("scale.lln_wide", 1, 2048, 50, std::sqrt(1.0 / 2048.0), 1.0, 0.05,
                              seed + 2));
    return out;
}

// ---------------------------------------------------------------------------
// Residual gradient growth
// ---------------------------------------------------------------------------

ProbeResult residual_growth_probe(int N, int d, bool scaled, int trials, std::uint64_t seed) {
    if (N < 1 || d < 1 || trials < 1) {
        throw std::invalid_argument("verify: residual probe needs positive N, d, trials");
    }
    const int branches = 2 * N;
    const double std1 = std::sqrt(1.0 / d);
    const double std2 = scaled ? std::sqrt(1.0 / (2.0 * N * d)) : std::sqrt(1.0 / d);
    const double s2 = scaled ? 1.0 / (2.0 * N) : 1.0;
    Rng rng = Rng(seed).split(scaled ? "residual-scaled" : "residual-raw");

    double num = 0.0, den = 0.0;
    std::vector<double> delta(static_cast<std::size_t>(d));
    std::vector<double> t1(static_cast<std::size_t>(d));
    std::vector<double> t2(static_cast<std::size_t>(d));
    for (int trial = 0; trial < trials; ++trial) {
        for (double& x : delta) x = rng.gaussian();
        double in = 0.0;
        for (double x : delta) in += x * x;
        den += in;
        for (int b = 0; b < branches; ++b) {
            Matrix w1 = gaussian_fill(rng, d, d, std1);
            Matrix w2 = gaussian_fill(rng, d, d, std2);
            // Backward through y = W2 W1 x + x: delta += W1^T (W2^T delta).
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int i = 0; i < d; ++i) s += w2.at(i, j) * delta[static_cast<std::size_t>(i)];
                t1[static_cast<std::size_t>(j)] = s;
            }
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int i = 0; i < d; ++i) s += w1.at(i, j) * t1[static_cast<std::size_t>(i)];
                t2[static_cast<std::size_t>(j)] = s;
            }
            for (int j = 0; j < d; ++j) delta[static_cast<std::size_t>(j)] += t2[static_cast<std::size_t>(j)];
        }
        double fin = 0.0;
        for (double x : delta) fin += x * x;
        num += fin;
    }
    double expected = std::pow(1.0 + s2, branches);
    std::string name = scaled ? "residual.scaled" : "residual.unscaled";
    // The scaled band is the absolute [expected-0.5, expected+0.5] window;
    // the unscaled explosion only needs to land within a factor of two.
    return scaled ? abs_probe(name, num / den, expected, 0.5, trials)
                  : band_probe(name, num / den, expected, 1.0, trials);
}

std::vector<ProbeResult> residual_growth_suite(std::uint64_t seed) {
    std::vector<ProbeResult> out;
    out.push_back(residual_growth_probe(40, 128, /*scaled=*/true, 100, seed));
    out.push_back(residual_growth_probe(4, 128, /*scaled=*/false, 100, seed));
    // f == 0: the branch contributes nothing and the ratio is exactly one.
    {
        Rng rng = Rng(seed).split("residual-zero");
        double num = 0.0, den = 0.0;
        std::vector<double> delta(64);
        for (int trial = 0; trial < 16; ++trial) {
            for (double& x : delta) x = rng.gaussian();
            double a = 0.0;
            for (double x : delta) a += x * x;
            double b = 0.0;
            for (double x : delta) b += x * x;
            den += a;
            num += b;  // identical summation: the ratio is bitwise 1
        }
        out.push_back(abs_probe("residual.zero_branch", num / den, 1.0, 0.0, 16));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Adam scale invariance
// ---------------------------------------------------------------------------

namespace {

ProbeResult adam_sequence_probe(const std::string& name, int steps, double c,
                                std::uint64_t seed) {
    TrainConfig cfg;
    cfg.lr = 3e-4;
    cfg.eps = 0.0;
    cfg.weight_decay = 0.0;
    Rng rng = Rng(seed).split("adam-seq");
    Matrix wa(3, 3), wb(3, 3);
    for (std::size_t i = 0; i < wa.size(); ++i) wa.data[i] = wb.data[i] = rng.gaussian();
    AdamState sa, sb;
    sa.m = Matrix(3, 3);
    sa.v = Matrix(3, 3);
    sb.m = Matrix(3, 3);
    sb.v = Matrix(3, 3);
    Matrix da(3, 3), db(3, 3);
    double worst = 0.0;
    for (int s = 0; s < steps; ++s) {
        Matrix g(3, 3);
        for (double& x : g.data) x = rng.gaussian();
        Matrix gc = g;
        gc.scale(c);
        adam_step(wa, g, sa, cfg.lr, cfg, false, &da);
        adam_step(wb, gc, sb, cfg.lr, cfg, false, &db);
        for (std::size_t i = 0; i < da.size(); ++i) {
            worst = std::max(worst, std::abs(da.data[i] - db.data[i]));
        }
    }
    return abs_probe(name, worst, 0.0, 1e-12, steps);
}

ProbeResult adam_model_probe(std::uint64_t seed) {
    // Two WeSaR draws with sigma vs 4*sigma share the same Gaussian stream,
    // so W' = 4W and alpha' = alpha/4 exactly: identical virtual weights,
    // per-tensor gradient scale 1/4, and (at eps=0, wd=0) identical updates.
    ModelConfig mc = fd_model_config();
    TrainConfig tc;
    tc.lr = 1e-3;
    tc.eps = 0.0;
    tc.weight_decay = 0.0;

    auto build = [&](double sigma_sq, Params& p) {
        ReparamMode mode;
        mode.kind = ReparamKind::WeSaR;
        mode.sigma_sq = sigma_sq;
        p = make_params(mc, mode);
        InitSpec spec{InitScheme::WeSaR, mode.sigma(), EmbedScaling::None};
        Rng rng = Rng(seed).split("adam-model");
        initialize_model(p, spec, rng);
    };
    Params pa, pb;
    build(4e-5, pa);
    build(16.0 * 4e-5, pb);

    bool same_virtual = true;
    for (std::size_t i = 0; i < pa.tensors.size(); ++i) {
        if (pa.tensors[i].vw.data != pb.tensors[i].vw.data) same_virtual = false;
    }

    InitSpec spec{InitScheme::WeSaR, std::sqrt(4e-5), EmbedScaling::None};
    Model ma(pa, spec, 1e-4);
    Model mb(pb, spec, 1e-4);
    Rng tok_rng = Rng(seed).split("adam-model-tokens");
    std::vector<int> tokens(static_cast<std::size_t>(mc.ctx));
    std::vector<int> targets(static_cast<std::size_t>(mc.ctx));
    for (auto& t : tokens) t = static_cast<int>(bounded_u64(tok_rng, mc.vocab));
    for (auto& t : targets) t = static_cast<int>(bounded_u64(tok_rng, mc.vocab));

    double worst = 0.0;
    auto one_step = [&](Model& m, Params& p, std::vector<Matrix>& deltas) {
        m.begin_step();
        m.forward_loss(tokens.data(), targets.data(), mc.ctx);
        m.backward();
        m.end_step(1);
        for (ParamTensor& t : p.tensors) {
            AdamState st;
            st.m = Matrix(t.weight.rows, t.weight.cols);
            st.v = Matrix(t.weight.rows, t.weight.cols);
            Matrix delta(t.weight.rows, t.weight.cols);
            adam_step(t.weight, t.grad_weight, st, tc.lr, tc, false, &delta);
            deltas.push_back(std::move(delta));
        }
    };
    std::vector<Matrix> da, db;
    one_step(ma, pa, da);
    one_step(mb, pb, db);
    long coords = 0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        for (std::size_t k = 0; k < da[i].size(); ++k) {
            worst = std::max(worst, std::abs(da[i].data[k] - db[i].data[k]));
            ++coords;
        }
    }
    ProbeResult r = abs_probe("adam.model_sigma_4x", worst, 0.0, 1e-12, coords);
    if (!same_virtual) {
        r.pass = false;
        r.note = "virtual inits diverged; scale construction broken";
    }
    return r;
}

}  // namespace

std::vector<ProbeResult> adam_invariance_probe(int steps, double c, std::uint64_t seed) {
    std::vector<ProbeResult> out;
    out.push_back(adam_sequence_probe("adam.sequence", steps, c, seed));
    ProbeResult unit = adam_sequence_probe("adam.sequence_c1", steps, 1.0, seed);
    unit.tolerance = 0.0;  // c = 1 runs the identical arithmetic: exact zero
    unit.pass = unit.measured == 0.0;
    out.push_back(unit);
    out.push_back(adam_model_probe(seed));
    return out;
}

// ---------------------------------------------------------------------------
// Spectral-norm oracle
// ---------------------------------------------------------------------------

namespace {

double normalize_or_zero(std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    double n = std::sqrt(s);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
    return n;
}

}  // namespace

SpectralResult spectral_norm_oracle(const Matrix& w, double tol, Rng& rng) {
    if (tol <= 0.0) {
        throw std::invalid_argument("verify: spectral oracle tolerance must be positive");
    }
    const long cap = 100000;
    std::vector<double> u(static_cast<std::size_t>(w.rows));
    std::vector<double> v(static_cast<std::size_t>(w.cols));
    std::vector<double> wv(static_cast<std::size_t>(w.rows));
    for (double& x : u) x = rng.gaussian();
    normalize_or_zero(u);

    SpectralResult res;
    double prev = -1.0;
    for (long it = 0; it < cap; ++it) {
        for (int j = 0; j < w.cols; ++j) {
            double s = 0.0;
            for (int i = 0; i < w.rows; ++i) s += w.at(i, j) * u[static_cast<std::size_t>(i)];
            v[static_cast<std::size_t>(j)] = s;
        }
        normalize_or_zero(v);
        for (int i = 0; i < w.rows; ++i) {
            const double* row = w.row(i);
            double s = 0.0;
            for (int j = 0; j < w.cols; ++j) s += row[j] * v[static_cast<std::size_t>(j)];
            wv[static_cast<std::size_t>(i)] = s;
        }
        double est = 0.0;
        for (double x : wv) est += x * x;
        est = std::sqrt(est);
        res.value = est;
        res.iterations = it + 1;
        if (prev >= 0.0 && std::abs(est - prev) < tol) {
            res.converged = true;
            break;
        }
        prev = est;
        u = wv;
        normalize_or_zero(u);
    }
    return res;
}

std::vector<ProbeResult> spectral_suite(std::uint64_t seed) {
    std::vector<ProbeResult> out;
    {
        Matrix w(2, 2);
        w.at(0, 0) = 3.0;
        w.at(1, 1) = 1.0;
        Rng rng = Rng(seed).split("spectral-diag");
        SpectralResult r = spectral_norm_oracle(w, 1e-12, rng);
        ProbeResult p = abs_probe("spectral.diag", r.value, 3.0, 1e-8, r.iterations);
        p.pass = p.pass && r.converged;
        out.push_back(p);
    }
    {
        // Householder reflector: orthogonal, so every singular value is 1.
        int d = 8;
        Rng rng = Rng(seed).split("spectral-house");
        std::vector<double> h(static_cast<std::size_t>(d));
        for (double& x : h) x = rng.gaussian();
        normalize_or_zero(h);
        Matrix w(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                w.at(i, j) = (i == j ? 1.0 : 0.0) -
                             2.0 * h[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(j)];
            }
        }
        SpectralResult r = spectral_norm_oracle(w, 1e-12, rng);
        ProbeResult p = abs_probe("spectral.orthogonal", r.value, 1.0, 1e-8, r.iterations);
        p.pass = p.pass && r.converged;
        out.push_back(p);
    }
    {
        // 1000 accumulated one-step estimates against the converged oracle.
        Rng wrng = Rng(seed).split("spectral-matrix");
        Matrix w = gaussian_fill(wrng, 32, 32, 1.0 / std::sqrt(32.0));
        PowerIterState st;
        st.u.assign(32, 0.0);
        st.v.assign(32, 0.0);
        Rng srng = Rng(seed).split("spectral-state");
        for (double& x : st.u) x = srng.gaussian();
        for (double& x : st.v) x = srng.gaussian();
        normalize_or_zero(st.u);
        normalize_or_zero(st.v);
        for (int i = 0; i < 1000; ++i) power_iterate(w, st);
        Rng orng = Rng(seed).split("spectral-oracle");
        SpectralResult oracle = spectral_norm_oracle(w, 1e-12, orng);
        ProbeResult p = band_probe("spectral.accumulated", st.est, oracle.value, 0.01, 1000);
        p.pass = p.pass && oracle.converged;
        out.push_back(p);
    }
    {
        // The oracle's answer must not depend on its random start.
        Rng wrng = Rng(seed).split("spectral-matrix2");
        Matrix w = gaussian_fill(wrng, 24, 40, 0.2);
        Rng r1 = Rng(seed).split("spectral-start1");
        Rng r2 = Rng(seed + 77).split("spectral-start2");
        SpectralResult a = spectral_norm_oracle(w, 1e-12, r1);
        SpectralResult b = spectral_norm_oracle(w, 1e-12, r2);
        ProbeResult p = abs_probe("spectral.start_independent", std::abs(a.value - b.value), 0.0,
                                  1e-8, a.iterations + b.iterations);
        p.pass = p.pass && a.converged && b.converged;
        out.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Suite plumbing
// ---------------------------------------------------------------------------

bool known_suite(const std::string& suite) {
    return suite == "grad" || suite == "adam" || suite == "scale" || suite == "residual" ||
           suite == "spectral" || suite == "all";
}

std::vector<ProbeResult> run_suite(const std::string& suite, std::uint64_t seed) {
    if (!known_suite(suite)) {
        throw ConfigError("verify: unknown suite '" + suite +
                          "' (grad, adam, scale, residual, spectral, all)");
    }
    std::vector<ProbeResult> out;
    auto append = [&](std::vector<ProbeResult> v) {
        for (auto& r : v) out.push_back(std::move(r));
    };
    if (suite == "grad" || suite == "all") append(fd_grad_check(seed));
    if (suite == "adam" || suite == "all") append(adam_invariance_probe(200, 7.3, seed));
    if (suite == "scale" || suite == "all") append(gradient_scale_suite(seed));
    if (suite == "residual" || suite == "all") append(residual_growth_suite(seed));
    if (suite == "spectral" || suite == "all") append(spectral_suite(seed));
    return out;
}

int print_probes(const std::vector<ProbeResult>& results, std::ostream& out) {
    int failures = 0;
    for (const ProbeResult& r : results) {
        char line[256];
        std::snprintf(line, sizeof(line),
                      "%-26s measured=%-13.6g expected=%-13.6g tol=%-9.3g%s %s", r.name.c_str(),
                      r.measured, r.expected, r.tolerance, r.relative ? " (rel)" : "      ",
                      r.pass ? "PASS" : "FAIL");
        out << line;
        if (!r.note.empty()) out << "  [" << r.note << "]";
        out << '\n';
        if (!r.pass) ++failures;
    }
    return failures;
}

}  // namespace wesar
