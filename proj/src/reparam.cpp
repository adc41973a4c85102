#include "wesar/reparam.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "wesar/init.hpp"

namespace wesar {
namespace {

constexpr double kNormFloor = 1e-12;

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument(std::string("reparam: shape mismatch in ") + what);
}

// Row norms with the degenerate-row floor; warns once per call.
std::vector<double> row_norms_floored(const Matrix& w) {
    std::vector<double> norms(static_cast<std::size_t>(w.rows));
    int floored = 0;
    for (int r = 0; r < w.rows; ++r) {
        const double* row = w.row(r);
        double ss = 0.0;
        for (int c = 0; c < w.cols; ++c) ss += row[c] * row[c];
        double n = std::sqrt(ss);
        if (n < kNormFloor) {
            n = kNormFloor;
            ++floored;
        }
        norms[static_cast<std::size_t>(r)] = n;
    }
    if (floored > 0)
        std::fprintf(stderr, "warning: weightnorm floored %d zero-norm row(s) at %g\n", floored,
                     kNormFloor);
    return norms;
}

}  // namespace

double wesar_gate_init(Role role, int d, int N, double sigma) {
    if (sigma <= 0.0) throw ConfigError("reparam: wesar sigma must be > 0");
    return virtual_std(role, d, N) / sigma;
}

Matrix wesar_apply(const Matrix& w, double alpha) {
    Matrix out = w;
    out.scale(alpha);
    return out;
}

void wesar_backward(const Matrix& dvw, const Matrix& w, double alpha, Matrix& dw, double& dalpha) {
    check_same_shape(dvw, w, "wesar_backward");
    dw = dvw;
    dw.scale(alpha);
    dalpha = dot(dvw, w);
}

Matrix weightnorm_apply(const Matrix& w, const std::vector<double>& alpha_rows) {
    if (alpha_rows.size() != static_cast<std::size_t>(w.rows))
        throw std::invalid_argument("reparam: weightnorm gate length must equal row count");
    std::vector<double> norms = row_norms_floored(w);
    Matrix out(w.rows, w.cols);
    for (int r = 0; r < w.rows; ++r) {
        double s = alpha_rows[static_cast<std::size_t>(r)] / norms[static_cast<std::size_t>(r)];
        const double* src = w.row(r);
        double* dst = out.row(r);
        for (int c = 0; c < w.cols; ++c) dst[c] = s * src[c];
    }
    return out;
}

void weightnorm_backward(const Matrix& dvw, const Matrix& w,
                         const std::vector<double>& alpha_rows, Matrix& dw,
                         std::vector<double>& dalpha) {
    check_same_shape(dvw, w, "weightnorm_backward");
    if (alpha_rows.size() != static_cast<std::size_t>(w.rows))
        throw std::invalid_argument("reparam: weightnorm gate length must equal row count");
    std::vector<double> norms = row_norms_floored(w);
    dw = Matrix(w.rows, w.cols);
    dalpha.assign(static_cast<std::size_t>(w.rows), 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const std::size_t ri = static_cast<std::size_t>(r);
        const double n = norms[ri];
        const double* wr = w.row(r);
        const double* gr = dvw.row(r);
        double* out = dw.row(r);
        // radial component <u, dvbar> with u = w_r / n
        double radial = 0.0;
        for (int c = 0; c < w.cols; ++c) radial += wr[c] * gr[c];
        radial /= n;
        dalpha[ri] = radial;
        const double s = alpha_rows[ri] / n;
        for (int c = 0; c < w.cols; ++c) out[c] = s * (gr[c] - wr[c] / n * radial);
    }
}

void power_iterate(const Matrix& w, PowerIterState& st) {
    if (st.u.size() != static_cast<std::size_t>(w.rows) ||
        st.v.size() != static_cast<std::size_t>(w.cols))
        throw std::invalid_argument("reparam: power-iteration state shape mismatch");
    // v <- normalize(W^T u)
    std::vector<double> wtu(static_cast<std::size_t>(w.cols), 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const double* row = w.row(r);
        const double ur = st.u[static_cast<std::size_t>(r)];
        for (int c = 0; c < w.cols; ++c) wtu[static_cast<std::size_t>(c)] += row[c] * ur;
    }
    double nv = 0.0;
    for (double x : wtu) nv += x * x;
    nv = std::sqrt(nv);
    if (nv < 1e-300) {
        st.est = 0.0;  // degenerate; apply will reject it
        return;
    }
    for (std::size_t i = 0; i < wtu.size(); ++i) st.v[i] = wtu[i] / nv;
    // u <- normalize(W v); the norm itself is u^T W v for the new u, v
    std::vector<double> wv(static_cast<std::size_t>(w.rows), 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const double* row = w.row(r);
        double acc = 0.0;
        for (int c = 0; c < w.cols; ++c) acc += row[c] * st.v[static_cast<std::size_t>(c)];
        wv[static_cast<std::size_t>(r)] = acc;
    }
    double nu = 0.0;
    for (double x : wv) nu += x * x;
    nu = std::sqrt(nu);
    if (nu < 1e-300) {
        st.est = 0.0;
        return;
    }
    for (std::size_t i = 0; i < wv.size(); ++i) st.u[i] = wv[i] / nu;
    st.est = nu;
}

Matrix sigma_reparam_apply(const Matrix& w, double alpha, const PowerIterState& st) {
    if (st.est < kNormFloor)
        throw std::runtime_error("reparam: sigmareparam spectral estimate is degenerate");
    Matrix out = w;
    out.scale(alpha / st.est);
    return out;
}

void sigma_reparam_backward(const Matrix& dvw, const Matrix& w, double alpha,
                            const PowerIterState& st, Matrix& dw, double& dalpha) {
    check_same_shape(dvw, w, "sigma_reparam_backward");
    if (st.est < kNormFloor)
        throw std::runtime_error("reparam: sigmareparam spectral estimate is degenerate");
    dw = dvw;
    dw.scale(alpha / st.est);
    dalpha = dot(dvw, w) / st.est;
}

double residual_multiplier(ReparamKind kind, int n_layers) {
    if (kind != ReparamKind::ResidualScaling) return 1.0;
    return 1.0 / std::sqrt(2.0 * n_layers);
}

void refresh_virtual(Params& p) {
    for (auto& t : p.tensors) {
        if (t.is_gamma()) continue;
        switch (p.mode.kind) {
            case ReparamKind::None:
            case ReparamKind::ResidualScaling:
                t.vw.data = t.weight.data;
                break;
            case ReparamKind::WeSaR: {
                const double a = t.gate[0];
                for (std::size_t i = 0; i < t.weight.size(); ++i) t.vw.data[i] = a * t.weight.data[i];
                break;
            }
            case ReparamKind::WeightNorm:
                t.vw = weightnorm_apply(t.weight, t.gate);
                break;
            case ReparamKind::SigmaReparam:
                t.vw = sigma_reparam_apply(t.weight, t.gate[0], t.power);
                break;
        }
    }
}

void begin_step_power(Params& p) {
    if (p.mode.kind != ReparamKind::SigmaReparam) return;
    for (auto& t : p.tensors) {
        if (t.is_gamma()) continue;
        power_iterate(t.weight, t.power);
    }
}

void reparam_backward(Params& p) {
    for (auto& t : p.tensors) {
        if (t.is_gamma()) continue;  // model writes gamma grads directly
        switch (p.mode.kind) {
            case ReparamKind::None:
            case ReparamKind::ResidualScaling:
                t.grad_weight.data = t.vgrad.data;
                break;
            case ReparamKind::WeSaR:
                wesar_backward(t.vgrad, t.weight, t.gate[0], t.grad_weight, t.grad_gate[0]);
                break;
            case ReparamKind::WeightNorm:
                weightnorm_backward(t.vgrad, t.weight, t.gate, t.grad_weight, t.grad_gate);
                break;
            case ReparamKind::SigmaReparam:
                sigma_reparam_backward(t.vgrad, t.weight, t.gate[0], t.power, t.grad_weight,
                                       t.grad_gate[0]);
                break;
        }
    }
}

void merge_gates(Params& p) {
    if (p.mode.kind != ReparamKind::WeSaR)
        throw ConfigError("reparam: merge applies only to wesar gates");
    for (auto& t : p.tensors) {
        if (t.is_gamma()) continue;
        t.weight.scale(t.gate[0]);
        t.gate[0] = 1.0;
    }
    refresh_virtual(p);
}

}  // namespace wesar
