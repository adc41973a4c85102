// Reparameterizations: the map from stored parameters (weight, gate) to the
// virtual weight the network computes with, and the induced gradient map.
//
// Per-matrix ops are exposed standalone for property tests; the model-level
// entry points (refresh_virtual, begin_step_power, reparam_backward,
// merge_gates) walk a Params set and dispatch on its mode.
#pragma once

#include <vector>

#include "wesar/params.hpp"
#include "wesar/rng.hpp"

namespace wesar {

// Gate init for wesar: alpha = virtual_std(role, d, N) / sigma, so the
// virtual weight alpha*W has exactly the virtual std at step 0.
double wesar_gate_init(Role role, int d, int N, double sigma);

// --- wesar: scalar gate ------------------------------------------------
// Vbar = alpha * W;  dW = alpha * dVbar;  dalpha = <dVbar, W>.
Matrix wesar_apply(const Matrix& w, double alpha);
void wesar_backward(const Matrix& dvw, const Matrix& w, double alpha,
                    Matrix& dw, double& dalpha);

// --- weightnorm: per-row L2 normalize and scale ------------------------
// Row i of Vbar = (alpha_i / ||w_i||) * w_i.  The backward differentiates
// through the normalization: with n = ||w_i|| and unit row u = w_i/n,
//   dalpha_i = <u, dvbar_i>
//   dw_i     = (alpha_i/n) * (dvbar_i - u * <u, dvbar_i>).
// Rows with norm below 1e-12 are floored there and reported on stderr.
Matrix weightnorm_apply(const Matrix& w, const std::vector<double>& alpha_rows);
void weightnorm_backward(const Matrix& dvw, const Matrix& w,
                         const std::vector<double>& alpha_rows,
                         Matrix& dw, std::vector<double>& dalpha);

// --- sigmareparam: spectral normalization, estimate held constant ------
// One power-method update: v <- normalize(W^T u), u <- normalize(W v),
// est <- u^T W v (= ||W v||, so it never decreases for fixed W).
void power_iterate(const Matrix& w, PowerIterState& st);

// Vbar = (alpha / est) * W.  The backward deliberately does not
// differentiate est: dW = (alpha/est) * dVbar, dalpha = <dVbar, W> / est.
// est < 1e-12 throws (degenerate matrix).
Matrix sigma_reparam_apply(const Matrix& w, double alpha, const PowerIterState& st);
void sigma_reparam_backward(const Matrix& dvw, const Matrix& w, double alpha,
                            const PowerIterState& st, Matrix& dw, double& dalpha);

// --- residual scaling: fixed 1/sqrt(2N) on branch outputs --------------
// Returns the branch multiplier for the mode: 1/sqrt(2N) under residual
// scaling, 1 otherwise.  Applied by the model to each sublayer output
// before the residual add; untrainable.
double residual_multiplier(ReparamKind kind, int n_layers);

// --- model-level entry points ------------------------------------------

// Recompute vw from (weight, gate) for every non-gamma tensor under the
// set's mode.  For none/residualscaling vw is a plain copy (the residual
// factor lives in the forward pass).
void refresh_virtual(Params& p);

// One power iteration on every tensor (sigmareparam only; no-op otherwise).
// Called once per training step before refresh_virtual.
void begin_step_power(Params& p);

// Map accumulated vgrad to grad_weight / grad_gate for every tensor.
// Gamma tensors are untouched: the model writes their gradient directly.
void reparam_backward(Params& p);

// Fold wesar gates into the stored weights (weight *= alpha, alpha = 1)
// and refresh.  Idempotent.  Other modes have nothing to merge and throw.
void merge_gates(Params& p);

}  // namespace wesar
