// Independent oracles and probes for the mathematical claims the trainer
// depends on: finite-difference gradients, backward gradient-scale
// preservation through He chains, residual gradient growth with and without
// depth scaling, Adam's invariance to gradient scale, and a converged
// power-iteration spectral-norm oracle.
//
// Probes are pure and seed-deterministic; each reports measured vs expected
// with its tolerance so a failure is diagnosable from the log line alone.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wesar/matrix.hpp"
#include "wesar/rng.hpp"

namespace wesar {

struct ProbeResult {
    std::string name;
    double measured = 0.0;
    double expected = 0.0;
    double tolerance = 0.0;
    bool relative = false;  // true: pass iff max(m/e, e/m) <= 1 + tolerance
    bool pass = false;
    long samples = 0;       // coordinates / trials backing the number
    std::string note;
};

// |measured - expected| <= tolerance.
ProbeResult abs_probe(std::string name, double measured, double expected, double tolerance,
                      long samples);
// Multiplicative band: max(m/e, e/m) <= 1 + tolerance (both must be > 0).
ProbeResult band_probe(std::string name, double measured, double expected, double tolerance,
                       long samples);

// Central finite differences (base step 1e-5, Richardson-extrapolated with
// the half step) against analytic gradients over every weight, gate, and
// gamma coordinate of a tiny model, once per reparameterization mode; plus
// a mutation canary (deliberately broken RMSNorm backward must be caught)
// and a zero-loss probe (scaling the objective by zero must zero every
// gradient exactly).
std::vector<ProbeResult> fd_grad_check(std::uint64_t seed);

// Backward pass through L fresh sqrt(1/d)-initialized linear layers; the
// squared gradient norm must come out where it went in (expected ratio 1).
ProbeResult gradient_scale_probe(int L, int d, int trials, std::uint64_t seed);
std::vector<ProbeResult> gradient_scale_suite(std::uint64_t seed);

// Backward pass through 2N residual branches delta += (W2 W1)^T delta with
// fresh Gaussian W1, W2 per branch.  scaled=true draws W2 with the extra
// 1/sqrt(2N) factor, so the growth approaches (1+1/(2N))^(2N) -> e instead
// of exploding as (s^2+1)^(2N).
ProbeResult residual_growth_probe(int N, int d, bool scaled, int trials, std::uint64_t seed);
std::vector<ProbeResult> residual_growth_suite(std::uint64_t seed);

// Sequence-level scalar oracle (same gradients vs the same times c) and the
// model-level construction: two models whose sigma differs 4x but whose
// virtual weights match bitwise must produce step-1 weight deltas within
// 1e-12 at eps=0, wd=0.
std::vector<ProbeResult> adam_invariance_probe(int steps, double c, std::uint64_t seed);

struct SpectralResult {
    double value = 0.0;
    long iterations = 0;
    bool converged = false;
};

// Power iteration run to convergence: stops when successive estimates move
// less than tol, capped at 1e5 iterations (non-convergence is flagged, not
// thrown — a near-degenerate spectrum is an answer, not an error).
SpectralResult spectral_norm_oracle(const Matrix& w, double tol, Rng& rng);
std::vector<ProbeResult> spectral_suite(std::uint64_t seed);

// Suite names: grad, adam, scale, residual, spectral, or all.
std::vector<ProbeResult> run_suite(const std::string& suite, std::uint64_t seed);
bool known_suite(const std::string& suite);

// One line per probe; returns the number of failures.
int print_probes(const std::vector<ProbeResult>& results, std::ostream& out);

}  // namespace wesar
