// Initialization standard deviations per parameter role and scheme.
//
// Two layers of std exist for every weight matrix:
//   virtual std  — the scale the network should see after any gating,
//   actual std   — the scale of the stored parameter draw.
// For the baselines they mostly coincide; wesar separates them completely
// (common actual std sigma, role-dependent gate restoring the virtual scale).
#pragma once

#include <array>
#include <string>

#include "wesar/config.hpp"
#include "wesar/params.hpp"
#include "wesar/rng.hpp"

namespace wesar {

// The eight weight-matrix roles in table order (gamma excluded: it has no
// scale, it is initialized to ones).
inline constexpr std::array<Role, 8> kWeightRoles = {
    Role::Embed,  Role::Query, Role::Key,     Role::Value,
    Role::AttnOut, Role::FfnUp, Role::FfnDown, Role::Unembed,
};

// Post-gate (virtual) std for a role: W_e -> 1, W_q/W_k/W_v/W_u/W_p ->
// sqrt(1/d), W_o -> sqrt(1/(2Nd)), W_d -> sqrt(2/(8Nd)).  N is the layer
// count; the residual-output roles shrink with depth.  Gamma is invalid.
double virtual_std(Role role, int d, int N);

// Std of the stored parameter draw under the given scheme.
//   He:    virtual_std, except W_e -> sqrt(1/d)
//   Small: sqrt(2/(5d)) for all roles, except W_o/W_d -> sqrt(2/(10Nd))
//   WeSaR: spec.sigma for every role
double actual_std(Role role, const InitSpec& spec, int d, int N);

// Constant the forward pass multiplies embedding output by: 1/actual_std(W_e)
// when the scheme is he/small with embed_scaling=const_multiplier, else 1.
double embed_multiplier(const InitSpec& spec, int d);

// Draws every weight from N(0, actual_std^2), sets gamma to ones, installs
// gates (wesar alpha = virtual/sigma, weightnorm alpha_i = drawn row norm,
// sigmareparam alpha = 1 with one power iteration so the estimate is live),
// and refreshes virtual weights.  Under residual scaling the 1/sqrt(2N)
// factor on W_o/W_d moves out of the draw and into the forward multiplier,
// so those draws use the unscaled (sqrt(2N) times larger) std.
//
// Each tensor draws from rng.split(tensor name), so the result is
// independent of iteration order and of how much of the rng was consumed
// elsewhere.
void initialize_model(Params& params, const InitSpec& spec, Rng& rng);

// Role x scheme std table (virtual plus the three actual-std columns) for
// the inspect-init command, as aligned text and as CSV.
std::string init_table_text(int d, int N, double sigma);
std::string init_table_csv(int d, int N, double sigma);

}  // namespace wesar
