// Parameter container for the decoder.
//
// Every trainable matrix is a ParamTensor: the stored ("actual") weight W,
// an optional scalar or per-row gate, and the derived virtual weight Wbar
// that the forward pass consumes.  With reparameterization disabled the
// virtual weight aliases the actual one conceptually (vw holds a copy kept
// in sync by refresh, so the forward path is uniform across modes).
//
// Gradients flow in two stages: the backward pass accumulates d(loss)/d(Wbar)
// into vgrad, and the reparameterization maps that to grad_weight/grad_gate.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wesar/config.hpp"
#include "wesar/matrix.hpp"

namespace wesar {

// What a matrix does in the network.  Decides its initialization std and,
// for residual scaling, whether it feeds a residual branch output.
enum class Role {
    Embed,       // W_e: vocab x d token embedding
    Query,       // W_q
    Key,         // W_k
    Value,       // W_v
    AttnOut,     // W_o: residual branch output (attention)
    FfnUp,       // W_u
    FfnDown,     // W_d: residual branch output (feed-forward)
    Unembed,     // W_p: d x vocab output projection
    Gamma,       // RMSNorm gain vector (stored 1 x d); never reparameterized
};

const char* to_string(Role r);

// True for W_o and W_d, the matrices whose output lands on the residual
// stream through a branch (used by residual scaling and the depth-aware stds).
bool is_residual_out(Role r);

struct PowerIterState {
    std::vector<double> u;   // left vector, length rows
    std::vector<double> v;   // right vector, length cols
    double est = 0.0;        // current spectral-norm estimate, frozen between iterations
};

struct ParamTensor {
    std::string name;
    Role role = Role::Embed;

    Matrix weight;       // actual stored parameter
    Matrix grad_weight;  // d(loss)/d(weight), after reparam backward

    // Gate: one scalar (WeSaR, sigmaReparam) or one value per output row
    // (WeightNorm).  Empty when the tensor has no gate in the active mode.
    std::vector<double> gate;
    std::vector<double> grad_gate;
    bool gate_trainable = false;

    Matrix vw;      // virtual weight consumed by forward
    Matrix vgrad;   // d(loss)/d(virtual weight), produced by backward

    PowerIterState power;  // sigmaReparam only

    bool wd_applies = true;  // weight decay hits weight matrices, never gates or gamma

    bool has_gate() const { return !gate.empty(); }
    bool is_gamma() const { return role == Role::Gamma; }
};

// All parameters of one model, in a fixed declaration order shared by
// checkpoints, telemetry columns, and the optimizer state:
//   W_e, then per layer [ln1.gamma, W_q, W_k, W_v, W_o, ln2.gamma, W_u, W_d],
//   final.gamma, W_p.
struct Params {
    ModelConfig cfg;
    ReparamMode mode;
    std::vector<ParamTensor> tensors;

    ParamTensor& find(const std::string& name);
    const ParamTensor& find(const std::string& name) const;

    // Flat index of a layer's tensor within `tensors`.  slot is the position
    // in the per-layer list above (0 = ln1.gamma, ..., 7 = W_d).
    int layer_base(int layer) const { return 1 + 8 * layer; }

    std::int64_t total_weight_count() const;
};

// Builds the tensor list with shapes from cfg and gates from mode; weights
// are zero until initialize_model fills them.
Params make_params(const ModelConfig& cfg, const ReparamMode& mode);

}  // namespace wesar
