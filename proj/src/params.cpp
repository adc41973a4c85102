#include "wesar/params.hpp"

#include <stdexcept>

namespace wesar {
namespace {

ParamTensor make_tensor(std::string name, Role role, int rows, int cols, const ReparamMode& mode) {
    ParamTensor t;
    t.name = std::move(name);
    t.role = role;
    t.weight = Matrix(rows, cols);
    t.grad_weight = Matrix(rows, cols);
    t.wd_applies = role != Role::Gamma;
    if (role == Role::Gamma) return t;  // gamma: no gate, no virtual copy

    t.vw = Matrix(rows, cols);
    t.vgrad = Matrix(rows, cols);
    switch (mode.kind) {
        case ReparamKind::WeSaR:
            t.gate.assign(1, 1.0);
            t.gate_trainable = !mode.fixed_alpha;
            break;
        case ReparamKind::WeightNorm:
            t.gate.assign(static_cast<std::size_t>(rows), 1.0);
            t.gate_trainable = true;
            break;
        case ReparamKind::SigmaReparam:
            t.gate.assign(1, 1.0);
            t.gate_trainable = true;
            t.power.u.assign(static_cast<std::size_t>(rows), 0.0);
            t.power.v.assign(static_cast<std::size_t>(cols), 0.0);
            break;
        case ReparamKind::None:
        case ReparamKind::ResidualScaling:
            break;  // no gates; residual scaling is a fixed forward multiplier
    }
    t.grad_gate.assign(t.gate.size(), 0.0);
    return t;
}

}  // namespace

const char* to_string(Role r) {
    switch (r) {
        case Role::Embed: return "W_e";
        case Role::Query: return "W_q";
        case Role::Key: return "W_k";
        case Role::Value: return "W_v";
        case Role::AttnOut: return "W_o";
        case Role::FfnUp: return "W_u";
        case Role::FfnDown: return "W_d";
        case Role::Unembed: return "W_p";
        case Role::Gamma: return "gamma";
    }
    return "?";
}

bool is_residual_out(Role r) { return r == Role::AttnOut || r == Role::FfnDown; }

ParamTensor& Params::find(const std::string& name) {
    for (auto& t : tensors)
        if (t.name == name) return t;
    throw std::invalid_argument("params: no tensor named '" + name + "'");
}

const ParamTensor& Params::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return t;
    throw std::invalid_argument("params: no tensor named '" + name + "'");
}

std::int64_t Params::total_weight_count() const {
    std::int64_t n = 0;
    for (const auto& t : tensors) n += t.weight.size();
    return n;
}

Params make_params(const ModelConfig& cfg, const ReparamMode& mode) {
    cfg.validate();
    Params p;
    p.cfg = cfg;
    p.mode = mode;
    const int d = cfg.d;
    const int f = cfg.ffn_dim();

    p.tensors.push_back(make_tensor("W_e", Role::Embed, cfg.vocab, d, mode));
    for (int i = 0; i < cfg.n_layers; ++i) {
        const std::string pre = "layer" + std::to_string(i) + ".";
        p.tensors.push_back(make_tensor(pre + "ln1.gamma", Role::Gamma, 1, d, mode));
        p.tensors.push_back(make_tensor(pre + "W_q", Role::Query, d, d, mode));
        p.tensors.push_back(make_tensor(pre + "W_k", Role::Key, d, d, mode));
        p.tensors.push_back(make_tensor(pre + "W_v", Role::Value, d, d, mode));
        p.tensors.push_back(make_tensor(pre + "W_o", Role::AttnOut, d, d, mode));
        p.tensors.push_back(make_tensor(pre + "ln2.gamma", Role::Gamma, 1, d, mode));
        p.tensors.push_back(make_tensor(pre + "W_u", Role::FfnUp, d, f, mode));
        p.tensors.push_back(make_tensor(pre + "W_d", Role::FfnDown, f, d, mode));
    }
    p.tensors.push_back(make_tensor("final.gamma", Role::Gamma, 1, d, mode));
    p.tensors.push_back(make_tensor("W_p", Role::Unembed, d, cfg.vocab, mode));
    return p;
}

}  // namespace wesar
