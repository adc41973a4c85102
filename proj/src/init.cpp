#include "wesar/init.hpp"

#include <cmath>
#include <cstdio>

#include "wesar/reparam.hpp"

namespace wesar {

double virtual_std(Role role, int d, int N) {
    if (d < 1 || N < 1) throw ConfigError("init: d and N must be >= 1");
    switch (role) {
        case Role::Embed:
            return 1.0;
        case Role::Query:
        case Role::Key:
        case Role::Value:
        case Role::FfnUp:
        case Role::Unembed:
            return std::sqrt(1.0 / d);
        case Role::AttnOut:
            return std::sqrt(1.0 / (2.0 * N * d));
        case Role::FfnDown:
            return std::sqrt(2.0 / (8.0 * N * d));
        case Role::Gamma:
            break;
    }
    throw ConfigError("init: gamma has no initialization std");
}

double actual_std(Role role, const InitSpec& spec, int d, int N) {
    switch (spec.scheme) {
        case InitScheme::He:
            // Virtual scale straight into the weights; the embedding keeps
            // its fan-in draw and relies on the forward multiplier.
            if (role == Role::Embed) return std::sqrt(1.0 / d);
            return virtual_std(role, d, N);
        case InitScheme::Small:
            if (is_residual_out(role)) return std::sqrt(2.0 / (10.0 * N * d));
            if (role == Role::Gamma) throw ConfigError("init: gamma has no initialization std");
            return std::sqrt(2.0 / (5.0 * d));
        case InitScheme::WeSaR:
            if (spec.sigma <= 0.0) throw ConfigError("init: wesar sigma must be > 0");
            if (role == Role::Gamma) throw ConfigError("init: gamma has no initialization std");
            return spec.sigma;
    }
    throw ConfigError("init: unknown scheme");
}

double embed_multiplier(const InitSpec& spec, int d) {
    if (spec.scheme == InitScheme::WeSaR || spec.embed_scaling != EmbedScaling::ConstMultiplier)
        return 1.0;
    return 1.0 / actual_std(Role::Embed, spec, d, 1);
}

namespace {

void normalize_or_zero(std::vector<double>& v) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    double n = std::sqrt(ss);
    if (n < 1e-300) return;
    for (double& x : v) x /= n;
}

}  // namespace

void initialize_model(Params& p, const InitSpec& spec, Rng& rng) {
    if ((p.mode.kind == ReparamKind::WeSaR) != (spec.scheme == InitScheme::WeSaR))
        throw ConfigError("init: wesar scheme and wesar reparam mode must be paired");
    const int d = p.cfg.d;
    const int N = p.cfg.n_layers;

    for (auto& t : p.tensors) {
        if (t.is_gamma()) {
            std::fill(t.weight.data.begin(), t.weight.data.end(), 1.0);
            continue;
        }
        double sd = actual_std(t.role, spec, d, N);
        // Residual scaling moves the 1/sqrt(2N) factor out of the draw and
        // into the forward multiplier; undo it on the residual outputs.
        if (p.mode.kind == ReparamKind::ResidualScaling && is_residual_out(t.role))
            sd *= std::sqrt(2.0 * N);
        Rng child = rng.split(t.name);
        t.weight = gaussian_fill(child, t.weight.rows, t.weight.cols, sd);

        switch (p.mode.kind) {
            case ReparamKind::WeSaR:
                t.gate[0] = wesar_gate_init(t.role, d, N, spec.sigma);
                break;
            case ReparamKind::WeightNorm:
                // Step-0 virtual weight must equal the backbone draw, so the
                // gate absorbs each row's norm before normalization divides
                // it out.
                for (int r = 0; r < t.weight.rows; ++r) {
                    double ss = 0.0;
                    const double* row = t.weight.row(r);
                    for (int c = 0; c < t.weight.cols; ++c) ss += row[c] * row[c];
                    t.gate[static_cast<std::size_t>(r)] = std::max(std::sqrt(ss), 1e-12);
                }
                break;
            case ReparamKind::SigmaReparam: {
                t.gate[0] = 1.0;
                Rng prng = rng.split(t.name + ".power");
                for (double& x : t.power.u) x = prng.gaussian();
                for (double& x : t.power.v) x = prng.gaussian();
                normalize_or_zero(t.power.u);
                normalize_or_zero(t.power.v);
                power_iterate(t.weight, t.power);  // make the estimate live
                break;
            }
            case ReparamKind::None:
            case ReparamKind::ResidualScaling:
                break;
        }
    }
    refresh_virtual(p);
}

namespace {

const char* role_label(Role r) { return to_string(r); }

}  // namespace

std::string init_table_text(int d, int N, double sigma) {
    InitSpec he{InitScheme::He, sigma, EmbedScaling::ConstMultiplier};
    InitSpec sm{InitScheme::Small, sigma, EmbedScaling::ConstMultiplier};
    InitSpec ws{InitScheme::WeSaR, sigma, EmbedScaling::None};
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof(buf), "std table  d=%d  N=%d  sigma=%.6g\n", d, N, sigma);
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-6s %12s %12s %12s %12s\n", "role", "virtual", "he", "small",
                  "wesar");
    out += buf;
    for (Role r : kWeightRoles) {
        std::snprintf(buf, sizeof(buf), "%-6s %12.6g %12.6g %12.6g %12.6g\n", role_label(r),
                      virtual_std(r, d, N), actual_std(r, he, d, N), actual_std(r, sm, d, N),
                      actual_std(r, ws, d, N));
        out += buf;
    }
    return out;
}

std::string init_table_csv(int d, int N, double sigma) {
    InitSpec he{InitScheme::He, sigma, EmbedScaling::ConstMultiplier};
    InitSpec sm{InitScheme::Small, sigma, EmbedScaling::ConstMultiplier};
    InitSpec ws{InitScheme::WeSaR, sigma, EmbedScaling::None};
    std::string out = "role,virtual_std,he,small,wesar\n";
    char buf[256];
    // Full round-trip precision: this block is the machine-readable face of
    // the table and downstream checks compare it against closed forms.
    for (Role r : kWeightRoles) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g\n", role_label(r),
                      virtual_std(r, d, N), actual_std(r, he, d, N), actual_std(r, sm, d, N),
                      actual_std(r, ws, d, N));
        out += buf;
    }
    return out;
}

}  // namespace wesar
