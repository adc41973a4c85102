#include "wesar/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace wesar {
namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    errno = 0;
    long long out = std::strtoll(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

double parse_float(const std::string& key, const std::string& v) {
    char* end = nullptr;
    errno = 0;
    double out = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0' || !std::isfinite(out))
        throw ConfigError("config: key '" + key + "' expects a finite number, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config: key '" + key + "' expects true or false, got '" + v + "'");
}

InitScheme parse_scheme(const std::string& v) {
    if (v == "he") return InitScheme::He;
    if (v == "small") return InitScheme::Small;
    if (v == "wesar") return InitScheme::WeSaR;
    throw ConfigError("config: init.scheme must be he, small, or wesar, got '" + v + "'");
}

EmbedScaling parse_embed(const std::string& v) {
    if (v == "const_multiplier") return EmbedScaling::ConstMultiplier;
    if (v == "none") return EmbedScaling::None;
    throw ConfigError("config: init.embed_scaling must be const_multiplier or none, got '" + v + "'");
}

ReparamKind parse_kind(const std::string& v) {
    if (v == "none") return ReparamKind::None;
    if (v == "wesar") return ReparamKind::WeSaR;
    if (v == "weightnorm") return ReparamKind::WeightNorm;
    if (v == "sigmareparam") return ReparamKind::SigmaReparam;
    if (v == "residualscaling") return ReparamKind::ResidualScaling;
    throw ConfigError(
        "config: reparam.kind must be none, wesar, weightnorm, sigmareparam, or residualscaling, got '" +
        v + "'");
}

struct KeyInfo {
    const char* key;
    const char* desc;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyInfo>& key_table() {
    static const std::vector<KeyInfo> table = {
        {"model.d", "hidden size",
         [](RunConfig& c, const std::string& v) { c.model.d = static_cast<int>(parse_int("model.d", v)); },
         [](const RunConfig& c) { return std::to_string(c.model.d); }},
        {"model.n_layers", "number of transformer blocks",
         [](RunConfig& c, const std::string& v) { c.model.n_layers = static_cast<int>(parse_int("model.n_layers", v)); },
         [](const RunConfig& c) { return std::to_string(c.model.n_layers); }},
        {"model.n_heads", "attention heads (must divide model.d)",
         [](RunConfig& c, const std::string& v) { c.model.n_heads = static_cast<int>(parse_int("model.n_heads", v)); },
         [](const RunConfig& c) { return std::to_string(c.model.n_heads); }},
        {"model.vocab", "vocabulary size (byte-level corpus uses 256)",
         [](RunConfig& c, const std::string& v) { c.model.vocab = static_cast<int>(parse_int("model.vocab", v)); },
         [](const RunConfig& c) { return std::to_string(c.model.vocab); }},
        {"model.ctx", "context length in tokens",
         [](RunConfig& c, const std::string& v) { c.model.ctx = static_cast<int>(parse_int("model.ctx", v)); },
         [](const RunConfig& c) { return std::to_string(c.model.ctx); }},
        {"model.ffn_mult", "feed-forward hidden size multiplier",
         [](RunConfig& c, const std::string& v) { c.model.ffn_mult = static_cast<int>(parse_int("model.ffn_mult", v)); },
         [](const RunConfig& c) { return std::to_string(c.model.ffn_mult); }},
        {"model.rmsnorm_eps", "epsilon added to the mean square in RMSNorm",
         [](RunConfig& c, const std::string& v) { c.model.rmsnorm_eps = parse_float("model.rmsnorm_eps", v); },
         [](const RunConfig& c) { return fmt_double(c.model.rmsnorm_eps); }},
        {"init.scheme", "initialization scheme: he, small, or wesar",
         [](RunConfig& c, const std::string& v) { c.init_scheme = parse_scheme(v); },
         [](const RunConfig& c) { return std::string(to_string(c.init_scheme)); }},
        {"init.embed_scaling", "embedding output scaling for he/small: const_multiplier or none",
         [](RunConfig& c, const std::string& v) { c.embed_scaling = parse_embed(v); },
         [](const RunConfig& c) { return std::string(to_string(c.embed_scaling)); }},
        {"reparam.kind", "none, wesar, weightnorm, sigmareparam, or residualscaling",
         [](RunConfig& c, const std::string& v) { c.reparam.kind = parse_kind(v); },
         [](const RunConfig& c) { return std::string(to_string(c.reparam.kind)); }},
        {"reparam.sigma_sq", "WeSaR common init variance sigma^2",
         [](RunConfig& c, const std::string& v) { c.reparam.sigma_sq = parse_float("reparam.sigma_sq", v); },
         [](const RunConfig& c) { return fmt_double(c.reparam.sigma_sq); }},
        {"reparam.fixed_alpha", "freeze WeSaR gates at their initial values",
         [](RunConfig& c, const std::string& v) { c.reparam.fixed_alpha = parse_bool("reparam.fixed_alpha", v); },
         [](const RunConfig& c) { return std::string(c.reparam.fixed_alpha ? "true" : "false"); }},
        {"optim.lr", "peak learning rate",
         [](RunConfig& c, const std::string& v) { c.optim.lr = parse_float("optim.lr", v); },
         [](const RunConfig& c) { return fmt_double(c.optim.lr); }},
        {"optim.warmup_steps", "linear warmup length in steps",
         [](RunConfig& c, const std::string& v) { c.optim.warmup_steps = static_cast<int>(parse_int("optim.warmup_steps", v)); },
         [](const RunConfig& c) { return std::to_string(c.optim.warmup_steps); }},
        {"optim.total_steps", "total training steps",
         [](RunConfig& c, const std::string& v) { c.optim.total_steps = static_cast<int>(parse_int("optim.total_steps", v)); },
         [](const RunConfig& c) { return std::to_string(c.optim.total_steps); }},
        {"optim.batch_tokens", "tokens per step; must be a multiple of model.ctx",
         [](RunConfig& c, const std::string& v) { c.optim.batch_tokens = static_cast<int>(parse_int("optim.batch_tokens", v)); },
         [](const RunConfig& c) { return std::to_string(c.optim.batch_tokens); }},
        {"optim.clip_threshold", "global gradient-norm clipping threshold",
         [](RunConfig& c, const std::string& v) { c.optim.clip_threshold = parse_float("optim.clip_threshold", v); },
         [](const RunConfig& c) { return fmt_double(c.optim.clip_threshold); }},
        {"optim.weight_decay", "decoupled weight decay on weight matrices",
         [](RunConfig& c, const std::string& v) { c.optim.weight_decay = parse_float("optim.weight_decay", v); },
         [](const RunConfig& c) { return fmt_double(c.optim.weight_decay); }},
        {"optim.z_coeff", "Z-loss coefficient on squared log-sum-exp",
         [](RunConfig& c, const std::string& v) { c.optim.z_coeff = parse_float("optim.z_coeff", v); },
         [](const RunConfig& c) { return fmt_double(c.optim.z_coeff); }},
        {"optim.beta1", "Adam first-moment decay",
         [](RunConfig& c, const std::string& v) { c.optim.beta1 = parse_float("optim.beta1", v); },
         [](const RunConfig& c) { return fmt_double(c.optim.beta1); }},
        {"optim.beta2", "Adam second-moment decay",
         [](RunConfig& c, const std::string& v) { c.optim.beta2 = parse_float("optim.beta2", v); },
         [](const RunConfig& c) { return fmt_double(c.optim.beta2); }},
        {"optim.eps", "Adam denominator epsilon",
         [](RunConfig& c, const std::string& v) { c.optim.eps = parse_float("optim.eps", v); },
         [](const RunConfig& c) { return fmt_double(c.optim.eps); }},
        {"telemetry.window", "spike detector trailing-min window (steps)",
         [](RunConfig& c, const std::string& v) { c.telemetry.window = static_cast<int>(parse_int("telemetry.window", v)); },
         [](const RunConfig& c) { return std::to_string(c.telemetry.window); }},
        {"telemetry.delta", "spike threshold above trailing min (nats)",
         [](RunConfig& c, const std::string& v) { c.telemetry.delta = parse_float("telemetry.delta", v); },
         [](const RunConfig& c) { return fmt_double(c.telemetry.delta); }},
        {"telemetry.armed_after", "suppress spike events before this step; -1 = warmup_steps",
         [](RunConfig& c, const std::string& v) { c.telemetry.armed_after = static_cast<int>(parse_int("telemetry.armed_after", v)); },
         [](const RunConfig& c) { return std::to_string(c.telemetry.armed_after); }},
        {"data.path", "training corpus file (raw bytes)",
         [](RunConfig& c, const std::string& v) { c.data_path = v; },
         [](const RunConfig& c) { return c.data_path; }},
        {"data.heldout_fraction", "final fraction of the corpus held out for evaluation",
         [](RunConfig& c, const std::string& v) { c.heldout_fraction = parse_float("data.heldout_fraction", v); },
         [](const RunConfig& c) { return fmt_double(c.heldout_fraction); }},
        {"run.seed", "root seed for init and batch sampling",
         [](RunConfig& c, const std::string& v) {
             long long s = parse_int("run.seed", v);
             c.seed = static_cast<std::uint64_t>(s);
         },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {"run.telemetry_stride", "record every k-th step in the CSV",
         [](RunConfig& c, const std::string& v) { c.telemetry_stride = static_cast<int>(parse_int("run.telemetry_stride", v)); },
         [](const RunConfig& c) { return std::to_string(c.telemetry_stride); }},
        {"run.telemetry_enabled", "write telemetry CSV and spike sidecar",
         [](RunConfig& c, const std::string& v) { c.telemetry_enabled = parse_bool("run.telemetry_enabled", v); },
         [](const RunConfig& c) { return std::string(c.telemetry_enabled ? "true" : "false"); }},
        {"run.checkpoint_path", "output checkpoint file",
         [](RunConfig& c, const std::string& v) { c.checkpoint_path = v; },
         [](const RunConfig& c) { return c.checkpoint_path; }},
        {"run.csv_path", "output telemetry CSV file",
         [](RunConfig& c, const std::string& v) { c.csv_path = v; },
         [](const RunConfig& c) { return c.csv_path; }},
        {"run.spikes_path", "output spike-event sidecar file",
         [](RunConfig& c, const std::string& v) { c.spikes_path = v; },
         [](const RunConfig& c) { return c.spikes_path; }},
    };
    return table;
}

const KeyInfo* find_key(const std::string& key) {
    for (const auto& k : key_table()) {
        if (key == k.key) return &k;
    }
    return nullptr;
}

}  // namespace

const char* to_string(InitScheme s) {
    switch (s) {
        case InitScheme::He: return "he";
        case InitScheme::Small: return "small";
        case InitScheme::WeSaR: return "wesar";
    }
    return "?";
}

const char* to_string(EmbedScaling s) {
    return s == EmbedScaling::ConstMultiplier ? "const_multiplier" : "none";
}

const char* to_string(ReparamKind k) {
    switch (k) {
        case ReparamKind::None: return "none";
        case ReparamKind::WeSaR: return "wesar";
        case ReparamKind::WeightNorm: return "weightnorm";
        case ReparamKind::SigmaReparam: return "sigmareparam";
        case ReparamKind::ResidualScaling: return "residualscaling";
    }
    return "?";
}

double ReparamMode::sigma() const { return std::sqrt(sigma_sq); }

void ModelConfig::validate() const {
    if (d <= 0 || n_layers <= 0 || n_heads <= 0 || vocab <= 1 || ctx <= 0 || ffn_mult <= 0)
        throw ConfigError("config: model dimensions must be positive (vocab > 1)");
    if (d % n_heads != 0) throw ConfigError("config: model.d must be divisible by model.n_heads");
    if ((d / n_heads) % 2 != 0)
        throw ConfigError("config: head dimension (model.d / model.n_heads) must be even for rotary pairs");
    if (rmsnorm_eps < 0.0) throw ConfigError("config: model.rmsnorm_eps must be >= 0");
}

InitSpec RunConfig::init_spec() const {
    InitSpec spec;
    spec.scheme = init_scheme;
    spec.sigma = reparam.sigma();
    spec.embed_scaling = embed_scaling;
    return spec;
}

int RunConfig::armed_after_steps() const {
    return telemetry.armed_after >= 0 ? telemetry.armed_after : optim.warmup_steps;
}

void RunConfig::validate() const {
    model.validate();
    if ((init_scheme == InitScheme::WeSaR) != (reparam.kind == ReparamKind::WeSaR))
        throw ConfigError(
            "config: init.scheme=wesar and reparam.kind=wesar must be used together "
            "(the common-sigma init is meaningful only under gating, and vice versa)");
    if (init_scheme == InitScheme::WeSaR && embed_scaling == EmbedScaling::ConstMultiplier)
        throw ConfigError(
            "config: init.embed_scaling applies to the he/small baselines; "
            "wesar reaches unit embedding scale through its gate");
    if (reparam.sigma_sq <= 0.0) throw ConfigError("config: reparam.sigma_sq must be > 0");
    if (optim.lr <= 0.0) throw ConfigError("config: optim.lr must be > 0");
    if (optim.warmup_steps < 0) throw ConfigError("config: optim.warmup_steps must be >= 0");
    if (optim.total_steps < 1) throw ConfigError("config: optim.total_steps must be >= 1");
    if (optim.batch_tokens < model.ctx || optim.batch_tokens % model.ctx != 0)
        throw ConfigError("config: optim.batch_tokens must be a positive multiple of model.ctx");
    if (optim.clip_threshold <= 0.0) throw ConfigError("config: optim.clip_threshold must be > 0");
    if (optim.weight_decay < 0.0 || optim.z_coeff < 0.0 || optim.eps < 0.0)
        throw ConfigError("config: optim.weight_decay, optim.z_coeff, optim.eps must be >= 0");
    if (optim.beta1 < 0.0 || optim.beta1 >= 1.0 || optim.beta2 < 0.0 || optim.beta2 >= 1.0)
        throw ConfigError("config: optim.beta1/beta2 must lie in [0, 1)");
    if (heldout_fraction < 0.0 || heldout_fraction >= 1.0)
        throw ConfigError("config: data.heldout_fraction must lie in [0, 1)");
    if (telemetry_stride < 1) throw ConfigError("config: run.telemetry_stride must be >= 1");
    if (telemetry.window < 1) throw ConfigError("config: telemetry.window must be >= 1");
    if (telemetry.delta <= 0.0) throw ConfigError("config: telemetry.delta must be > 0");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        const KeyInfo* info = find_key(key);
        if (info == nullptr)
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        info->set(cfg, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_model_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& k : key_table()) {
        std::string key(k.key);
        bool keep = key.rfind("model.", 0) == 0 || key.rfind("init.", 0) == 0 ||
                    key.rfind("reparam.", 0) == 0 || key.rfind("optim.", 0) == 0 ||
                    key == "data.heldout_fraction";
        if (!keep) continue;
        out += key;
        out += " = ";
        out += k.get(cfg);
        out += "\n";
    }
    return out;
}

std::string config_key_reference() {
    RunConfig defaults;
    std::string out;
    for (const auto& k : key_table()) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "  %-24s %-22s %s\n", k.key, k.get(defaults).c_str(), k.desc);
        out += buf;
    }
    return out;
}

}  // namespace wesar
