#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wesar {

// Raised for malformed config files, unknown keys, and CLI misuse; the CLI
// maps it to exit code 2 (usage error) as opposed to 1 (runtime failure).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class InitScheme { He, Small, WeSaR };
enum class EmbedScaling { ConstMultiplier, None };
enum class ReparamKind { None, WeSaR, WeightNorm, SigmaReparam, ResidualScaling };

const char* to_string(InitScheme s);
const char* to_string(EmbedScaling s);
const char* to_string(ReparamKind k);

// Architecture settings.
struct ModelConfig {
    int d = 64;
    int n_layers = 4;
    int n_heads = 4;
    int vocab = 256;
    int ctx = 256;
    int ffn_mult = 4;
    double rmsnorm_eps = 1e-5;

    int head_dim() const { return d / n_heads; }
    int ffn_dim() const { return ffn_mult * d; }
    void validate() const;
};

// Which column of the init table applies, plus the common sigma shared with
// WeSaR gating.  sigma is meaningful only when scheme == WeSaR.
struct InitSpec {
    InitScheme scheme = InitScheme::WeSaR;
    double sigma = 0.0063245553203367599;  // sqrt(4e-5)
    EmbedScaling embed_scaling = EmbedScaling::None;
};

// Reparameterization selection.  sigma_sq is WeSaR's common variance;
// fixed_alpha freezes WeSaR gates at their initial values (ablation).
struct ReparamMode {
    ReparamKind kind = ReparamKind::WeSaR;
    double sigma_sq = 4e-5;
    bool fixed_alpha = false;

    double sigma() const;
};

// Optimization settings (Adam + schedule + regularization).
struct TrainConfig {
    double lr = 1e-3;
    int warmup_steps = 100;
    int total_steps = 2000;
    int batch_tokens = 8192;
    double clip_threshold = 1.0;
    double weight_decay = 0.01;
    double z_coeff = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
};

// Loss-spike detector settings; armed_after < 0 means "use warmup_steps".
struct TelemetryConfig {
    int window = 100;
    double delta = 0.5;
    int armed_after = -1;
};

// Everything that determines a run: (RunConfig, corpus bytes) fixes the
// final checkpoint and telemetry bit-for-bit.
struct RunConfig {
    ModelConfig model;
    TrainConfig optim;
    InitScheme init_scheme = InitScheme::WeSaR;
    EmbedScaling embed_scaling = EmbedScaling::None;
    ReparamMode reparam;
    TelemetryConfig telemetry;
    std::string data_path;
    double heldout_fraction = 0.1;
    std::uint64_t seed = 42;
    int telemetry_stride = 1;
    bool telemetry_enabled = true;
    std::string checkpoint_path = "checkpoint.bin";
    std::string csv_path = "telemetry.csv";
    std::string spikes_path = "spikes.txt";

    InitSpec init_spec() const;
    int armed_after_steps() const;
    void validate() const;
};

// Parse `key = value` text: full-line # comments, blank lines, dotted keys.
// Unknown or duplicate keys and malformed values throw ConfigError.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Deterministic serialization of the reconstruction-relevant subset
// (model/init/reparam/optim/data keys; run.* paths and telemetry settings are
// deliberately excluded so observability options never change artifacts).
std::string serialize_model_config(const RunConfig& cfg);

// One line per config key: "key  default  description"; --help material.
std::string config_key_reference();

}  // namespace wesar
