#include "wesar/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include "wesar/checkpoint.hpp"
#include "wesar/config.hpp"
#include "wesar/init.hpp"
#include "wesar/reparam.hpp"
#include "wesar/telemetry.hpp"
#include "wesar/textgen.hpp"
#include "wesar/trainer.hpp"
#include "wesar/verify.hpp"

namespace wesar {

namespace {

const char* kUsage = R"(usage: wesar <command> [options]

commands:
  train --config FILE          run the configured training schedule; writes the
                               checkpoint, telemetry CSV, and spike sidecar
  eval --ckpt FILE --data FILE held-out perplexity of a checkpoint on a corpus
  inspect-init --config FILE   print the initialization table (closed forms),
                               gate values, and multipliers for the config
  merge --in FILE --out FILE   fold WeSaR gates into the weights of a checkpoint
  verify [--suite S] [--seed N]
                               run verification probes; suites: grad, adam,
                               scale, residual, spectral, all (default all)
  make-corpus --out FILE [--bytes N] [--seed N]
                               write a deterministic pseudo-English corpus
                               (default 2000000 bytes, seed 1)
  --help                       this text plus the config key reference

exit codes: 0 ok, 1 runtime failure, 2 usage or config error,
            3 verification failure
)";

// Strict flag parsing: every token must be a known --flag with a value.
std::map<std::string, std::string> parse_flags(const std::vector<std::string>& args,
                                               std::size_t start,
                                               const std::vector<std::string>& allowed) {
    std::map<std::string, std::string> out;
    for (std::size_t i = start; i < args.size(); i += 2) {
        const std::string& flag = args[i];
        bool known = false;
        for (const std::string& a : allowed) {
            if (flag == a) known = true;
        }
        if (!known) {
            throw ConfigError("unknown flag: " + flag);
        }
        if (i + 1 >= args.size()) {
            throw ConfigError("flag " + flag + " needs a value");
        }
        if (out.count(flag) != 0) {
            throw ConfigError("duplicate flag: " + flag);
        }
        out[flag] = args[i + 1];
    }
    return out;
}

std::string require_flag(const std::map<std::string, std::string>& flags, const std::string& name) {
    auto it = flags.find(name);
    if (it == flags.end()) {
        throw ConfigError("missing required flag: " + name);
    }
    return it->second;
}

std::uint64_t parse_u64_flag(const std::string& flag, const std::string& value) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0') {
        throw ConfigError("flag " + flag + " expects an unsigned integer, got '" + value + "'");
    }
    return static_cast<std::uint64_t>(v);
}

void dump_last_records(const TrainResult& r, std::ostream& out) {
    std::size_t n = r.records.size();
    std::size_t from = n > 5 ? n - 5 : 0;
    out << "last telemetry rows (step, loss, lr, worst update ratio):\n";
    for (std::size_t i = from; i < n; ++i) {
        const TelemetryRecord& rec = r.records[i];
        double worst = 0.0;
        std::string worst_name = "-";
        for (const TensorTelemetry& t : rec.tensors) {
            if (t.update_ratio > worst) {
                worst = t.update_ratio;
                worst_name = t.name;
            }
        }
        char line[160];
        std::snprintf(line, sizeof(line), "  step %-6ld loss %-12.6g lr %-10.4g %s %.6g\n",
                      rec.step, rec.loss, rec.lr, worst_name.c_str(), worst);
        out << line;
    }
    if (n == 0) out << "  (none recorded)\n";
}

int cmd_train(const std::map<std::string, std::string>& flags) {
    RunConfig cfg = load_config(require_flag(flags, "--config"));
    long total = cfg.optim.total_steps;
    auto progress = [total](long step, double loss) {
        if (step % 100 == 0 || step == total) {
            std::fprintf(stderr, "step %ld/%ld  loss %.6g\n", step, total, loss);
        }
    };
    TrainResult r = train_run(cfg, progress);

    if (cfg.telemetry_enabled) {
        write_csv(r.records, cfg.csv_path);
        write_spikes(r.spikes, cfg.spikes_path);
    }
    if (r.diverged) {
        std::cerr << "training diverged: " << r.divergence_note << "\n";
        dump_last_records(r, std::cerr);
        std::cerr << "no checkpoint written; telemetry kept for diagnosis\n";
        return 1;
    }
    save_checkpoint(r.params, cfg, cfg.checkpoint_path);
    std::cout << "steps run: " << r.steps_run << "\n";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "final train loss: %.9g\n", r.final_loss);
    std::cout << buf;
    std::cout << "spike events after arming: " << r.spikes.size() << "\n";
    std::cout << "checkpoint: " << cfg.checkpoint_path << "\n";
    if (cfg.telemetry_enabled) {
        std::cout << "telemetry: " << cfg.csv_path << "\nspikes: " << cfg.spikes_path << "\n";
    }
    // Report held-out quality when the split leaves room for a window.
    Corpus corpus = load_corpus(cfg.data_path, cfg.heldout_fraction, cfg.model.ctx);
    if (corpus.heldout_len() >= static_cast<std::size_t>(cfg.model.ctx) + 1) {
        Model m(r.params, cfg.init_spec(), cfg.optim.z_coeff);
        std::snprintf(buf, sizeof(buf), "heldout perplexity: %.9g\n", eval_perplexity(m, corpus));
        std::cout << buf;
    }
    return 0;
}

int cmd_eval(const std::map<std::string, std::string>& flags) {
    Checkpoint ck = load_checkpoint(require_flag(flags, "--ckpt"));
    Corpus corpus =
        load_corpus(require_flag(flags, "--data"), ck.cfg.heldout_fraction, ck.cfg.model.ctx);
    Model m(ck.params, ck.cfg.init_spec(), ck.cfg.optim.z_coeff);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "heldout perplexity: %.9g\n", eval_perplexity(m, corpus));
    std::cout << buf;
    return 0;
}

int cmd_inspect_init(const std::map<std::string, std::string>& flags) {
    RunConfig cfg = load_config(require_flag(flags, "--config"));
    const int d = cfg.model.d;
    const int N = cfg.model.n_layers;
    const double sigma = cfg.reparam.sigma();
    std::cout << init_table_text(d, N, sigma);
    char buf[160];
    InitSpec he{InitScheme::He, sigma, EmbedScaling::ConstMultiplier};
    std::snprintf(buf, sizeof(buf), "embed multiplier: he/small=%.17g wesar=1\n",
                  embed_multiplier(he, d));
    std::cout << buf;
    std::snprintf(buf, sizeof(buf), "residual multiplier (%s): %.17g\n",
                  to_string(cfg.reparam.kind), residual_multiplier(cfg.reparam.kind, N));
    std::cout << buf;
    if (cfg.reparam.kind == ReparamKind::WeSaR) {
        std::cout << "wesar gate init (alpha = virtual_std / sigma):\n";
        for (Role r : kWeightRoles) {
            std::snprintf(buf, sizeof(buf), "  %-4s %.17g\n", to_string(r),
                          wesar_gate_init(r, d, N, sigma));
            std::cout << buf;
        }
    }
    std::cout << "\n" << init_table_csv(d, N, sigma);
    return 0;
}

int cmd_merge(const std::map<std::string, std::string>& flags) {
    Checkpoint ck = load_checkpoint(require_flag(flags, "--in"));
    merge_gates(ck.params);
    save_checkpoint(ck.params, ck.cfg, require_flag(flags, "--out"));
    std::cout << "merged gates into weights: " << require_flag(flags, "--out") << "\n";
    return 0;
}

int cmd_verify(const std::map<std::string, std::string>& flags) {
    std::string suite = flags.count("--suite") ? flags.at("--suite") : "all";
    std::uint64_t seed = flags.count("--seed") ? parse_u64_flag("--seed", flags.at("--seed")) : 1;
    if (!known_suite(suite)) {
        throw ConfigError("verify: unknown suite '" + suite +
                          "' (grad, adam, scale, residual, spectral, all)");
    }
    std::vector<ProbeResult> results = run_suite(suite, seed);
    int failures = print_probes(results, std::cout);
    if (failures != 0) {
        std::cout << failures << " probe(s) FAILED\n";
        return 3;
    }
    std::cout << "all " << results.size() << " probes passed\n";
    return 0;
}

int cmd_make_corpus(const std::map<std::string, std::string>& flags) {
    std::string out_path = require_flag(flags, "--out");
    std::uint64_t bytes =
        flags.count("--bytes") ? parse_u64_flag("--bytes", flags.at("--bytes")) : 2000000;
    std::uint64_t seed = flags.count("--seed") ? parse_u64_flag("--seed", flags.at("--seed")) : 1;
    std::string text = generate_corpus(seed, static_cast<std::size_t>(bytes));
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("make-corpus: cannot open for writing: " + out_path);
    }
    out << text;
    if (!out) {
        throw std::runtime_error("make-corpus: write failed: " + out_path);
    }
    std::cout << "wrote " << text.size() << " bytes to " << out_path << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    try {
        if (args.empty()) {
            std::cerr << kUsage;
            return 2;
        }
        const std::string& cmd = args[0];
        if (cmd == "--help" || cmd == "help" || cmd == "-h") {
            std::cout << kUsage << "\nconfig keys (key  default  description):\n"
                      << config_key_reference();
            return 0;
        }
        if (cmd == "train") {
            return cmd_train(parse_flags(args, 1, {"--config"}));
        }
        if (cmd == "eval") {
            return cmd_eval(parse_flags(args, 1, {"--ckpt", "--data"}));
        }
        if (cmd == "inspect-init") {
            return cmd_inspect_init(parse_flags(args, 1, {"--config"}));
        }
        if (cmd == "merge") {
            return cmd_merge(parse_flags(args, 1, {"--in", "--out"}));
        }
        if (cmd == "verify") {
            return cmd_verify(parse_flags(args, 1, {"--suite", "--seed"}));
        }
        if (cmd == "make-corpus") {
            return cmd_make_corpus(parse_flags(args, 1, {"--out", "--bytes", "--seed"}));
        }
        std::cerr << "unknown command: " << cmd << "\n" << kUsage;
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace wesar
