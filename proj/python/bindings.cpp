// Python bindings for the training laboratory.  The module exposes the
// operations the command-line tool is built from: deterministic corpus
// generation, config-driven training with full telemetry, the verification
// probe suites, initialization-table lookups, gate merging, and held-out
// evaluation.  Data crosses the boundary as plain Python types (lists,
// dicts, bytes) so the module has no third-party runtime dependencies.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "wesar/checkpoint.hpp"
#include "wesar/config.hpp"
#include "wesar/init.hpp"
#include "wesar/matrix.hpp"
#include "wesar/model.hpp"
#include "wesar/params.hpp"
#include "wesar/reparam.hpp"
#include "wesar/rng.hpp"
#include "wesar/telemetry.hpp"
#include "wesar/textgen.hpp"
#include "wesar/trainer.hpp"
#include "wesar/verify.hpp"

namespace py = pybind11;

namespace {

wesar::Role parse_role(const std::string& name) {
    for (wesar::Role r : wesar::kWeightRoles) {
        if (name == wesar::to_string(r)) return r;
    }
    throw std::invalid_argument("unknown role '" + name +
                                "' (expected W_e, W_q, W_k, W_v, W_o, W_u, W_d, or W_p)");
}

wesar::InitScheme parse_scheme(const std::string& name) {
    if (name == "he") return wesar::InitScheme::He;
    if (name == "small") return wesar::InitScheme::Small;
    if (name == "wesar") return wesar::InitScheme::WeSaR;
    throw std::invalid_argument("unknown scheme '" + name + "' (expected he, small, or wesar)");
}

py::list probes_to_list(const std::vector<wesar::ProbeResult>& probes) {
    py::list out;
    for (const wesar::ProbeResult& r : probes) {
        py::dict d;
        d["name"] = r.name;
        d["measured"] = r.measured;
        d["expected"] = r.expected;
        d["tolerance"] = r.tolerance;
        d["relative"] = r.relative;
        d["pass"] = r.pass;
        d["samples"] = r.samples;
        d["note"] = r.note;
        out.append(d);
    }
    return out;
}

// Telemetry records flattened to column lists: scalars per step plus one
// dict per tensor holding its four per-step series.
py::dict records_to_dict(const std::vector<wesar::TelemetryRecord>& records) {
    py::dict out;
    std::vector<long> steps;
    std::vector<double> lr, loss;
    std::vector<long long> tokens;
    for (const wesar::TelemetryRecord& r : records) {
        steps.push_back(r.step);
        lr.push_back(r.lr);
        loss.push_back(r.loss);
        tokens.push_back(r.tokens_seen);
    }
    out["step"] = steps;
    out["lr"] = lr;
    out["loss"] = loss;
    out["tokens_seen"] = tokens;

    py::dict tensors;
    if (!records.empty()) {
        for (std::size_t i = 0; i < records.front().tensors.size(); ++i) {
            std::vector<double> pn, gn, ur, gv;
            for (const wesar::TelemetryRecord& r : records) {
                const wesar::TensorTelemetry& t = r.tensors.at(i);
                pn.push_back(t.param_norm);
                gn.push_back(t.grad_norm);
                ur.push_back(t.update_ratio);
                gv.push_back(t.gate_value);
            }
            py::dict series;
            series["param_norm"] = pn;
            series["grad_norm"] = gn;
            series["update_ratio"] = ur;
            series["gate_value"] = gv;
            tensors[py::str(records.front().tensors[i].name)] = series;
        }
    }
    out["tensors"] = tensors;
    return out;
}

py::dict train_from_text(const std::string& config_text) {
    wesar::RunConfig cfg = wesar::parse_config_text(config_text);
    wesar::TrainResult r;
    {
        py::gil_scoped_release release;
        r = wesar::train_run(cfg);
    }
    py::dict out;
    out["final_loss"] = r.final_loss;
    out["steps_run"] = r.steps_run;
    out["diverged"] = r.diverged;
    out["divergence_note"] = r.divergence_note;
    out["loss_history"] = r.loss_history;
    py::list spikes;
    for (const wesar::SpikeEvent& s : r.spikes) {
        py::dict d;
        d["step"] = s.step;
        d["loss"] = s.loss;
        d["trailing_min"] = s.trailing_min;
        spikes.append(d);
    }
    out["spikes"] = spikes;
    out["telemetry"] = records_to_dict(r.records);

    if (cfg.telemetry_enabled) {
        wesar::write_csv(r.records, cfg.csv_path);
        wesar::write_spikes(r.spikes, cfg.spikes_path);
    }
    if (!r.diverged) {
        wesar::save_checkpoint(r.params, cfg, cfg.checkpoint_path);
        out["checkpoint_path"] = cfg.checkpoint_path;
    }
    return out;
}

double eval_checkpoint(const std::string& ckpt_path, const std::string& data_path) {
    wesar::Checkpoint ck = wesar::load_checkpoint(ckpt_path);
    wesar::Corpus corpus =
        wesar::load_corpus(data_path, ck.cfg.heldout_fraction, ck.cfg.model.ctx);
    wesar::Model m(ck.params, ck.cfg.init_spec(), ck.cfg.optim.z_coeff);
    py::gil_scoped_release release;
    return wesar::eval_perplexity(m, corpus);
}

void merge_checkpoint(const std::string& in_path, const std::string& out_path) {
    wesar::Checkpoint ck = wesar::load_checkpoint(in_path);
    wesar::merge_gates(ck.params);
    wesar::save_checkpoint(ck.params, ck.cfg, out_path);
}

double spectral_norm(const std::vector<std::vector<double>>& rows, double tol,
                     std::uint64_t seed) {
    if (rows.empty() || rows.front().empty()) {
        throw std::invalid_argument("spectral_norm: matrix must be non-empty");
    }
    wesar::Matrix w(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) {
            throw std::invalid_argument("spectral_norm: ragged rows");
        }
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            w.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
        }
    }
    wesar::Rng rng(seed);
    wesar::SpectralResult r = wesar::spectral_norm_oracle(w, tol, rng);
    if (!r.converged) throw std::runtime_error("spectral_norm: power iteration did not converge");
    return r.value;
}

}  // namespace

PYBIND11_MODULE(_wesar, m) {
    m.doc() =
        "Transformer training laboratory: gated weight reparameterization, "
        "baseline initializations, update-ratio telemetry, and the probe "
        "suites that verify the underlying math.";

    m.def("generate_corpus",
          [](std::uint64_t seed, std::size_t min_bytes) {
              return py::bytes(wesar::generate_corpus(seed, min_bytes));
          },
          py::arg("seed"), py::arg("min_bytes"),
          "Deterministic pseudo-English text of at least min_bytes bytes.");

    m.def("train", &train_from_text, py::arg("config_text"),
          "Run a training schedule from config text (same key = value format "
          "as the CLI).  Writes the checkpoint/CSV/spike files named by the "
          "config and returns a dict with the loss history, spike events, "
          "and per-tensor telemetry series.");

    m.def("verify",
          [](const std::string& suite, std::uint64_t seed) {
              if (!wesar::known_suite(suite)) {
                  throw std::invalid_argument(
                      "unknown suite '" + suite +
                      "' (grad, adam, scale, residual, spectral, all)");
              }
              return probes_to_list(wesar::run_suite(suite, seed));
          },
          py::arg("suite") = "all", py::arg("seed") = 1,
          "Run a verification probe suite; returns one dict per probe.");

    m.def("virtual_std",
          [](const std::string& role, int d, int n_layers) {
              return wesar::virtual_std(parse_role(role), d, n_layers);
          },
          py::arg("role"), py::arg("d"), py::arg("n_layers"),
          "Post-gate (virtual) std for a weight role.");

    m.def("actual_std",
          [](const std::string& role, const std::string& scheme, int d, int n_layers,
             double sigma) {
              wesar::InitSpec spec;
              spec.scheme = parse_scheme(scheme);
              spec.sigma = sigma;
              return wesar::actual_std(parse_role(role), spec, d, n_layers);
          },
          py::arg("role"), py::arg("scheme"), py::arg("d"), py::arg("n_layers"),
          py::arg("sigma") = 0.0063245553203367599,
          "Stored-draw std for a role under a scheme (he, small, or wesar).");

    m.def("gate_init",
          [](const std::string& role, int d, int n_layers, double sigma) {
              return wesar::wesar_gate_init(parse_role(role), d, n_layers, sigma);
          },
          py::arg("role"), py::arg("d"), py::arg("n_layers"),
          py::arg("sigma") = 0.0063245553203367599,
          "Initial gate value alpha = virtual_std / sigma.");

    m.def("init_table",
          [](int d, int n_layers, double sigma) {
              return wesar::init_table_csv(d, n_layers, sigma);
          },
          py::arg("d"), py::arg("n_layers"), py::arg("sigma") = 0.0063245553203367599,
          "The role x scheme std table as CSV text.");

    m.def("eval_checkpoint", &eval_checkpoint, py::arg("checkpoint_path"), py::arg("data_path"),
          "Held-out perplexity of a saved checkpoint on a corpus file.");

    m.def("merge_checkpoint", &merge_checkpoint, py::arg("in_path"), py::arg("out_path"),
          "Fold trained gates into the stored weights of a checkpoint.");

    m.def("spectral_norm", &spectral_norm, py::arg("matrix"), py::arg("tol") = 1e-10,
          py::arg("seed") = 1,
          "Largest singular value via converged power iteration.");

    m.def("config_reference", &wesar::config_key_reference,
          "One line per config key: name, default, description.");
}
