#include "wesar/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wesar {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

namespace {

constexpr const char* kMagic = "wesar-ckpt-v1";

void write_doubles(std::ofstream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* p, std::size_t n, const std::string& what) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) {
        throw std::runtime_error("checkpoint: truncated payload while reading " + what);
    }
}

bool has_power_state(const ParamTensor& t) {
    return !t.power.u.empty() || !t.power.v.empty();
}

// One descriptor line per stored block, in exact payload order.
std::string descriptor_lines(const Params& p) {
    std::ostringstream os;
    for (const ParamTensor& t : p.tensors) {
        os << "tensor " << t.name << ' ' << t.weight.rows << ' ' << t.weight.cols << '\n';
        if (t.has_gate()) {
            os << "gate " << t.name << ' ' << t.gate.size() << '\n';
        }
        if (has_power_state(t)) {
            os << "power " << t.name << ' ' << t.power.u.size() << ' ' << t.power.v.size() << '\n';
        }
    }
    return os.str();
}

}  // namespace

void save_checkpoint(const Params& p, const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    }
    out << kMagic << '\n';
    out << serialize_model_config(cfg);
    out << "header\n" << descriptor_lines(p) << "end\n";
    for (const ParamTensor& t : p.tensors) {
        write_doubles(out, t.weight.data.data(), t.weight.size());
        if (t.has_gate()) {
            write_doubles(out, t.gate.data(), t.gate.size());
        }
        if (has_power_state(t)) {
            write_doubles(out, t.power.u.data(), t.power.u.size());
            write_doubles(out, t.power.v.data(), t.power.v.size());
            write_doubles(out, &t.power.est, 1);
        }
    }
    if (!out) {
        throw std::runtime_error("checkpoint: write failed: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("checkpoint: cannot open: " + path);
    }
    std::string line;
    if (!std::getline(in, line) || line != kMagic) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    std::string config_text;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line == "header") {
            saw_header = true;
            break;
        }
        config_text += line;
        config_text += '\n';
    }
    if (!saw_header) {
        throw std::runtime_error("checkpoint: missing header section in " + path);
    }

    Checkpoint ck;
    ck.cfg = parse_config_text(config_text);
    ck.params = make_params(ck.cfg.model, ck.cfg.reparam);

    // The descriptor list is fully determined by the config; require an
    // exact match so a payload can never be poured into the wrong shapes.
    std::string expected = descriptor_lines(ck.params);
    std::string got;
    bool saw_end = false;
    while (std::getline(in, line)) {
        if (line == "end") {
            saw_end = true;
            break;
        }
        got += line;
        got += '\n';
    }
    if (!saw_end) {
        throw std::runtime_error("checkpoint: missing end-of-header in " + path);
    }
    if (got != expected) {
        throw std::runtime_error("checkpoint: tensor layout does not match its config in " + path);
    }

    for (ParamTensor& t : ck.params.tensors) {
        read_doubles(in, t.weight.data.data(), t.weight.size(), t.name);
        if (t.has_gate()) {
            read_doubles(in, t.gate.data(), t.gate.size(), t.name + " gate");
        }
        if (has_power_state(t)) {
            read_doubles(in, t.power.u.data(), t.power.u.size(), t.name + " power.u");
            read_doubles(in, t.power.v.data(), t.power.v.size(), t.name + " power.v");
            read_doubles(in, &t.power.est, 1, t.name + " power.est");
        }
    }
    char extra = 0;
    if (in.read(&extra, 1); in.gcount() != 0) {
        throw std::runtime_error("checkpoint: trailing bytes after payload in " + path);
    }
    return ck;
}

}  // namespace wesar
