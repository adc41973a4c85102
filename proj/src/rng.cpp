#include "wesar/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "wesar/fastmath.hpp"

namespace wesar {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

std::uint64_t Rng::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Marsaglia polar method: only sqrt and log touch the samples, and both
    // are platform-independent (sqrt is IEEE-exact, log is ours).
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * portable_log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

Rng Rng::split(std::string_view label) const {
    return Rng(mix64(seed_ ^ (fnv1a(label) + kGolden)));
}

Matrix gaussian_fill(Rng& rng, int rows, int cols, double std) {
    if (std < 0.0) throw std::invalid_argument("gaussian_fill: negative std");
    Matrix m(rows, cols);
    if (std == 0.0) return m;
    for (auto& v : m.data) v = std * rng.gaussian();
    return m;
}

std::uint64_t bounded_u64(Rng& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("bounded_u64: empty range");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(rng.next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
}

}  // namespace wesar
