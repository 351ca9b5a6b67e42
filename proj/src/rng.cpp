#include "predose/rng.hpp"

#include "predose/errors.hpp"
#include "predose/stats.hpp"

#include <cmath>

namespace predose {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::uint32_t mulhi(std::uint32_t a, std::uint32_t b, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    return static_cast<std::uint32_t>(p >> 32);
}

inline void philox_round(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
    std::uint32_t lo0, lo1;
    const std::uint32_t hi0 = mulhi(kPhiloxM0, c[0], lo0);
    const std::uint32_t hi1 = mulhi(kPhiloxM1, c[2], lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

} // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

Rng Rng::substream(std::uint64_t idx) const {
    return Rng(seed_, mix64(stream_ + 0x9E3779B97F4A7C15ull * (idx + 1)));
}

void Rng::refill() {
    std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(counter_),
        static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_),
        static_cast<std::uint32_t>(stream_ >> 32),
    };
    std::array<std::uint32_t, 2> key = {
        static_cast<std::uint32_t>(seed_),
        static_cast<std::uint32_t>(seed_ >> 32),
    };
    for (int r = 0; r < 10; ++r) {
        philox_round(ctr, key);
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    block_ = ctr;
    ++counter_;
    pos_ = 0;
}

std::uint64_t Rng::next_u64() {
    if (pos_ > 2) refill();
    const std::uint64_t lo = block_[pos_];
    const std::uint64_t hi = block_[pos_ + 1];
    pos_ += 2;
    return (hi << 32) | lo;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() {
    // (2u+1) / 2^54 lies strictly inside (0,1)
    return (static_cast<double>(next_u64() >> 11) * 2.0 + 1.0) * 0x1.0p-54;
}

double Rng::normal() {
    return std_normal_quantile(uniform_pos());
}

double Rng::lognormal(double meanlog, double sdlog) {
    if (sdlog < 0.0) throw DomainError("lognormal: sdlog must be >= 0");
    if (sdlog == 0.0) return std::exp(meanlog);
    return std::exp(meanlog + sdlog * normal());
}

double Rng::gamma(double shape, double scale) {
    if (shape <= 0.0 || scale <= 0.0) throw DomainError("gamma: shape and scale must be > 0");
    if (shape < 1.0) {
        const double u = uniform_pos();
        return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_pos();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
            return d * v * scale;
        }
    }
}

double Rng::half_student_t(double df, double scale) {
    if (df <= 0.0) throw DomainError("half_student_t: df must be > 0");
    if (scale <= 0.0) throw DomainError("half_student_t: scale must be > 0");
    const double z = normal();
    const double chi2 = gamma(0.5 * df, 2.0);
    return std::abs(scale * z / std::sqrt(chi2 / df));
}

} // namespace predose
