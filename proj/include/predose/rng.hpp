#pragma once

#include <array>
#include <cstdint>

namespace predose {

// Counter-based random generator (Philox4x32-10).
//
// The generator is a pure function of (seed, stream, counter), so any draw
// can be reproduced from its coordinates alone. Substreams derived with
// `substream(i)` are statistically independent, which is what the simulation
// code relies on to keep results identical whatever the thread count:
// every replication / chain / subject owns a substream indexed by its
// structural position, never by execution order.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    // Independent generator for child unit `idx` (replication, chain,
    // subject...). Derivation is deterministic and collision-resistant.
    [[nodiscard]] Rng substream(std::uint64_t idx) const;

    std::uint64_t next_u64();

    // Uniform on [0,1) with 53 random bits.
    double uniform();
    // Uniform on (0,1); safe to feed into log() or a quantile function.
    double uniform_pos();
    // Standard normal via the inverse-CDF map (no rejection, fully
    // reproducible draw-for-draw).
    double normal();

    double lognormal(double meanlog, double sdlog);
    // |scale * T| with T Student-t with `df` degrees of freedom.
    double half_student_t(double df, double scale);
    // Marsaglia-Tsang; `scale` is the usual scale parameter.
    double gamma(double shape, double scale);

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t stream() const { return stream_; }

private:
    void refill();

    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int pos_ = 4; // exhausted; refill on first use
};

// 64-bit finalizer used for seed/stream derivation (splitmix64 step).
std::uint64_t mix64(std::uint64_t x);

} // namespace predose
