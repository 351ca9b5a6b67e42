#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace predose {

// Joint posterior (or pseudo-posterior) draws of the population parameters
// of one fitted study. Values are stored on the natural scale; pinned
// parameters appear as constant columns so downstream steps can consume
// one uniform table.
struct PosteriorDraws {
    std::vector<std::string> names;
    int n_chains = 0;
    int n_iter = 0; // kept iterations per chain
    std::vector<double> values; // [chain][iter][param]
    std::vector<double> rhat;   // per parameter; NaN where undefined (constants)
    std::vector<double> accept; // per sampled coordinate (diagnostics)
    std::vector<std::string> warnings;

    [[nodiscard]] int n_params() const { return static_cast<int>(names.size()); }
    [[nodiscard]] int n_draws() const { return n_chains * n_iter; }

    [[nodiscard]] double at(int chain, int iter, int param) const {
        return values[static_cast<std::size_t>((chain * n_iter + iter) * n_params() + param)];
    }
    // Index of a named parameter, -1 when absent.
    [[nodiscard]] int index_of(const std::string& name) const;
    [[nodiscard]] bool has(const std::string& name) const { return index_of(name) >= 0; }

    // Mean / SD over all chains; throws MappingError for unknown names.
    [[nodiscard]] double posterior_mean(const std::string& name) const;
    [[nodiscard]] double posterior_sd(const std::string& name) const;
    // All draws of one parameter, chain-major.
    [[nodiscard]] std::vector<double> column(const std::string& name) const;

    void write_csv(std::ostream& os) const; // chain,iteration,<one column per parameter>
};

// L joint samples of one human dose of interest derived from one study.
struct DoseDraws {
    std::string study;
    std::string target; // "mtd" or "med"
    std::vector<double> samples;
    std::uint64_t seed = 0;

    void write_csv(std::ostream& os) const;
};

} // namespace predose
