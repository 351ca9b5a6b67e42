#pragma once

#include "predose/draws.hpp"
#include "predose/model.hpp"

#include <cstdint>
#include <vector>

namespace predose {

struct McmcConfig {
    enum class Sampler { metropolis_within_gibbs, hmc };

    int chains = 3;
    int burn_in = 1000;
    int iters = 2000;
    std::uint64_t seed = 0;
    Sampler sampler = Sampler::metropolis_within_gibbs;
    int leapfrog_steps = 32;
    double target_accept = 0.3;     // Robbins-Monro target for the Gibbs sweep
    double target_accept_hmc = 0.8; // dual-averaging target
    double rhat_warn = 1.01;
};

// Split-chain potential scale reduction factor for one parameter.
// `chains` holds one draw sequence per chain (>= 2 chains, >= 10 draws).
double gelman_rubin(const std::vector<std::vector<double>>& chains);

// Posterior sampling of any SamplerTarget. Chains use independent,
// chain-indexed random substreams and run sequentially, so results depend
// only on (target, config), never on scheduling.
PosteriorDraws run_mcmc(const SamplerTarget& target, const McmcConfig& cfg);

// Hierarchical PK(/PD) model entry point; rejects empty datasets.
PosteriorDraws run_mcmc(const PkModel& model, const McmcConfig& cfg);

} // namespace predose
