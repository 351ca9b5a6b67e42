#pragma once

#include "predose/draws.hpp"
#include "predose/linalg.hpp"
#include "predose/model.hpp"

#include <cstdint>

namespace predose {

struct HybridConfig {
    int n_draws = 1000; // PSA sample count
    std::uint64_t seed = 0;
    int restarts = 3;
    int max_iterations = 600;
    double grad_tol = 1e-7;
};

// Mode + curvature + normal PSA samples: the fast substitute for a full
// posterior when MCMC is not warranted.
struct HybridFit {
    std::vector<std::string> pop_names; // sampled population parameters
    std::vector<double> mode;           // natural scale, pop_names order
    Matrix covariance;                  // unconstrained scale, population block
    PosteriorDraws draws;               // 1 chain x n_draws, natural scale
};

// Maximizes the regularized log joint over the unconstrained scale
// (L-BFGS with restarts), estimates the curvature by central finite
// differences of the gradient, and draws normal PSA samples of the
// reported parameters mapped back to the natural scale.
HybridFit hybrid_fit(const SamplerTarget& target, const HybridConfig& cfg);

// Hierarchical PK(/PD) model entry point; rejects empty datasets.
HybridFit hybrid_fit(const PkModel& model, const HybridConfig& cfg);

} // namespace predose
