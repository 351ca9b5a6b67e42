#include "predose/extrapolate.hpp"

#include "predose/errors.hpp"

#include <cmath>

namespace predose {

namespace {

void check_weights(double w_from, double w_to) {
    if (!(w_from > 0.0 && w_to > 0.0)) {
        throw DomainError("allometric scaling: weights must be > 0");
    }
}

} // namespace

double allometric_cl(double cl, double w_from_kg, double w_to_kg) {
    check_weights(w_from_kg, w_to_kg);
    return cl * std::pow(w_to_kg / w_from_kg, 0.75);
}

double allometric_v(double v, double w_from_kg, double w_to_kg) {
    check_weights(w_from_kg, w_to_kg);
    return v * (w_to_kg / w_from_kg);
}

double allometric_dose_factor(double w_from_kg, double w_to_kg) {
    check_weights(w_from_kg, w_to_kg);
    return std::pow(w_to_kg / w_from_kg, 0.75);
}

PosteriorDraws extrapolate_draws(const PosteriorDraws& post, double w_from_kg, double w_to_kg,
                                 int n_draws) {
    check_weights(w_from_kg, w_to_kg);
    if (!post.has("mu_cl") || !post.has("mu_v")) {
        throw MappingError("extrapolate_draws: posterior must contain mu_cl and mu_v");
    }
    const int total = post.n_draws();
    if (total < n_draws) {
        throw SamplingError("extrapolate_draws: fewer draws available than requested");
    }
    const int p = post.n_params();
    const int i_cl = post.index_of("mu_cl");
    const int i_v = post.index_of("mu_v");

    PosteriorDraws out;
    out.names = post.names;
    out.n_chains = 1;
    out.n_iter = n_draws;
    out.values.resize(static_cast<std::size_t>(n_draws) * static_cast<std::size_t>(p));
    out.rhat.assign(static_cast<std::size_t>(p), std::nan(""));

    for (int j = 0; j < n_draws; ++j) {
        // deterministic uniform thinning over the flattened chain-major order
        const int src = static_cast<int>((static_cast<long long>(j) * total) / n_draws);
        const int chain = src / post.n_iter;
        const int iter = src % post.n_iter;
        for (int q = 0; q < p; ++q) {
            double val = post.at(chain, iter, q);
            if (q == i_cl) val = allometric_cl(val, w_from_kg, w_to_kg);
            if (q == i_v) val = allometric_v(val, w_from_kg, w_to_kg);
            out.values[static_cast<std::size_t>(j * p + q)] = val;
        }
    }
    return out;
}

DoseDraws mtd_draws(const PosteriorDraws& human_draws, const ToxicitySpec& spec,
                    const std::string& study_label) {
    if (!human_draws.has("mu_cl") || !human_draws.has("omega_cl")) {
        throw MappingError("mtd_draws: draws must contain mu_cl and omega_cl");
    }
    const auto mu = human_draws.column("mu_cl");
    const auto omega = human_draws.column("omega_cl");

    DoseDraws out;
    out.study = study_label;
    out.target = "mtd";
    out.samples.resize(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        out.samples[i] = mtd_analytic(mu[i], omega[i], spec);
    }
    return out;
}

DoseDraws med_draws(const PosteriorDraws& source_draws, double w_from_kg, double w_to_kg,
                    const EfficacySpec& spec, const MedDrawsConfig& cfg, const Rng& rng,
                    const std::string& study_label) {
    for (const char* name : {"ka", "mu_cl", "omega_cl", "mu_v", "omega_v", "mu_ic50",
                             "omega_ic50", "mu_ke", "omega_ke"}) {
        if (!source_draws.has(name)) {
            throw MappingError(std::string("med_draws: draws must contain ") + name);
        }
    }
    const double dose_factor = allometric_dose_factor(w_from_kg, w_to_kg);
    const auto ka = source_draws.column("ka");
    const auto mu_cl = source_draws.column("mu_cl");
    const auto omega_cl = source_draws.column("omega_cl");
    const auto mu_v = source_draws.column("mu_v");
    const auto omega_v = source_draws.column("omega_v");
    const auto mu_ic50 = source_draws.column("mu_ic50");
    const auto omega_ic50 = source_draws.column("omega_ic50");
    const auto mu_ke = source_draws.column("mu_ke");
    const auto omega_ke = source_draws.column("omega_ke");

    DoseDraws out;
    out.study = study_label;
    out.target = "med";
    out.seed = rng.seed();
    out.samples.resize(ka.size());
    for (std::size_t r = 0; r < ka.size(); ++r) {
        PopulationPkPd pop;
        pop.ka = ka[r];
        pop.mu_cl = mu_cl[r];
        pop.omega_cl = omega_cl[r];
        pop.mu_v = mu_v[r];
        pop.omega_v = omega_v[r];
        pop.i_max = cfg.i_max;
        pop.mu_ic50 = mu_ic50[r];
        pop.omega_ic50 = omega_ic50[r];
        pop.mu_ke = mu_ke[r];
        pop.omega_ke = omega_ke[r];
        // same subject substreams for every draw
        Rng draw_rng = rng;
        out.samples[r] = med_monte_carlo(pop, spec, cfg.mc, draw_rng) * dose_factor;
    }
    return out;
}

} // namespace predose
