#pragma once

#include "predose/draws.hpp"
#include "predose/pkpd.hpp"
#include "predose/rng.hpp"

namespace predose {

// Allometric scaling between species: clearance with the 3/4 power of the
// body-weight ratio, volume linearly.
double allometric_cl(double cl, double w_from_kg, double w_to_kg);
double allometric_v(double v, double w_from_kg, double w_to_kg);

// Dose scaling factor implied by clearance scaling: (w_to/w_from)^0.75.
double allometric_dose_factor(double w_from_kg, double w_to_kg);

// Subsamples `post` to n joint draws (deterministic uniform thinning
// across chains and iterations) and maps mu_cl / mu_v by allometric
// scaling; every other column, including pinned constants, passes through
// unchanged. Identity when the weights are equal.
PosteriorDraws extrapolate_draws(const PosteriorDraws& post, double w_from_kg, double w_to_kg,
                                 int n_draws = 1000);

// Analytic MTD applied to each (mu_cl, omega_cl) draw of an extrapolated
// table.
DoseDraws mtd_draws(const PosteriorDraws& human_draws, const ToxicitySpec& spec,
                    const std::string& study_label);

struct MedDrawsConfig {
    MedMcConfig mc;
    double i_max = 1.0;
};

// Monte Carlo MED per posterior draw. The dose search runs at the source
// species' own scale (its parameters, its concentrations) and the
// resulting dose is scaled to the target species by the clearance
// exponent; subject draws are shared across posterior draws (common
// random numbers).
DoseDraws med_draws(const PosteriorDraws& source_draws, double w_from_kg, double w_to_kg,
                    const EfficacySpec& spec, const MedDrawsConfig& cfg, const Rng& rng,
                    const std::string& study_label);

} // namespace predose
