#pragma once

#include "predose/rng.hpp"

namespace predose {

// Individual-level PK parameters of the first-order absorption,
// one-compartment oral model.
struct PkParams {
    double ka = 0.0; // absorption rate constant, 1/h
    double cl = 0.0; // clearance, L/h
    double v = 0.0;  // volume of distribution, L
};

// Exposure-threshold toxicity rule: toxic when alpha * AUC >= tau_t, with
// alpha log-normal around mu_alpha.
struct ToxicitySpec {
    double tau_t = 0.0;       // AUC threshold, mg/L*h
    double p_t = 0.0;         // target toxicity probability
    double mu_alpha = 1.0;    // median of alpha
    double omega_alpha = 0.0; // log-scale SD of alpha
};

// Individual-level effect-compartment inhibition parameters.
struct PdParams {
    double i_max = 1.0; // maximum inhibition effect, fraction
    double ic50 = 0.0;  // concentration of half-maximal effect, mg/L
    double ke = 0.0;    // effect-compartment rate constant, 1/h
};

struct EfficacySpec {
    double tau_e = 0.0; // response threshold, fraction
    double p_e = 0.0;   // population fraction that must respond
};

// Population hyperparameters used by Monte Carlo dose finding. mu_* are
// medians of the individual log-normals, omega_* the log-scale SDs.
struct PopulationPkPd {
    double ka = 0.0;
    double mu_cl = 0.0, omega_cl = 0.0;
    double mu_v = 0.0, omega_v = 0.0;
    double i_max = 1.0;
    double mu_ic50 = 0.0, omega_ic50 = 0.0;
    double mu_ke = 0.0, omega_ke = 0.0;
};

struct MedMcConfig {
    int n_subjects = 2000;
    double horizon_h = 48.0; // search window for the response peak
    double rel_tol = 1e-3;   // bisection stopping tolerance on the dose
    double bracket_lo = 1e-2;
    double bracket_hi = 1e6;
};

// Plasma concentration at time t after an oral dose at time 0. Evaluates a
// form of the model that stays finite and smooth when ka approaches cl/v.
double concentration(double t, double dose, const PkParams& p);

// Total exposure: integral of concentration over [0, inf) = dose / cl.
double auc(double dose, double cl);

// P(alpha * AUC >= tau_t | dose) under log-normal CL and alpha.
double prob_toxicity(double dose, double mu_cl, double omega_cl, const ToxicitySpec& spec);

// Dose at which prob_toxicity equals spec.p_t (closed form, exact inverse).
double mtd_analytic(double mu_cl, double omega_cl, const ToxicitySpec& spec);

// Effect-compartment concentration (three-exponential closed form).
double effect_concentration(double t, double dose, const PkParams& p, double ke);

// Inhibition response i_max * Ce / (Ce + ic50), in [0, i_max).
double response(double t, double dose, const PkParams& p, const PdParams& q);

// Peak response over (0, horizon]: coarse scan then golden-section refine.
double max_response(double dose, const PkParams& p, const PdParams& q, double horizon);

// Per-unit-dose peak effect-compartment concentration, max over
// (0, horizon]. Ce is linear in dose, so the response at dose d is
// i_max * d*peak / (d*peak + ic50); dose searches reuse this.
double peak_effect_concentration_unit_dose(const PkParams& p, double ke, double horizon);

// Smallest dose at which more than a fraction p_e of simulated subjects
// reaches a peak response of at least tau_e. Subject draws are shared
// across candidate doses (common random numbers); the dose is located by
// bisection after a coarse log-spaced scan.
double med_monte_carlo(const PopulationPkPd& pop, const EfficacySpec& spec,
                       const MedMcConfig& cfg, Rng& rng);

} // namespace predose
