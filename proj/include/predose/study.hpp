#pragma once

#include "predose/pkpd.hpp"
#include "predose/rng.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace predose {

enum class Species { mouse, rat, dog, human };

std::string to_string(Species s);
Species species_from_string(const std::string& name);

enum class Outcome { concentration, inhibition };

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& name);

// Sampling plan for one animal study. For destructive designs each animal
// contributes a single sampling time (n_per_dose animals split evenly over
// the sampling times).
struct StudyDesign {
    Species species = Species::mouse;
    double weight_kg = 0.0;
    std::vector<double> dose_levels_mgkg;
    int n_per_dose = 0;
    std::vector<double> sampling_times_h;
    bool destructive = false;
    std::vector<Outcome> observed_outcomes = {Outcome::concentration};

    [[nodiscard]] int n_subjects() const {
        return n_per_dose * static_cast<int>(dose_levels_mgkg.size());
    }
    void validate() const; // throws ConfigError on violated invariants
};

// True population values for one species in one scenario.
struct SpeciesTruth {
    double weight_kg = 0.0;
    PopulationPkPd pop;      // ka, mu/omega pairs for CL, V, IC50, ke
    double sigma_c = 0.0;    // residual log-SD on concentration
    double sigma_i = 0.0;    // residual logit-SD on inhibition
    ToxicitySpec toxicity;   // tau_t, p_t, mu_alpha, omega_alpha
    EfficacySpec efficacy;   // tau_e, p_e
};

struct ScenarioSpec {
    int id = 1;
    std::map<Species, SpeciesTruth> truth;
};

// One simulated (or loaded) observation.
struct Observation {
    int subject_id = 0;
    Species species = Species::mouse;
    double dose_mgkg = 0.0;
    double dose_mg = 0.0;
    double time_h = 0.0;
    Outcome outcome = Outcome::concentration;
    double value = 0.0;
};

struct Dataset {
    std::vector<Observation> records;

    [[nodiscard]] int n_subjects() const;
    void write_csv(std::ostream& os) const;
    static Dataset read_csv(std::istream& is);
};

// The built-in study designs (mouse destructive, rat, dog).
std::map<Species, StudyDesign> builtin_designs();

// Exact transcription of the simulation scenario tables (ids 1-4).
std::map<int, ScenarioSpec> builtin_scenarios();
ScenarioSpec builtin_scenario(int id);

// Simulates a dataset under `design` and `truth`: per-subject parameters
// from log-normals, model values at the design times (dose in mg = mg/kg
// times body weight), multiplicative log-normal error on concentrations
// and logit-normal error on inhibition values.
Dataset simulate_dataset(const StudyDesign& design, const SpeciesTruth& truth,
                         const std::vector<Outcome>& outcomes, Rng& rng);

} // namespace predose
