#include "predose/study.hpp"

#include "predose/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace predose {

std::string to_string(Species s) {
    switch (s) {
    case Species::mouse: return "mouse";
    case Species::rat: return "rat";
    case Species::dog: return "dog";
    case Species::human: return "human";
    }
    throw DomainError("unknown species");
}

Species species_from_string(const std::string& name) {
    if (name == "mouse") return Species::mouse;
    if (name == "rat") return Species::rat;
    if (name == "dog") return Species::dog;
    if (name == "human") return Species::human;
    throw ConfigError("unknown species: " + name);
}

std::string to_string(Outcome o) {
    return o == Outcome::concentration ? "concentration" : "inhibition";
}

Outcome outcome_from_string(const std::string& name) {
    if (name == "concentration") return Outcome::concentration;
    if (name == "inhibition") return Outcome::inhibition;
    throw ConfigError("unknown outcome: " + name);
}

void StudyDesign::validate() const {
    if (!(weight_kg > 0.0)) throw ConfigError("StudyDesign: weight_kg must be > 0");
    if (dose_levels_mgkg.empty() || n_per_dose < 1 || sampling_times_h.empty()) {
        throw ConfigError("StudyDesign: empty dose levels, subjects or sampling times");
    }
    if (!std::is_sorted(dose_levels_mgkg.begin(), dose_levels_mgkg.end(),
                        std::less_equal<>())) {
        throw ConfigError("StudyDesign: dose levels must be strictly increasing");
    }
    for (double t : sampling_times_h) {
        if (!(t > 0.0)) throw ConfigError("StudyDesign: sampling times must be > 0");
    }
    if (destructive && n_per_dose % static_cast<int>(sampling_times_h.size()) != 0) {
        throw ConfigError(
            "StudyDesign: destructive design needs n_per_dose divisible by #times");
    }
    if (observed_outcomes.empty()) throw ConfigError("StudyDesign: no observed outcomes");
}

int Dataset::n_subjects() const {
    std::set<int> ids;
    for (const auto& r : records) ids.insert(r.subject_id);
    return static_cast<int>(ids.size());
}

namespace {

void append_num(std::string& out, double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
}

} // namespace

void Dataset::write_csv(std::ostream& os) const {
    os << "subject_id,species,dose_mgkg,dose_mg,time_h,outcome,value\n";
    for (const auto& r : records) {
        std::string line = std::to_string(r.subject_id);
        line += ',';
        line += to_string(r.species);
        line += ',';
        append_num(line, r.dose_mgkg);
        line += ',';
        append_num(line, r.dose_mg);
        line += ',';
        append_num(line, r.time_h);
        line += ',';
        line += to_string(r.outcome);
        line += ',';
        append_num(line, r.value);
        line += '\n';
        os << line;
    }
}

Dataset Dataset::read_csv(std::istream& is) {
    Dataset ds;
    std::string line;
    if (!std::getline(is, line)) throw IoError("dataset CSV: empty file");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        Observation r;
        std::getline(ss, field, ',');
        r.subject_id = std::stoi(field);
        std::getline(ss, field, ',');
        r.species = species_from_string(field);
        std::getline(ss, field, ',');
        r.dose_mgkg = std::stod(field);
        std::getline(ss, field, ',');
        r.dose_mg = std::stod(field);
        std::getline(ss, field, ',');
        r.time_h = std::stod(field);
        std::getline(ss, field, ',');
        r.outcome = outcome_from_string(field);
        std::getline(ss, field, ',');
        r.value = std::stod(field);
        ds.records.push_back(r);
    }
    return ds;
}

std::map<Species, StudyDesign> builtin_designs() {
    std::map<Species, StudyDesign> out;

    StudyDesign mouse;
    mouse.species = Species::mouse;
    mouse.weight_kg = 0.025;
    mouse.dose_levels_mgkg = {10, 30, 50, 75, 100, 150, 300};
    mouse.n_per_dose = 15;
    mouse.sampling_times_h = {0.25, 0.75, 2.0, 5.0, 15.0};
    mouse.destructive = true; // 3 animals sacrificed per time point
    out[Species::mouse] = mouse;

    StudyDesign rat;
    rat.species = Species::rat;
    rat.weight_kg = 0.15;
    rat.dose_levels_mgkg = {10, 30, 50, 100, 300};
    rat.n_per_dose = 8;
    rat.sampling_times_h = {0.25, 1.0, 2.0, 3.667, 10.0};
    out[Species::rat] = rat;

    StudyDesign dog;
    dog.species = Species::dog;
    dog.weight_kg = 10.0;
    dog.dose_levels_mgkg = {2, 10, 30, 50, 300};
    dog.n_per_dose = 6;
    dog.sampling_times_h = {0.167, 1.667, 2.0, 5.5, 15.0};
    out[Species::dog] = dog;

    return out;
}

namespace {

SpeciesTruth base_truth(double weight, double mu_cl, double mu_v, double mu_ic50) {
    SpeciesTruth t;
    t.weight_kg = weight;
    t.pop.ka = 2.0;
    t.pop.mu_cl = mu_cl;
    t.pop.omega_cl = 0.7;
    t.pop.mu_v = mu_v;
    t.pop.omega_v = 0.7;
    t.pop.i_max = 1.0;
    t.pop.mu_ic50 = mu_ic50;
    t.pop.omega_ic50 = 0.7;
    t.pop.mu_ke = 1.6;
    t.pop.omega_ke = 0.7;
    t.sigma_c = 0.2;
    t.sigma_i = 0.2;
    t.toxicity = {22.6, 0.2, 1.0, 0.0};
    t.efficacy = {0.5, 0.65};
    return t;
}

} // namespace

ScenarioSpec builtin_scenario(int id) {
    if (id < 1 || id > 4) throw ConfigError("scenario id must be 1..4");
    ScenarioSpec sc;
    sc.id = id;
    sc.truth[Species::human] = base_truth(70.0, 40.0, 100.0, 0.32);
    sc.truth[Species::dog] = base_truth(10.0, 9.3, 14.0, 0.32);
    sc.truth[Species::mouse] = base_truth(0.025, 0.11, 0.04, 0.32);
    const double rat_mu_cl = (id == 2 || id == 4) ? 1.59 : 0.40;
    const double rat_mu_ic50 = (id == 3 || id == 4) ? 2.9 : 0.32;
    sc.truth[Species::rat] = base_truth(0.15, rat_mu_cl, 0.21, rat_mu_ic50);
    return sc;
}

std::map<int, ScenarioSpec> builtin_scenarios() {
    std::map<int, ScenarioSpec> out;
    for (int id = 1; id <= 4; ++id) out[id] = builtin_scenario(id);
    return out;
}

Dataset simulate_dataset(const StudyDesign& design, const SpeciesTruth& truth,
                         const std::vector<Outcome>& outcomes, Rng& rng) {
    design.validate();
    if (outcomes.empty()) throw ConfigError("simulate_dataset: no outcomes requested");
    const bool with_pd =
        std::find(outcomes.begin(), outcomes.end(), Outcome::inhibition) != outcomes.end();

    Dataset ds;
    const int n_times = static_cast<int>(design.sampling_times_h.size());
    const int per_time = design.destructive ? design.n_per_dose / n_times : 0;
    const double log_mu_cl = std::log(truth.pop.mu_cl);
    const double log_mu_v = std::log(truth.pop.mu_v);

    int subject_id = 0;
    for (double dose_mgkg : design.dose_levels_mgkg) {
        const double dose_mg = dose_mgkg * design.weight_kg;
        for (int j = 0; j < design.n_per_dose; ++j) {
            ++subject_id;
            Rng sub = rng.substream(static_cast<std::uint64_t>(subject_id));
            PkParams p;
            p.ka = truth.pop.ka;
            p.cl = sub.lognormal(log_mu_cl, truth.pop.omega_cl);
            p.v = sub.lognormal(log_mu_v, truth.pop.omega_v);
            PdParams q;
            if (with_pd) {
                q.i_max = truth.pop.i_max;
                q.ic50 = sub.lognormal(std::log(truth.pop.mu_ic50), truth.pop.omega_ic50);
                q.ke = sub.lognormal(std::log(truth.pop.mu_ke), truth.pop.omega_ke);
            }
            std::vector<double> times;
            if (design.destructive) {
                times = {design.sampling_times_h[static_cast<std::size_t>(j / per_time)]};
            } else {
                times = design.sampling_times_h;
            }
            for (double t : times) {
                for (Outcome oc : outcomes) {
                    Observation r;
                    r.subject_id = subject_id;
                    r.species = design.species;
                    r.dose_mgkg = dose_mgkg;
                    r.dose_mg = dose_mg;
                    r.time_h = t;
                    r.outcome = oc;
                    if (oc == Outcome::concentration) {
                        const double c = concentration(t, dose_mg, p);
                        if (!(c > 0.0)) {
                            throw DomainError("simulate_dataset: zero model concentration");
                        }
                        r.value = std::exp(std::log(c) + truth.sigma_c * sub.normal());
                    } else {
                        const double ce = effect_concentration(t, dose_mg, p, q.ke);
                        const double inh = 1.0 - q.i_max * ce / (ce + q.ic50);
                        const double z = std::log(inh / (1.0 - inh)) + truth.sigma_i * sub.normal();
                        r.value = 1.0 / (1.0 + std::exp(-z));
                    }
                    ds.records.push_back(r);
                }
            }
        }
    }
    return ds;
}

} // namespace predose
