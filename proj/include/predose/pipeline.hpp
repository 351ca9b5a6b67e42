#pragma once

#include "predose/commensurability.hpp"
#include "predose/draws.hpp"
#include "predose/mcmc.hpp"
#include "predose/merge.hpp"
#include "predose/pkpd.hpp"
#include "predose/study.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace predose {

enum class Estimator { bayes, hybrid };
enum class DoseTarget { mtd, med };

std::string to_string(DoseTarget t);
std::string to_string(Estimator e);
DoseTarget dose_target_from_string(const std::string& name);
Estimator estimator_from_string(const std::string& name);

struct RunConfig {
    int scenario = 1;
    int replications = 50;
    std::uint64_t seed = 1;
    std::vector<DoseTarget> targets = {DoseTarget::mtd};
    Estimator estimator = Estimator::bayes;
    McmcConfig mcmc; // per-fit seeds are derived internally
    std::map<std::string, double> thresholds = {{"mtd", 0.5}, {"med", 0.3}};
    std::string default_study = "dog";
    double mouse_omega_v = 0.7; // assumed mouse variabilities (0.4 / 0.7 / 1.0)
    double mouse_omega_ic50 = 0.7;
    double mouse_omega_ke = 0.7;
    // Residual error of the destructive mouse study, assumed known (one
    // sample per animal leaves sigma_c barely identified); 0 = estimate it.
    double mouse_sigma_c = 0.2;
    int dose_draws = 1000; // L
    MedMcConfig med_mc;
    std::size_t grid_points = 512;
    int threads = 0; // 0 = hardware concurrency; never affects results
    std::string out_dir;
    std::optional<ScenarioSpec> scenario_override; // replaces the builtin table

    void validate() const; // throws ConfigError

    [[nodiscard]] double threshold_for(DoseTarget t) const;
    [[nodiscard]] std::map<std::string, double> mouse_pins() const;
    [[nodiscard]] ScenarioSpec scenario_spec() const;
};

struct TargetResult {
    DoseTarget target = DoseTarget::mtd;
    DistanceMatrix distances;
    std::vector<std::string> selected;
    PosteriorSummary merged;
    GridDensity merged_density; // normalized final dose distribution
    PosteriorSummary dog_only;

    [[nodiscard]] double merged_cri_length() const { return merged.cri_hi - merged.cri_lo; }
    [[nodiscard]] double dog_cri_length() const { return dog_only.cri_hi - dog_only.cri_lo; }
};

struct ReplicationResult {
    int index = 0;
    bool failed = false;
    std::string stage; // stage tag when failed
    std::string error;
    std::map<Species, std::map<std::string, double>> posterior_mean;
    std::map<Species, std::map<std::string, double>> posterior_sd;
    std::vector<TargetResult> targets;

    [[nodiscard]] const TargetResult& result_for(DoseTarget t) const;
};

// One full pass of the four-step pipeline: simulate and fit the three
// animal studies sequentially (priors centered on the extrapolated
// posterior means of the previous study), derive the dose-of-interest
// draws per study, standardize, measure pairwise distances, select, merge
// and summarize; the dog-only baseline is computed alongside. Stage
// failures are recorded in the result, not thrown.
ReplicationResult run_replication(const RunConfig& cfg, int rep_index);

struct CampaignResult {
    std::vector<ReplicationResult> replications;
    int n_failed = 0;

    [[nodiscard]] std::vector<double> merged_means(DoseTarget t) const;
    [[nodiscard]] std::vector<double> merged_cri_lengths(DoseTarget t) const;
    [[nodiscard]] std::vector<double> dog_cri_lengths(DoseTarget t) const;
    [[nodiscard]] std::vector<double> pair_distances(DoseTarget t, const std::string& a,
                                                     const std::string& b) const;
    // replications whose selected set omits `species` entirely
    [[nodiscard]] int count_excluding(DoseTarget t, const std::string& species) const;
    [[nodiscard]] int n_success() const {
        return static_cast<int>(replications.size()) - n_failed;
    }
};

// Runs cfg.replications seeded replications (in parallel when configured)
// and, when cfg.out_dir is set, writes replication_<i>.csv, distances.csv
// and aggregate.json. Throws CampaignError when more than 20% of the
// replications fail.
CampaignResult run_campaign(const RunConfig& cfg);

// Long-format key,value dump of one replication (the per-replication
// campaign file format).
void write_replication_csv(const ReplicationResult& r, std::ostream& os);

// Theoretical commensurability label of a species pair under a scenario
// (1 = consistent extrapolation to human). nullopt when the scenario is
// not usable for calibrating the given target.
std::optional<int> true_label(DoseTarget target, int scenario, const std::string& a,
                              const std::string& b);

struct ThresholdReport {
    DoseTarget target = DoseTarget::mtd;
    std::vector<int> scenarios;
    std::vector<std::pair<double, double>> curve; // (tau, accuracy)
    int n_points = 0;                             // pooled labeled distances
};

// Pools labeled pairwise distances over campaigns of the given scenarios
// and evaluates the accuracy curve on the default threshold grid. Writes
// threshold_curve.csv when cfg.out_dir is set.
ThresholdReport calibrate_threshold(const RunConfig& cfg, const std::vector<int>& scenarios,
                                    DoseTarget target);

} // namespace predose
