#include "predose/pipeline.hpp"

#include "predose/errors.hpp"
#include "predose/extrapolate.hpp"
#include "predose/hybrid.hpp"
#include "predose/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

namespace predose {

namespace {

using nlohmann::json;

constexpr double kHumanWeightKg = 70.0;

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

std::string to_string(DoseTarget t) { return t == DoseTarget::mtd ? "mtd" : "med"; }

std::string to_string(Estimator e) { return e == Estimator::bayes ? "bayes" : "hybrid"; }

DoseTarget dose_target_from_string(const std::string& name) {
    if (name == "mtd") return DoseTarget::mtd;
    if (name == "med") return DoseTarget::med;
    throw ConfigError("unknown dose target: " + name);
}

Estimator estimator_from_string(const std::string& name) {
    if (name == "bayes") return Estimator::bayes;
    if (name == "hybrid") return Estimator::hybrid;
    throw ConfigError("unknown estimator: " + name);
}

void RunConfig::validate() const {
    if (scenario < 1 || scenario > 4) throw ConfigError("config: scenario must be 1..4");
    if (replications < 1) throw ConfigError("config: replications must be >= 1");
    if (targets.empty()) throw ConfigError("config: at least one target required");
    for (std::size_t i = 0; i < targets.size(); ++i) {
        for (std::size_t j = i + 1; j < targets.size(); ++j) {
            if (targets[i] == targets[j]) throw ConfigError("config: duplicate target");
        }
        const double tau = threshold_for(targets[i]);
        if (!(tau > 0.0 && tau < 1.0)) {
            throw ConfigError("config: threshold for " + to_string(targets[i]) +
                              " must lie in (0,1)");
        }
    }
    if (default_study != "mouse" && default_study != "rat" && default_study != "dog") {
        throw ConfigError("config: default_study must be mouse, rat or dog");
    }
    if (!(mouse_omega_v > 0.0 && mouse_omega_ic50 > 0.0 && mouse_omega_ke > 0.0)) {
        throw ConfigError("config: mouse omega assumptions must be > 0");
    }
    if (mouse_sigma_c < 0.0) throw ConfigError("config: mouse_sigma_c must be >= 0");
    if (dose_draws < 2) throw ConfigError("config: dose_draws must be >= 2");
    if (grid_points < 8) throw ConfigError("config: grid_points must be >= 8");
    if (mcmc.chains < 1 || mcmc.iters < 1 || mcmc.burn_in < 0) {
        throw ConfigError("config: invalid mcmc settings");
    }
    if (med_mc.n_subjects < 1) throw ConfigError("config: med subjects must be >= 1");
    if (threads < 0) throw ConfigError("config: threads must be >= 0");
}

double RunConfig::threshold_for(DoseTarget t) const {
    const auto it = thresholds.find(to_string(t));
    if (it == thresholds.end()) {
        throw ConfigError("config: no threshold for target " + to_string(t));
    }
    return it->second;
}

std::map<std::string, double> RunConfig::mouse_pins() const {
    std::map<std::string, double> pins = {{"omega_v", mouse_omega_v},
                                          {"omega_ic50", mouse_omega_ic50},
                                          {"omega_ke", mouse_omega_ke}};
    if (mouse_sigma_c > 0.0) pins["sigma_c"] = mouse_sigma_c;
    return pins;
}

ScenarioSpec RunConfig::scenario_spec() const {
    return scenario_override ? *scenario_override : builtin_scenario(scenario);
}

const TargetResult& ReplicationResult::result_for(DoseTarget t) const {
    for (const auto& tr : targets) {
        if (tr.target == t) return tr;
    }
    throw MappingError("ReplicationResult: no result for target " + to_string(t));
}

namespace {

// Shared-grid KDE of the raw dose draws of the given studies, then the
// product merge. Also used for the dog-only baseline (singleton subset).
MergedPosterior merge_dose_group(const std::vector<DoseDraws>& group,
                                 const std::vector<std::string>& subset,
                                 std::size_t grid_points) {
    std::vector<const DoseDraws*> chosen;
    for (const auto& name : subset) {
        for (const auto& dd : group) {
            if (dd.study == name) chosen.push_back(&dd);
        }
    }
    if (chosen.empty()) throw MappingError("merge_dose_group: empty study subset");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double h_pool = 0.0;
    std::vector<double> bandwidths(chosen.size());
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        bandwidths[k] = silverman_bandwidth(chosen[k]->samples);
        h_pool = std::max(h_pool, bandwidths[k]);
        const auto [mn, mx] =
            std::minmax_element(chosen[k]->samples.begin(), chosen[k]->samples.end());
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
    }
    lo -= 3.0 * h_pool;
    hi += 3.0 * h_pool;

    std::vector<GridDensity> densities(chosen.size());
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        EmpiricalDraws draws{chosen[k]->samples, chosen[k]->study};
        densities[k] = kde(draws, lo, hi, grid_points, bandwidths[k]);
        densities[k].normalize();
        labels.push_back(chosen[k]->study);
    }
    return merge(densities, labels);
}

struct StudyFit {
    Species species = Species::mouse;
    double weight_kg = 0.0;
    PosteriorDraws post;
};

} // namespace

ReplicationResult run_replication(const RunConfig& cfg, int rep_index) {
    cfg.validate();
    ReplicationResult res;
    res.index = rep_index;
    const Rng rep_rng = Rng(cfg.seed).substream(static_cast<std::uint64_t>(rep_index));

    const bool with_med =
        std::find(cfg.targets.begin(), cfg.targets.end(), DoseTarget::med) != cfg.targets.end();
    std::vector<Outcome> outcomes = {Outcome::concentration};
    if (with_med) outcomes.push_back(Outcome::inhibition);

    std::string stage = "setup";
    try {
        const auto designs = builtin_designs();
        const ScenarioSpec scenario = cfg.scenario_spec();
        const SpeciesTruth& human = scenario.truth.at(Species::human);

        const Species order[3] = {Species::mouse, Species::rat, Species::dog};
        std::vector<StudyFit> fits;
        for (int s = 0; s < 3; ++s) {
            const Species sp = order[s];
            const StudyDesign& design = designs.at(sp);
            const SpeciesTruth& truth = scenario.truth.at(sp);

            stage = to_string(sp) + "-simulate";
            Rng sim_rng = rep_rng.substream(static_cast<std::uint64_t>(2 * s));
            const Dataset data = simulate_dataset(design, truth, outcomes, sim_rng);

            stage = to_string(sp) + "-fit";
            PriorSpec priors = PriorSpec::defaults();
            if (s > 0) {
                priors = sequential_prior(fits.back().post, fits.back().weight_kg,
                                          design.weight_kg, PriorSpec::defaults());
            }
            const auto pins = sp == Species::mouse ? cfg.mouse_pins()
                                                   : std::map<std::string, double>{};
            const ModelSpec mspec = ModelSpec::standard(design, outcomes, pins);
            const PkModel model(mspec, priors, data);

            Rng seed_rng = rep_rng.substream(static_cast<std::uint64_t>(2 * s + 1));
            StudyFit fit;
            fit.species = sp;
            fit.weight_kg = design.weight_kg;
            if (cfg.estimator == Estimator::bayes) {
                McmcConfig mc = cfg.mcmc;
                mc.seed = seed_rng.next_u64();
                fit.post = run_mcmc(model, mc);
            } else {
                HybridConfig hc;
                hc.n_draws = cfg.dose_draws;
                hc.seed = seed_rng.next_u64();
                fit.post = hybrid_fit(model, hc).draws;
            }
            for (const auto& name : fit.post.names) {
                res.posterior_mean[sp][name] = fit.post.posterior_mean(name);
                res.posterior_sd[sp][name] = fit.post.posterior_sd(name);
            }
            fits.push_back(std::move(fit));
        }

        for (std::size_t ti = 0; ti < cfg.targets.size(); ++ti) {
            const DoseTarget target = cfg.targets[ti];
            stage = to_string(target) + "-doses";
            std::vector<DoseDraws> group;
            for (const auto& fit : fits) {
                const std::string label = to_string(fit.species);
                if (target == DoseTarget::mtd) {
                    const PosteriorDraws human_draws = extrapolate_draws(
                        fit.post, fit.weight_kg, kHumanWeightKg, cfg.dose_draws);
                    group.push_back(mtd_draws(human_draws, human.toxicity, label));
                } else {
                    const PosteriorDraws source = extrapolate_draws(
                        fit.post, fit.weight_kg, fit.weight_kg, cfg.dose_draws);
                    MedDrawsConfig mdc;
                    mdc.mc = cfg.med_mc;
                    // one subject stream per target, shared by all studies
                    const Rng med_rng = rep_rng.substream(1000 + ti);
                    group.push_back(med_draws(source, fit.weight_kg, kHumanWeightKg,
                                              human.efficacy, mdc, med_rng, label));
                }
            }

            stage = to_string(target) + "-commensurability";
            const auto standardized = standardize(group);
            PairwiseConfig pw;
            pw.grid_points = cfg.grid_points;
            const DistanceMatrix dm = pairwise_distances(standardized, pw);
            const auto selected = select_studies(dm, cfg.threshold_for(target),
                                                 cfg.default_study);

            stage = to_string(target) + "-merge";
            TargetResult tr;
            tr.target = target;
            tr.distances = dm;
            tr.selected = selected;
            MergedPosterior merged = merge_dose_group(group, selected, cfg.grid_points);
            tr.merged = merged.summary;
            tr.merged_density = std::move(merged.density);
            tr.dog_only = merge_dose_group(group, {cfg.default_study}, cfg.grid_points).summary;
            res.targets.push_back(std::move(tr));
        }
    } catch (const std::exception& e) {
        res.failed = true;
        res.stage = stage;
        res.error = e.what();
        res.targets.clear();
    }
    return res;
}

std::vector<double> CampaignResult::merged_means(DoseTarget t) const {
    std::vector<double> out;
    for (const auto& r : replications) {
        if (!r.failed) out.push_back(r.result_for(t).merged.mean);
    }
    return out;
}

std::vector<double> CampaignResult::merged_cri_lengths(DoseTarget t) const {
    std::vector<double> out;
    for (const auto& r : replications) {
        if (!r.failed) out.push_back(r.result_for(t).merged_cri_length());
    }
    return out;
}

std::vector<double> CampaignResult::dog_cri_lengths(DoseTarget t) const {
    std::vector<double> out;
    for (const auto& r : replications) {
        if (!r.failed) out.push_back(r.result_for(t).dog_cri_length());
    }
    return out;
}

std::vector<double> CampaignResult::pair_distances(DoseTarget t, const std::string& a,
                                                   const std::string& b) const {
    std::vector<double> out;
    for (const auto& r : replications) {
        if (!r.failed) out.push_back(r.result_for(t).distances.between(a, b));
    }
    return out;
}

int CampaignResult::count_excluding(DoseTarget t, const std::string& species) const {
    int count = 0;
    for (const auto& r : replications) {
        if (r.failed) continue;
        const auto& sel = r.result_for(t).selected;
        if (std::find(sel.begin(), sel.end(), species) == sel.end()) ++count;
    }
    return count;
}

void write_replication_csv(const ReplicationResult& r, std::ostream& os) {
    os << "key,value\n";
    os << "replication," << r.index << '\n';
    os << "status," << (r.failed ? "failed" : "ok") << '\n';
    if (r.failed) {
        std::string error = r.error;
        std::replace(error.begin(), error.end(), ',', ';');
        os << "stage," << r.stage << '\n';
        os << "error," << error << '\n';
        return;
    }
    for (const auto& [sp, params] : r.posterior_mean) {
        for (const auto& [name, value] : params) {
            os << "posterior." << to_string(sp) << '.' << name << ".mean," << fmt(value) << '\n';
            os << "posterior." << to_string(sp) << '.' << name << ".sd,"
               << fmt(r.posterior_sd.at(sp).at(name)) << '\n';
        }
    }
    for (const auto& tr : r.targets) {
        const std::string prefix = "target." + to_string(tr.target);
        for (std::size_t i = 0; i < tr.distances.size(); ++i) {
            for (std::size_t j = i + 1; j < tr.distances.size(); ++j) {
                os << prefix << ".distance." << tr.distances.studies[i] << '-'
                   << tr.distances.studies[j] << ',' << fmt(tr.distances.at(i, j)) << '\n';
            }
        }
        std::string sel;
        for (const auto& s : tr.selected) {
            if (!sel.empty()) sel += '+';
            sel += s;
        }
        os << prefix << ".selected," << sel << '\n';
        os << prefix << ".merged.mean," << fmt(tr.merged.mean) << '\n';
        os << prefix << ".merged.median," << fmt(tr.merged.median) << '\n';
        os << prefix << ".merged.cri95_lo," << fmt(tr.merged.cri_lo) << '\n';
        os << prefix << ".merged.cri95_hi," << fmt(tr.merged.cri_hi) << '\n';
        os << prefix << ".merged.cri95_length," << fmt(tr.merged_cri_length()) << '\n';
        os << prefix << ".dog_only.mean," << fmt(tr.dog_only.mean) << '\n';
        os << prefix << ".dog_only.median," << fmt(tr.dog_only.median) << '\n';
        os << prefix << ".dog_only.cri95_lo," << fmt(tr.dog_only.cri_lo) << '\n';
        os << prefix << ".dog_only.cri95_hi," << fmt(tr.dog_only.cri_hi) << '\n';
        os << prefix << ".dog_only.cri95_length," << fmt(tr.dog_cri_length()) << '\n';
    }
}

namespace {

void write_replication_file(const std::filesystem::path& path, const ReplicationResult& r) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    write_replication_csv(r, os);
}

json moments_json(const std::vector<double>& xs) {
    json j;
    if (xs.empty()) {
        j["mean"] = nullptr;
        j["sd"] = nullptr;
        j["n"] = 0;
        return j;
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double sd = 0.0;
    if (xs.size() >= 2) {
        sd = empirical_mean_sd(xs).sd;
    }
    j["mean"] = mean;
    j["sd"] = sd;
    j["n"] = xs.size();
    return j;
}

void write_campaign_outputs(const RunConfig& cfg, const CampaignResult& camp) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string());

    for (const auto& r : camp.replications) {
        write_replication_file(dir / ("replication_" + std::to_string(r.index) + ".csv"), r);
    }

    {
        std::ofstream os(dir / "distances.csv");
        if (!os) throw IoError("cannot write distances.csv");
        os << "replication,target,pair,distance\n";
        for (const auto& r : camp.replications) {
            if (r.failed) continue;
            for (const auto& tr : r.targets) {
                for (std::size_t i = 0; i < tr.distances.size(); ++i) {
                    for (std::size_t j = i + 1; j < tr.distances.size(); ++j) {
                        os << r.index << ',' << to_string(tr.target) << ','
                           << tr.distances.studies[i] << '-' << tr.distances.studies[j] << ','
                           << fmt(tr.distances.at(i, j)) << '\n';
                    }
                }
            }
        }
    }

    json agg;
    agg["scenario"] = cfg.scenario;
    agg["replications"] = cfg.replications;
    agg["failed"] = camp.n_failed;
    agg["seed"] = cfg.seed;
    agg["estimator"] = to_string(cfg.estimator);
    agg["mcmc"] = {{"chains", cfg.mcmc.chains},
                   {"burn_in", cfg.mcmc.burn_in},
                   {"iters", cfg.mcmc.iters},
                   {"sampler", cfg.mcmc.sampler == McmcConfig::Sampler::hmc ? "hmc" : "mwg"}};
    agg["dose_draws"] = cfg.dose_draws;
    agg["grid_points"] = cfg.grid_points;
    agg["mouse_pins"] = cfg.mouse_pins();
    json failures = json::array();
    for (const auto& r : camp.replications) {
        if (r.failed) {
            failures.push_back({{"index", r.index}, {"stage", r.stage}, {"error", r.error}});
        }
    }
    agg["failures"] = failures;

    for (DoseTarget t : cfg.targets) {
        json jt;
        jt["threshold"] = cfg.threshold_for(t);
        jt["merged_mean"] = moments_json(camp.merged_means(t));
        jt["merged_cri95_length"] = moments_json(camp.merged_cri_lengths(t));
        jt["dog_only_cri95_length"] = moments_json(camp.dog_cri_lengths(t));

        const auto merged_len = camp.merged_cri_lengths(t);
        const auto dog_len = camp.dog_cri_lengths(t);
        int narrower = 0;
        for (std::size_t i = 0; i < merged_len.size(); ++i) {
            narrower += merged_len[i] < dog_len[i] ? 1 : 0;
        }
        jt["frac_merged_narrower"] =
            merged_len.empty() ? 0.0
                               : static_cast<double>(narrower) /
                                     static_cast<double>(merged_len.size());

        json sel;
        for (const char* sp : {"mouse", "rat", "dog"}) {
            const int excl = camp.count_excluding(t, sp);
            sel[sp] = camp.n_success() > 0
                          ? 1.0 - static_cast<double>(excl) /
                                      static_cast<double>(camp.n_success())
                          : 0.0;
        }
        jt["selection_frequency"] = sel;

        json dq;
        const std::pair<const char*, const char*> pairs[3] = {
            {"mouse", "rat"}, {"mouse", "dog"}, {"rat", "dog"}};
        for (const auto& [a, b] : pairs) {
            auto d = camp.pair_distances(t, a, b);
            if (d.empty()) continue;
            json q;
            q["q25"] = empirical_quantile(d, 0.25);
            q["q50"] = empirical_quantile(d, 0.5);
            q["q75"] = empirical_quantile(d, 0.75);
            dq[std::string(a) + "-" + b] = q;
        }
        jt["distance_quantiles"] = dq;
        agg["targets"][to_string(t)] = jt;
    }

    std::ofstream os(dir / "aggregate.json");
    if (!os) throw IoError("cannot write aggregate.json");
    os << agg.dump(2) << '\n';
}

} // namespace

CampaignResult run_campaign(const RunConfig& cfg) {
    cfg.validate();
    const int r_total = cfg.replications;
    CampaignResult camp;
    camp.replications.resize(static_cast<std::size_t>(r_total));

    int n_threads = cfg.threads > 0 ? cfg.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::clamp(n_threads, 1, r_total);

    std::atomic<int> next{0};
    const auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= r_total) break;
            camp.replications[static_cast<std::size_t>(i)] = run_replication(cfg, i);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < n_threads; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (const auto& r : camp.replications) camp.n_failed += r.failed ? 1 : 0;

    if (!cfg.out_dir.empty()) write_campaign_outputs(cfg, camp);

    if (camp.n_failed * 5 > r_total) {
        std::string msg = "campaign: " + std::to_string(camp.n_failed) + "/" +
                          std::to_string(r_total) + " replications failed;";
        for (const auto& r : camp.replications) {
            if (r.failed) {
                msg += " [" + std::to_string(r.index) + " @" + r.stage + "] " + r.error;
                break; // first failure as the headline diagnostic
            }
        }
        throw CampaignError(msg);
    }
    return camp;
}

std::optional<int> true_label(DoseTarget target, int scenario, const std::string& a,
                              const std::string& b) {
    if (scenario < 1 || scenario > 4) throw ConfigError("true_label: scenario must be 1..4");
    const bool mouse_dog = (a == "mouse" && b == "dog") || (a == "dog" && b == "mouse");
    if (target == DoseTarget::mtd) {
        if (scenario == 1 || scenario == 3) return 1;
        return mouse_dog ? 1 : 0;
    }
    if (scenario == 2) return std::nullopt; // not usable for MED calibration
    if (scenario == 1) return 1;
    return mouse_dog ? 1 : 0;
}

ThresholdReport calibrate_threshold(const RunConfig& cfg, const std::vector<int>& scenarios,
                                    DoseTarget target) {
    cfg.validate();
    if (scenarios.empty()) throw ConfigError("calibrate_threshold: no scenarios given");

    std::vector<int> labels;
    std::vector<double> dists;
    std::vector<int> used;
    for (int sc : scenarios) {
        const char* species[3] = {"mouse", "rat", "dog"};
        bool any_label = false;
        for (int i = 0; i < 3 && !any_label; ++i) {
            for (int j = i + 1; j < 3; ++j) {
                if (true_label(target, sc, species[i], species[j])) {
                    any_label = true;
                    break;
                }
            }
        }
        if (!any_label) continue; // scenario excluded for this target

        RunConfig sub = cfg;
        sub.scenario = sc;
        sub.out_dir.clear();
        sub.targets = {target};
        sub.seed = mix64(cfg.seed ^ static_cast<std::uint64_t>(sc));
        const CampaignResult camp = run_campaign(sub);
        used.push_back(sc);
        for (const auto& r : camp.replications) {
            if (r.failed) continue;
            const auto& dm = r.result_for(target).distances;
            for (std::size_t i = 0; i < dm.size(); ++i) {
                for (std::size_t j = i + 1; j < dm.size(); ++j) {
                    const auto lbl = true_label(target, sc, dm.studies[i], dm.studies[j]);
                    if (!lbl) continue;
                    labels.push_back(*lbl);
                    dists.push_back(dm.at(i, j));
                }
            }
        }
    }
    if (labels.empty()) {
        throw ConfigError("calibrate_threshold: no labeled scenario produced distances");
    }

    ThresholdReport report;
    report.target = target;
    report.scenarios = used;
    report.curve = threshold_curve(labels, dists, default_taus());
    report.n_points = static_cast<int>(labels.size());

    if (!cfg.out_dir.empty()) {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(fs::path(cfg.out_dir), ec);
        if (ec) throw IoError("cannot create output directory " + cfg.out_dir);
        std::ofstream os(fs::path(cfg.out_dir) / "threshold_curve.csv");
        if (!os) throw IoError("cannot write threshold_curve.csv");
        os << "target,tau,accuracy\n";
        for (const auto& [tau, acc] : report.curve) {
            os << to_string(target) << ',' << fmt(tau) << ',' << fmt(acc) << '\n';
        }
    }
    return report;
}

} // namespace predose
