#include "predose/predose.h"

#include "predose/commensurability.hpp"
#include "predose/errors.hpp"
#include "predose/hybrid.hpp"
#include "predose/mcmc.hpp"
#include "predose/merge.hpp"
#include "predose/model.hpp"
#include "predose/pipeline.hpp"
#include "predose/pkpd.hpp"
#include "predose/rng.hpp"
#include "predose/study.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

using nlohmann::json;

struct predose_config {
    predose::RunConfig run;
};

namespace {

thread_local std::string g_last_error;

predose_status fail(predose_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

// Runs a callable, translating exceptions into status codes.
template <class F>
predose_status guarded(F&& fn) {
    try {
        fn();
        g_last_error.clear();
        return PREDOSE_OK;
    } catch (const predose::ConfigError& e) {
        return fail(PREDOSE_CONFIG_ERROR, e.what());
    } catch (const predose::CampaignError& e) {
        return fail(PREDOSE_CAMPAIGN_ERROR, e.what());
    } catch (const predose::IoError& e) {
        return fail(PREDOSE_IO_ERROR, e.what());
    } catch (const std::exception& e) {
        return fail(PREDOSE_ERROR, e.what());
    }
}

predose::SpeciesTruth truth_from_json(const json& j, const predose::SpeciesTruth& base) {
    predose::SpeciesTruth t = base;
    const auto num = [&](const char* key, double& field) {
        if (j.contains(key)) field = j.at(key).get<double>();
    };
    num("weight_kg", t.weight_kg);
    num("ka", t.pop.ka);
    num("mu_cl", t.pop.mu_cl);
    num("omega_cl", t.pop.omega_cl);
    num("mu_v", t.pop.mu_v);
    num("omega_v", t.pop.omega_v);
    num("sigma_c", t.sigma_c);
    num("sigma_i", t.sigma_i);
    num("i_max", t.pop.i_max);
    num("mu_ic50", t.pop.mu_ic50);
    num("omega_ic50", t.pop.omega_ic50);
    num("mu_ke", t.pop.mu_ke);
    num("omega_ke", t.pop.omega_ke);
    num("tau_t", t.toxicity.tau_t);
    num("p_t", t.toxicity.p_t);
    num("mu_alpha", t.toxicity.mu_alpha);
    num("omega_alpha", t.toxicity.omega_alpha);
    num("tau_e", t.efficacy.tau_e);
    num("p_e", t.efficacy.p_e);
    return t;
}

void apply_json(predose::RunConfig& cfg, const json& j) {
    using predose::ConfigError;
    if (!j.is_object()) throw ConfigError("config: top-level JSON must be an object");
    if (j.contains("scenario")) cfg.scenario = j.at("scenario").get<int>();
    if (j.contains("replications")) cfg.replications = j.at("replications").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("targets")) {
        cfg.targets.clear();
        for (const auto& t : j.at("targets")) {
            cfg.targets.push_back(predose::dose_target_from_string(t.get<std::string>()));
        }
    }
    if (j.contains("estimator")) {
        cfg.estimator = predose::estimator_from_string(j.at("estimator").get<std::string>());
    }
    if (j.contains("mcmc")) {
        const auto& m = j.at("mcmc");
        if (m.contains("chains")) cfg.mcmc.chains = m.at("chains").get<int>();
        if (m.contains("burn_in")) cfg.mcmc.burn_in = m.at("burn_in").get<int>();
        if (m.contains("iters")) cfg.mcmc.iters = m.at("iters").get<int>();
        if (m.contains("sampler")) {
            const auto s = m.at("sampler").get<std::string>();
            if (s == "mwg") {
                cfg.mcmc.sampler = predose::McmcConfig::Sampler::metropolis_within_gibbs;
            } else if (s == "hmc") {
                cfg.mcmc.sampler = predose::McmcConfig::Sampler::hmc;
            } else {
                throw ConfigError("config: unknown sampler " + s);
            }
        }
    }
    if (j.contains("thresholds")) {
        for (const auto& [key, value] : j.at("thresholds").items()) {
            predose::dose_target_from_string(key); // validate the key
            cfg.thresholds[key] = value.get<double>();
        }
    }
    if (j.contains("default_study")) {
        cfg.default_study = j.at("default_study").get<std::string>();
    }
    if (j.contains("mouse_pins")) {
        const auto& p = j.at("mouse_pins");
        if (p.contains("omega_v")) cfg.mouse_omega_v = p.at("omega_v").get<double>();
        if (p.contains("omega_ic50")) cfg.mouse_omega_ic50 = p.at("omega_ic50").get<double>();
        if (p.contains("omega_ke")) cfg.mouse_omega_ke = p.at("omega_ke").get<double>();
        if (p.contains("sigma_c")) cfg.mouse_sigma_c = p.at("sigma_c").get<double>();
    }
    if (j.contains("dose_draws")) cfg.dose_draws = j.at("dose_draws").get<int>();
    if (j.contains("med")) {
        const auto& m = j.at("med");
        if (m.contains("subjects")) cfg.med_mc.n_subjects = m.at("subjects").get<int>();
        if (m.contains("horizon_h")) cfg.med_mc.horizon_h = m.at("horizon_h").get<double>();
    }
    if (j.contains("grid_points")) cfg.grid_points = j.at("grid_points").get<std::size_t>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("scenario_spec")) {
        const auto& s = j.at("scenario_spec");
        predose::ScenarioSpec spec =
            predose::builtin_scenario(s.contains("id") ? s.at("id").get<int>() : cfg.scenario);
        if (s.contains("species")) {
            for (const auto& [name, body] : s.at("species").items()) {
                const auto sp = predose::species_from_string(name);
                spec.truth[sp] = truth_from_json(body, spec.truth.at(sp));
            }
        }
        cfg.scenario_override = spec;
    }
}

json to_json(const predose::RunConfig& cfg) {
    json j;
    j["scenario"] = cfg.scenario;
    j["replications"] = cfg.replications;
    j["seed"] = cfg.seed;
    json targets = json::array();
    for (auto t : cfg.targets) targets.push_back(predose::to_string(t));
    j["targets"] = targets;
    j["estimator"] = predose::to_string(cfg.estimator);
    j["mcmc"] = {
        {"chains", cfg.mcmc.chains},
        {"burn_in", cfg.mcmc.burn_in},
        {"iters", cfg.mcmc.iters},
        {"sampler",
         cfg.mcmc.sampler == predose::McmcConfig::Sampler::hmc ? "hmc" : "mwg"}};
    j["thresholds"] = cfg.thresholds;
    j["default_study"] = cfg.default_study;
    j["mouse_pins"] = {{"omega_v", cfg.mouse_omega_v},
                       {"omega_ic50", cfg.mouse_omega_ic50},
                       {"omega_ke", cfg.mouse_omega_ke},
                       {"sigma_c", cfg.mouse_sigma_c}};
    j["dose_draws"] = cfg.dose_draws;
    j["med"] = {{"subjects", cfg.med_mc.n_subjects}, {"horizon_h", cfg.med_mc.horizon_h}};
    j["grid_points"] = cfg.grid_points;
    j["threads"] = cfg.threads;
    j["out_dir"] = cfg.out_dir;
    return j;
}

// Stage ids mirror run_replication so standalone commands reproduce the
// pipeline's datasets exactly.
int species_stage(predose::Species sp) {
    switch (sp) {
    case predose::Species::mouse: return 0;
    case predose::Species::rat: return 2;
    case predose::Species::dog: return 4;
    default: throw predose::ConfigError("no study design for species human");
    }
}

predose::Dataset simulate_for(const predose::RunConfig& cfg, predose::Species sp,
                              int replication) {
    const auto designs = predose::builtin_designs();
    const auto scenario = cfg.scenario_spec();
    std::vector<predose::Outcome> outcomes = {predose::Outcome::concentration};
    for (auto t : cfg.targets) {
        if (t == predose::DoseTarget::med) {
            outcomes.push_back(predose::Outcome::inhibition);
            break;
        }
    }
    predose::Rng rng = predose::Rng(cfg.seed)
                           .substream(static_cast<std::uint64_t>(replication))
                           .substream(static_cast<std::uint64_t>(species_stage(sp)));
    return predose::simulate_dataset(designs.at(sp), scenario.truth.at(sp), outcomes, rng);
}

} // namespace

extern "C" {

const char* predose_version(void) { return "0.1.0"; }

const char* predose_last_error(void) { return g_last_error.c_str(); }

predose_config* predose_config_create(void) { return new predose_config(); }

predose_config* predose_config_from_json(const char* json_text) {
    if (json_text == nullptr) {
        g_last_error = "config: null JSON text";
        return nullptr;
    }
    auto* cfg = new predose_config();
    const auto status = guarded([&] {
        const json j = json::parse(json_text, nullptr, true, true); // allow comments
        apply_json(cfg->run, j);
    });
    if (status != PREDOSE_OK) {
        delete cfg;
        return nullptr;
    }
    return cfg;
}

void predose_config_free(predose_config* cfg) { delete cfg; }

predose_status predose_config_set(predose_config* cfg, const char* key, const char* value) {
    if (cfg == nullptr || key == nullptr || value == nullptr) {
        return fail(PREDOSE_CONFIG_ERROR, "config_set: null argument");
    }
    return guarded([&] {
        using predose::ConfigError;
        const std::string k(key);
        const std::string v(value);
        auto& run = cfg->run;
        if (k == "scenario") run.scenario = std::stoi(v);
        else if (k == "replications") run.replications = std::stoi(v);
        else if (k == "seed") run.seed = std::stoull(v);
        else if (k == "targets") {
            run.targets.clear();
            std::size_t pos = 0;
            while (pos != std::string::npos) {
                const auto comma = v.find(',', pos);
                const auto item = v.substr(pos, comma == std::string::npos ? comma : comma - pos);
                run.targets.push_back(predose::dose_target_from_string(item));
                pos = comma == std::string::npos ? comma : comma + 1;
            }
        } else if (k == "estimator") run.estimator = predose::estimator_from_string(v);
        else if (k == "threshold.mtd") run.thresholds["mtd"] = std::stod(v);
        else if (k == "threshold.med") run.thresholds["med"] = std::stod(v);
        else if (k == "default_study") run.default_study = v;
        else if (k == "omega_v") run.mouse_omega_v = std::stod(v);
        else if (k == "omega_ic50") run.mouse_omega_ic50 = std::stod(v);
        else if (k == "omega_ke") run.mouse_omega_ke = std::stod(v);
        else if (k == "mouse_sigma_c") run.mouse_sigma_c = std::stod(v);
        else if (k == "dose_draws") run.dose_draws = std::stoi(v);
        else if (k == "med_subjects") run.med_mc.n_subjects = std::stoi(v);
        else if (k == "med_horizon_h") run.med_mc.horizon_h = std::stod(v);
        else if (k == "grid_points") run.grid_points = std::stoul(v);
        else if (k == "threads") run.threads = std::stoi(v);
        else if (k == "out_dir") run.out_dir = v;
        else if (k == "mcmc.chains") run.mcmc.chains = std::stoi(v);
        else if (k == "mcmc.burn_in") run.mcmc.burn_in = std::stoi(v);
        else if (k == "mcmc.iters") run.mcmc.iters = std::stoi(v);
        else if (k == "mcmc.sampler") {
            if (v == "mwg") run.mcmc.sampler = predose::McmcConfig::Sampler::metropolis_within_gibbs;
            else if (v == "hmc") run.mcmc.sampler = predose::McmcConfig::Sampler::hmc;
            else throw ConfigError("config_set: unknown sampler " + v);
        } else if (k == "paper_scale") {
            if (v == "true") {
                run.mcmc.burn_in = 3000;
                run.mcmc.iters = 6000;
                run.replications = 500;
            } else if (v != "false") {
                throw ConfigError("config_set: paper_scale must be true or false");
            }
        } else {
            throw ConfigError("config_set: unknown key " + k);
        }
    });
}

char* predose_config_to_json(const predose_config* cfg) {
    if (cfg == nullptr) {
        g_last_error = "config_to_json: null config";
        return nullptr;
    }
    const std::string text = to_json(cfg->run).dump(2);
    char* out = new char[text.size() + 1];
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

void predose_string_free(char* s) { delete[] s; }

predose_status predose_simulate(const predose_config* cfg, const char* species,
                                const char* out_csv_path) {
    if (cfg == nullptr || species == nullptr || out_csv_path == nullptr) {
        return fail(PREDOSE_CONFIG_ERROR, "simulate: null argument");
    }
    return guarded([&] {
        cfg->run.validate();
        const auto sp = predose::species_from_string(species);
        const auto data = simulate_for(cfg->run, sp, 0);
        std::ofstream os(out_csv_path);
        if (!os) throw predose::IoError(std::string("cannot write ") + out_csv_path);
        data.write_csv(os);
    });
}

predose_status predose_fit(const predose_config* cfg, const char* species,
                           const char* dataset_csv_path, const char* out_draws_csv_path) {
    if (cfg == nullptr || species == nullptr || out_draws_csv_path == nullptr) {
        return fail(PREDOSE_CONFIG_ERROR, "fit: null argument");
    }
    return guarded([&] {
        cfg->run.validate();
        const auto sp = predose::species_from_string(species);
        predose::Dataset data;
        if (dataset_csv_path != nullptr) {
            std::ifstream is(dataset_csv_path);
            if (!is) throw predose::IoError(std::string("cannot read ") + dataset_csv_path);
            data = predose::Dataset::read_csv(is);
        } else {
            data = simulate_for(cfg->run, sp, 0);
        }
        std::vector<predose::Outcome> outcomes = {predose::Outcome::concentration};
        for (auto t : cfg->run.targets) {
            if (t == predose::DoseTarget::med) {
                outcomes.push_back(predose::Outcome::inhibition);
                break;
            }
        }
        const auto designs = predose::builtin_designs();
        const auto pins = sp == predose::Species::mouse ? cfg->run.mouse_pins()
                                                        : std::map<std::string, double>{};
        const auto spec = predose::ModelSpec::standard(designs.at(sp), outcomes, pins);
        const predose::PkModel model(spec, predose::PriorSpec::defaults(), data);

        predose::PosteriorDraws post;
        predose::Rng seed_rng =
            predose::Rng(cfg->run.seed).substream(0).substream(
                static_cast<std::uint64_t>(species_stage(sp) + 1));
        if (cfg->run.estimator == predose::Estimator::bayes) {
            predose::McmcConfig mc = cfg->run.mcmc;
            mc.seed = seed_rng.next_u64();
            post = predose::run_mcmc(model, mc);
        } else {
            predose::HybridConfig hc;
            hc.n_draws = cfg->run.dose_draws;
            hc.seed = seed_rng.next_u64();
            post = predose::hybrid_fit(model, hc).draws;
        }
        std::ofstream os(out_draws_csv_path);
        if (!os) throw predose::IoError(std::string("cannot write ") + out_draws_csv_path);
        post.write_csv(os);
    });
}

predose_status predose_pipeline(const predose_config* cfg, int replication_index,
                                const char* out_dir) {
    if (cfg == nullptr || out_dir == nullptr) {
        return fail(PREDOSE_CONFIG_ERROR, "pipeline: null argument");
    }
    return guarded([&] {
        namespace fs = std::filesystem;
        const auto res = predose::run_replication(cfg->run, replication_index);
        std::error_code ec;
        fs::create_directories(fs::path(out_dir), ec);
        if (ec) throw predose::IoError(std::string("cannot create ") + out_dir);
        {
            std::ofstream os(fs::path(out_dir) /
                             ("replication_" + std::to_string(replication_index) + ".csv"));
            if (!os) throw predose::IoError("cannot write replication csv");
            predose::write_replication_csv(res, os);
        }
        if (res.failed) {
            throw predose::Error("replication failed at stage " + res.stage + ": " + res.error);
        }
        for (const auto& tr : res.targets) {
            const std::string base = "merged_" + predose::to_string(tr.target);
            {
                std::ofstream os(fs::path(out_dir) / (base + ".csv"));
                if (!os) throw predose::IoError("cannot write merged density csv");
                predose::MergedPosterior mp;
                mp.density = tr.merged_density;
                mp.studies = tr.selected;
                mp.summary = tr.merged;
                mp.write_csv(os);
            }
            json summary;
            summary["mean"] = tr.merged.mean;
            summary["median"] = tr.merged.median;
            summary["cri95_lo"] = tr.merged.cri_lo;
            summary["cri95_hi"] = tr.merged.cri_hi;
            summary["studies"] = tr.selected;
            std::ofstream os(fs::path(out_dir) / (base + ".json"));
            if (!os) throw predose::IoError("cannot write merged summary json");
            os << summary.dump(2) << '\n';
        }
    });
}

predose_status predose_campaign(const predose_config* cfg) {
    if (cfg == nullptr) return fail(PREDOSE_CONFIG_ERROR, "campaign: null config");
    return guarded([&] {
        if (cfg->run.out_dir.empty()) {
            throw predose::ConfigError("campaign: out_dir must be set");
        }
        predose::run_campaign(cfg->run);
    });
}

predose_status predose_calibrate_threshold(const predose_config* cfg, const char* scenarios,
                                           const char* target) {
    if (cfg == nullptr || scenarios == nullptr || target == nullptr) {
        return fail(PREDOSE_CONFIG_ERROR, "calibrate_threshold: null argument");
    }
    return guarded([&] {
        std::vector<int> ids;
        std::string buf;
        for (const char* p = scenarios;; ++p) {
            if (*p == ',' || *p == '\0') {
                if (!buf.empty()) ids.push_back(std::stoi(buf));
                buf.clear();
                if (*p == '\0') break;
            } else {
                buf += *p;
            }
        }
        predose::calibrate_threshold(cfg->run, ids,
                                     predose::dose_target_from_string(target));
    });
}

predose_status predose_mtd_analytic(double mu_cl, double omega_cl, double tau_t, double p_t,
                                    double mu_alpha, double omega_alpha, double* out_mtd) {
    if (out_mtd == nullptr) return fail(PREDOSE_CONFIG_ERROR, "mtd_analytic: null output");
    return guarded([&] {
        *out_mtd = predose::mtd_analytic(mu_cl, omega_cl,
                                         {tau_t, p_t, mu_alpha, omega_alpha});
    });
}

predose_status predose_hellinger(const double* a, size_t n_a, const double* b, size_t n_b,
                                 size_t grid_points, double* out_distance) {
    if (a == nullptr || b == nullptr || out_distance == nullptr) {
        return fail(PREDOSE_CONFIG_ERROR, "hellinger: null argument");
    }
    return guarded([&] {
        predose::EmpiricalDraws da{std::vector<double>(a, a + n_a), "a"};
        predose::EmpiricalDraws db{std::vector<double>(b, b + n_b), "b"};
        const double ha = predose::silverman_bandwidth(da.samples);
        const double hb = predose::silverman_bandwidth(db.samples);
        const double pad = 3.0 * std::max(ha, hb);
        double lo = std::min(*std::min_element(da.samples.begin(), da.samples.end()),
                             *std::min_element(db.samples.begin(), db.samples.end())) -
                    pad;
        double hi = std::max(*std::max_element(da.samples.begin(), da.samples.end()),
                             *std::max_element(db.samples.begin(), db.samples.end())) +
                    pad;
        auto pa = predose::kde(da, lo, hi, grid_points, ha);
        auto pb = predose::kde(db, lo, hi, grid_points, hb);
        pa.normalize();
        pb.normalize();
        *out_distance = predose::hellinger(pa, pb);
    });
}

} // extern "C"
