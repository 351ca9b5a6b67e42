// Command-line front end. Talks to the library exclusively through the C
// API in predose/predose.h.

#include "predose/predose.h"

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>

namespace {

struct ConfigDeleter {
    void operator()(predose_config* cfg) const { predose_config_free(cfg); }
};
using ConfigPtr = std::unique_ptr<predose_config, ConfigDeleter>;

int exit_code(predose_status status) {
    switch (status) {
    case PREDOSE_OK: return 0;
    case PREDOSE_CONFIG_ERROR: return 2;
    case PREDOSE_CAMPAIGN_ERROR: return 3;
    default: return 1;
    }
}

int finish(predose_status status) {
    if (status != PREDOSE_OK) {
        std::fprintf(stderr, "error: %s\n", predose_last_error());
    }
    return exit_code(status);
}

// Common flags shared by every subcommand; applied to the config handle
// only when the user set them.
struct CommonOpts {
    std::string config_file;
    int scenario = 0;
    std::string targets;
    std::uint64_t seed = 0;
    int reps = 0;
    std::string estimator;
    double threshold_mtd = -1.0;
    double threshold_med = -1.0;
    double omega_v = 0.0;
    bool paper_scale = false;
    std::string out;
    int threads = -1;
    std::string sampler;
    int chains = 0;
    int burn_in = -1;
    int iters = 0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "JSON configuration file");
        cmd->add_option("--scenario", scenario, "Scenario id (1-4)");
        cmd->add_option("--target", targets, "Dose targets: mtd, med or mtd,med");
        cmd->add_option("--seed", seed, "Master seed");
        cmd->add_option("--reps", reps, "Number of replications");
        cmd->add_option("--estimator", estimator, "Estimator: bayes or hybrid");
        cmd->add_option("--threshold", threshold_mtd, "Hellinger threshold for MTD");
        cmd->add_option("--threshold-med", threshold_med, "Hellinger threshold for MED");
        cmd->add_option("--omega-v", omega_v, "Assumed mouse omega_V (0.4, 0.7 or 1.0)")
            ->check(CLI::IsMember({0.4, 0.7, 1.0}));
        cmd->add_flag("--paper-scale", paper_scale,
                      "Paper-scale settings (500 replications, 3000+6000 MCMC)");
        cmd->add_option("--out", out, "Output directory");
        cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
        cmd->add_option("--sampler", sampler, "MCMC sampler: mwg or hmc");
        cmd->add_option("--chains", chains, "MCMC chains");
        cmd->add_option("--burn-in", burn_in, "MCMC burn-in iterations");
        cmd->add_option("--iters", iters, "MCMC kept iterations");
    }

    // returns a configured handle or nullptr (error already printed)
    ConfigPtr build() const {
        ConfigPtr cfg;
        if (!config_file.empty()) {
            std::FILE* f = std::fopen(config_file.c_str(), "rb");
            if (f == nullptr) {
                std::fprintf(stderr, "error: cannot open %s\n", config_file.c_str());
                return nullptr;
            }
            std::string text;
            char buf[4096];
            std::size_t n;
            while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
            std::fclose(f);
            cfg.reset(predose_config_from_json(text.c_str()));
        } else {
            cfg.reset(predose_config_create());
        }
        if (!cfg) {
            std::fprintf(stderr, "error: %s\n", predose_last_error());
            return nullptr;
        }
        const auto set = [&](const char* key, const std::string& value) {
            if (predose_config_set(cfg.get(), key, value.c_str()) != PREDOSE_OK) {
                std::fprintf(stderr, "error: %s\n", predose_last_error());
                cfg.reset();
            }
        };
        if (cfg && paper_scale) set("paper_scale", "true");
        if (cfg && scenario > 0) set("scenario", std::to_string(scenario));
        if (cfg && !targets.empty()) set("targets", targets);
        if (cfg && seed > 0) set("seed", std::to_string(seed));
        if (cfg && reps > 0) set("replications", std::to_string(reps));
        if (cfg && !estimator.empty()) set("estimator", estimator);
        if (cfg && threshold_mtd >= 0.0) set("threshold.mtd", std::to_string(threshold_mtd));
        if (cfg && threshold_med >= 0.0) set("threshold.med", std::to_string(threshold_med));
        if (cfg && omega_v > 0.0) {
            set("omega_v", std::to_string(omega_v));
            set("omega_ic50", std::to_string(omega_v));
            set("omega_ke", std::to_string(omega_v));
        }
        if (cfg && !out.empty()) set("out_dir", out);
        if (cfg && threads >= 0) set("threads", std::to_string(threads));
        if (cfg && !sampler.empty()) set("mcmc.sampler", sampler);
        if (cfg && chains > 0) set("mcmc.chains", std::to_string(chains));
        if (cfg && burn_in >= 0) set("mcmc.burn_in", std::to_string(burn_in));
        if (cfg && iters > 0) set("mcmc.iters", std::to_string(iters));
        return cfg;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Preclinical-to-human dose prediction pipeline"};
    app.require_subcommand(1);

    CommonOpts sim_opts, fit_opts, pipe_opts, camp_opts, cal_opts;

    auto* sim = app.add_subcommand("simulate", "Simulate one study dataset");
    std::string sim_species = "rat";
    std::string sim_out = "dataset.csv";
    sim->add_option("--species", sim_species, "mouse, rat or dog")->required();
    sim->add_option("--data-out", sim_out, "Output CSV path");
    sim_opts.add_to(sim);

    auto* fit = app.add_subcommand("fit", "Fit one study and dump posterior draws");
    std::string fit_species = "rat";
    std::string fit_data;
    std::string fit_out = "draws.csv";
    fit->add_option("--species", fit_species, "mouse, rat or dog")->required();
    fit->add_option("--data", fit_data, "Input dataset CSV (simulated when omitted)");
    fit->add_option("--draws-out", fit_out, "Output draws CSV path");
    fit_opts.add_to(fit);

    auto* pipe = app.add_subcommand("pipeline", "Run one full pipeline replication");
    int pipe_rep = 0;
    pipe->add_option("--replication", pipe_rep, "Replication index");
    pipe_opts.add_to(pipe);

    auto* camp = app.add_subcommand("campaign", "Run a replication campaign");
    camp_opts.add_to(camp);

    auto* cal = app.add_subcommand("calibrate-threshold",
                                   "Accuracy-versus-threshold calibration");
    std::string cal_scenarios = "1,2";
    std::string cal_target = "mtd";
    cal->add_option("--scenarios", cal_scenarios, "Comma-separated scenario ids");
    cal->add_option("--calibrate-target", cal_target, "mtd or med");
    cal_opts.add_to(cal);

    CLI11_PARSE(app, argc, argv);

    if (sim->parsed()) {
        auto cfg = sim_opts.build();
        if (!cfg) return 2;
        return finish(predose_simulate(cfg.get(), sim_species.c_str(), sim_out.c_str()));
    }
    if (fit->parsed()) {
        auto cfg = fit_opts.build();
        if (!cfg) return 2;
        return finish(predose_fit(cfg.get(), fit_species.c_str(),
                                  fit_data.empty() ? nullptr : fit_data.c_str(),
                                  fit_out.c_str()));
    }
    if (pipe->parsed()) {
        auto cfg = pipe_opts.build();
        if (!cfg) return 2;
        const std::string dir = pipe_opts.out.empty() ? "out/pipeline" : pipe_opts.out;
        return finish(predose_pipeline(cfg.get(), pipe_rep, dir.c_str()));
    }
    if (camp->parsed()) {
        auto cfg = camp_opts.build();
        if (!cfg) return 2;
        if (camp_opts.out.empty() &&
            predose_config_set(cfg.get(), "out_dir", "out/campaign") != PREDOSE_OK) {
            std::fprintf(stderr, "error: %s\n", predose_last_error());
            return 2;
        }
        return finish(predose_campaign(cfg.get()));
    }
    if (cal->parsed()) {
        auto cfg = cal_opts.build();
        if (!cfg) return 2;
        if (cal_opts.out.empty() &&
            predose_config_set(cfg.get(), "out_dir", "out/calibration") != PREDOSE_OK) {
            std::fprintf(stderr, "error: %s\n", predose_last_error());
            return 2;
        }
        return finish(predose_calibrate_threshold(cfg.get(), cal_scenarios.c_str(),
                                                  cal_target.c_str()));
    }
    return 0;
}
