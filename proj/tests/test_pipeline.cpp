#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "predose/errors.hpp"
#include "predose/extrapolate.hpp"
#include "predose/pipeline.hpp"
#include "predose/pkpd.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace predose;

namespace {

// Small, fast settings used by most pipeline tests.
RunConfig quick_config() {
    RunConfig cfg;
    cfg.scenario = 1;
    cfg.replications = 2;
    cfg.seed = 77;
    cfg.mcmc.chains = 2;
    cfg.mcmc.burn_in = 300;
    cfg.mcmc.iters = 600;
    cfg.dose_draws = 400;
    cfg.med_mc.n_subjects = 400;
    cfg.grid_points = 256;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("one replication runs all four steps") {
    const RunConfig cfg = quick_config();
    const auto rep = run_replication(cfg, 0);
    REQUIRE_FALSE(rep.failed);
    REQUIRE(rep.targets.size() == 1);

    const auto& tr = rep.targets.front();
    CHECK(tr.target == DoseTarget::mtd);
    CHECK(tr.distances.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(tr.distances.at(i, i) == 0.0);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(tr.distances.at(i, j) == tr.distances.at(j, i));
        }
    }
    CHECK(!tr.selected.empty());
    CHECK(tr.selected.size() <= 3);
    CHECK(tr.merged.cri_lo < tr.merged.median);
    CHECK(tr.merged.median < tr.merged.cri_hi);
    CHECK(tr.merged_density.integral() == doctest::Approx(1.0).epsilon(1e-6));

    // posterior summaries recorded for every study
    for (auto sp : {Species::mouse, Species::rat, Species::dog}) {
        CHECK(rep.posterior_mean.at(sp).count("mu_cl") == 1);
        CHECK(rep.posterior_mean.at(sp).count("omega_cl") == 1);
    }
    CHECK(rep.posterior_mean.at(Species::mouse).at("omega_v") ==
          doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("near-noise-free replication recovers the theoretical dose") {
    // tight residual error and small variability: the merged estimate must
    // sit within 2% of the deterministic extrapolated value
    RunConfig cfg = quick_config();
    cfg.mcmc.burn_in = 500;
    cfg.mcmc.iters = 1000;
    ScenarioSpec sc = builtin_scenario(1);
    for (auto& [sp, truth] : sc.truth) {
        truth.pop.omega_cl = 0.1;
        truth.pop.omega_v = 0.1;
        truth.sigma_c = 0.01;
    }
    cfg.scenario_override = sc;
    cfg.mouse_omega_v = 0.1;

    const auto rep = run_replication(cfg, 1);
    REQUIRE_FALSE(rep.failed);

    const auto& human = sc.truth.at(Species::human);
    const double theoretical =
        mtd_analytic(human.pop.mu_cl, human.pop.omega_cl, human.toxicity);
    const double merged = rep.result_for(DoseTarget::mtd).merged.mean;
    CHECK(std::abs(merged - theoretical) / theoretical <= 0.02);
}

TEST_CASE("campaign aggregates and is deterministic across thread counts") {
    RunConfig cfg = quick_config();
    cfg.replications = 4;

    RunConfig serial = cfg;
    serial.threads = 1;
    RunConfig parallel = cfg;
    parallel.threads = 4;

    const auto a = run_campaign(serial);
    const auto b = run_campaign(parallel);
    REQUIRE(a.replications.size() == 4);
    REQUIRE(b.replications.size() == 4);
    CHECK(a.n_failed == 0);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a.replications[i].result_for(DoseTarget::mtd).merged.mean ==
              b.replications[i].result_for(DoseTarget::mtd).merged.mean);
        CHECK(a.replications[i].result_for(DoseTarget::mtd).distances.values ==
              b.replications[i].result_for(DoseTarget::mtd).distances.values);
    }

    SUBCASE("repeated runs are bit-identical") {
        const auto c = run_campaign(serial);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(c.replications[i].result_for(DoseTarget::mtd).merged.mean ==
                  a.replications[i].result_for(DoseTarget::mtd).merged.mean);
        }
    }
}

TEST_CASE("campaign writes the documented output files") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "predose_test_campaign";
    fs::remove_all(dir);

    RunConfig cfg = quick_config();
    cfg.replications = 1;
    cfg.out_dir = dir.string();
    const auto camp = run_campaign(cfg);
    REQUIRE(camp.n_failed == 0);

    CHECK(fs::exists(dir / "replication_0.csv"));
    CHECK(fs::exists(dir / "distances.csv"));
    CHECK(fs::exists(dir / "aggregate.json"));

    SUBCASE("single-replication aggregate equals the replication") {
        const auto agg = nlohmann::json::parse(slurp(dir / "aggregate.json"));
        const double merged_mean = agg["targets"]["mtd"]["merged_mean"]["mean"];
        CHECK(merged_mean ==
              doctest::Approx(camp.replications[0].result_for(DoseTarget::mtd).merged.mean)
                  .epsilon(1e-12));
        CHECK(agg["replications"] == 1);
        CHECK(agg["failed"] == 0);
    }

    SUBCASE("replication csv carries the per-target summary keys") {
        const auto text = slurp(dir / "replication_0.csv");
        CHECK(text.find("target.mtd.selected,") != std::string::npos);
        CHECK(text.find("target.mtd.merged.cri95_length,") != std::string::npos);
        CHECK(text.find("target.mtd.dog_only.cri95_length,") != std::string::npos);
        CHECK(text.find("posterior.mouse.mu_cl.mean,") != std::string::npos);
    }

    fs::remove_all(dir);
}

TEST_CASE("a tiny selection threshold leaves only the default study") {
    RunConfig cfg = quick_config();
    cfg.replications = 1;
    cfg.thresholds["mtd"] = 0.001;
    const auto rep = run_replication(cfg, 0);
    REQUIRE_FALSE(rep.failed);
    const auto& tr = rep.result_for(DoseTarget::mtd);
    CHECK(tr.selected == std::vector<std::string>{"dog"});
    // singleton-selection consistency: merged result equals the baseline
    CHECK(tr.merged.mean == doctest::Approx(tr.dog_only.mean).epsilon(1e-12));
    CHECK(tr.merged.cri_lo == doctest::Approx(tr.dog_only.cri_lo).epsilon(1e-12));
    CHECK(tr.merged.cri_hi == doctest::Approx(tr.dog_only.cri_hi).epsilon(1e-12));
}

TEST_CASE("stage failures are isolated and reported") {
    RunConfig cfg = quick_config();
    cfg.targets = {DoseTarget::med};
    cfg.replications = 2;
    // dose bracket capped far below any effective dose: the med search
    // cannot find a crossing and that stage must fail
    cfg.med_mc.bracket_hi = 0.05;

    const auto rep = run_replication(cfg, 0);
    CHECK(rep.failed);
    CHECK(rep.stage == "med-doses");
    CHECK_FALSE(rep.error.empty());

    SUBCASE("campaigns with too many failures raise a campaign error") {
        CHECK_THROWS_AS(run_campaign(cfg), CampaignError);
    }
}

TEST_CASE("config validation catches bad settings") {
    RunConfig cfg = quick_config();
    cfg.scenario = 9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = quick_config();
    cfg.thresholds["mtd"] = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = quick_config();
    cfg.default_study = "human";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = quick_config();
    cfg.targets = {};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = quick_config();
    cfg.replications = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = quick_config();
    cfg.targets = {DoseTarget::mtd, DoseTarget::mtd};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("scenario 3 separates the targets: rat fails efficacy, passes toxicity") {
    RunConfig cfg = quick_config();
    cfg.scenario = 3;
    cfg.replications = 2;
    cfg.targets = {DoseTarget::mtd, DoseTarget::med};
    cfg.dose_draws = 300;
    cfg.med_mc.n_subjects = 300;

    const auto camp = run_campaign(cfg);
    REQUIRE(camp.n_failed == 0);
    for (const auto& rep : camp.replications) {
        const auto& med = rep.result_for(DoseTarget::med);
        // the rat potency is wrong in scenario 3: its med distances saturate
        CHECK(med.distances.between("mouse", "rat") > 0.5);
        CHECK(med.distances.between("rat", "dog") > 0.5);
        CHECK(std::find(med.selected.begin(), med.selected.end(), "rat") ==
              med.selected.end());
        // toxicity is unaffected: the rat stays in the running for the mtd
        const auto& mtd = rep.result_for(DoseTarget::mtd);
        CHECK(mtd.distances.between("rat", "dog") < med.distances.between("rat", "dog"));
        // merged med sits in the plausible mouse/dog range
        CHECK(med.merged.mean > 20.0);
        CHECK(med.merged.mean < 150.0);
    }
}

TEST_CASE("commensurability truth labels") {
    // MTD: scenarios 1 and 3 label every pair positive
    for (int sc : {1, 3}) {
        CHECK(true_label(DoseTarget::mtd, sc, "mouse", "rat") == 1);
        CHECK(true_label(DoseTarget::mtd, sc, "mouse", "dog") == 1);
        CHECK(true_label(DoseTarget::mtd, sc, "rat", "dog") == 1);
    }
    // MTD scenario 2: only mouse-dog positive
    CHECK(true_label(DoseTarget::mtd, 2, "mouse", "rat") == 0);
    CHECK(true_label(DoseTarget::mtd, 2, "mouse", "dog") == 1);
    CHECK(true_label(DoseTarget::mtd, 2, "rat", "dog") == 0);
    CHECK(true_label(DoseTarget::mtd, 4, "rat", "dog") == 0);
    // MED: scenario 2 is unusable, scenarios 3-4 keep mouse-dog
    CHECK_FALSE(true_label(DoseTarget::med, 2, "mouse", "dog").has_value());
    CHECK(true_label(DoseTarget::med, 1, "rat", "dog") == 1);
    CHECK(true_label(DoseTarget::med, 3, "mouse", "dog") == 1);
    CHECK(true_label(DoseTarget::med, 3, "mouse", "rat") == 0);
    CHECK(true_label(DoseTarget::med, 4, "rat", "dog") == 0);
}

TEST_CASE("threshold calibration pools scenarios") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "predose_test_calibration";
    fs::remove_all(dir);

    RunConfig cfg = quick_config();
    cfg.replications = 3;
    cfg.out_dir = dir.string();
    const auto report = calibrate_threshold(cfg, {1, 2}, DoseTarget::mtd);

    CHECK(report.scenarios == std::vector<int>{1, 2});
    CHECK(report.n_points == 2 * 3 * 3); // scenarios x replications x pairs
    REQUIRE(report.curve.size() == 50);
    const double acc_at_01 = report.curve[9].second;
    const double acc_at_05 = report.curve[49].second;
    CHECK(acc_at_05 >= acc_at_01);
    CHECK(fs::exists(dir / "threshold_curve.csv"));

    const auto text = slurp(dir / "threshold_curve.csv");
    CHECK(text.rfind("target,tau,accuracy\n", 0) == 0);
    fs::remove_all(dir);

    SUBCASE("med calibration cannot use scenario 2 alone") {
        CHECK_THROWS_AS(calibrate_threshold(cfg, {2}, DoseTarget::med), ConfigError);
    }
}
