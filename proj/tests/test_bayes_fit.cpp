#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "predose/errors.hpp"
#include "predose/extrapolate.hpp"
#include "predose/mcmc.hpp"
#include "predose/model.hpp"
#include "predose/stats.hpp"
#include "predose/study.hpp"
#include "testutil.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace predose;

namespace {

constexpr double kLogSqrt2Pi = 0.9189385332046727418;

double ref_norm_lpdf(double y, double m, double s) {
    const double z = (y - m) / s;
    return -std::log(s) - kLogSqrt2Pi - 0.5 * z * z;
}

double ref_half_t_log_prior(double u, double df, double scale) {
    // density of the half-t evaluated at exp(u), plus the log-scale Jacobian
    const double x = std::exp(u);
    const double z = x / scale;
    const double t_lpdf = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                          0.5 * std::log(df * 3.14159265358979323846) -
                          0.5 * (df + 1.0) * std::log1p(z * z / df);
    return std::log(2.0) + t_lpdf - std::log(scale) + u;
}

double ref_conc(double t, double dose, double ka, double cl, double v) {
    const double k = cl / v;
    return dose / v * ka / (ka - k) * (std::exp(-k * t) - std::exp(-ka * t));
}

Dataset toy_dataset() {
    Dataset ds;
    const auto add = [&](int id, double dose, double t, Outcome oc, double value) {
        Observation r;
        r.subject_id = id;
        r.species = Species::mouse;
        r.dose_mgkg = dose / 0.025;
        r.dose_mg = dose;
        r.time_h = t;
        r.outcome = oc;
        r.value = value;
        ds.records.push_back(r);
    };
    add(1, 2.5, 1.0, Outcome::concentration, 6.2);
    add(1, 2.5, 4.0, Outcome::concentration, 2.9);
    add(2, 7.5, 2.0, Outcome::concentration, 14.8);
    return ds;
}

ModelSpec mouse_style_spec() {
    ModelSpec spec;
    spec.outcomes = {Outcome::concentration};
    spec.random_effects = {ReKind::cl};
    spec.fixed = {{"omega_v", 0.7}};
    return spec;
}

// Conjugate toy: y_i ~ N(mu, sigma^2) with known sigma, mu ~ N(m0, s0^2).
class NormalMeanTarget final : public SamplerTarget {
public:
    NormalMeanTarget(std::vector<double> y, double sigma, double m0, double s0)
        : y_(std::move(y)), sigma_(sigma), m0_(m0), s0_(s0) {}

    [[nodiscard]] int dim() const override { return 1; }
    [[nodiscard]] int n_leading_reported() const override { return 1; }
    double log_density(std::span<const double> theta) const override {
        const double mu = theta[0];
        double lp = ref_norm_lpdf(mu, m0_, s0_);
        for (double y : y_) lp += ref_norm_lpdf(y, mu, sigma_);
        return lp;
    }
    void gradient(std::span<const double> theta, std::span<double> out) const override {
        const double mu = theta[0];
        double g = -(mu - m0_) / (s0_ * s0_);
        for (double y : y_) g += (y - mu) / (sigma_ * sigma_);
        out[0] = g;
    }
    [[nodiscard]] std::vector<double> initial_point(Rng& rng) const override {
        return {m0_ + rng.normal()};
    }
    [[nodiscard]] std::vector<std::string> reported_names() const override { return {"mu"}; }
    [[nodiscard]] std::vector<double>
    reported_values(std::span<const double> theta) const override {
        return {theta[0]};
    }

    [[nodiscard]] double posterior_mean() const {
        const double n = static_cast<double>(y_.size());
        const double prec = 1.0 / (s0_ * s0_) + n / (sigma_ * sigma_);
        const double sum = std::accumulate(y_.begin(), y_.end(), 0.0);
        return (m0_ / (s0_ * s0_) + sum / (sigma_ * sigma_)) / prec;
    }
    [[nodiscard]] double posterior_sd() const {
        const double n = static_cast<double>(y_.size());
        return 1.0 / std::sqrt(1.0 / (s0_ * s0_) + n / (sigma_ * sigma_));
    }

private:
    std::vector<double> y_;
    double sigma_, m0_, s0_;
};

class NeverFiniteTarget final : public SamplerTarget {
public:
    [[nodiscard]] int dim() const override { return 1; }
    [[nodiscard]] int n_leading_reported() const override { return 1; }
    double log_density(std::span<const double>) const override {
        return -std::numeric_limits<double>::infinity();
    }
    void gradient(std::span<const double>, std::span<double> out) const override {
        out[0] = 0.0;
    }
    [[nodiscard]] std::vector<double> initial_point(Rng&) const override { return {0.0}; }
    [[nodiscard]] std::vector<std::string> reported_names() const override { return {"x"}; }
    [[nodiscard]] std::vector<double>
    reported_values(std::span<const double> theta) const override {
        return {theta[0]};
    }
};

} // namespace

TEST_CASE("log joint matches a hand-summed evaluation") {
    const PkModel model(mouse_style_spec(), PriorSpec::defaults(), toy_dataset());
    const auto& layout = model.layout();
    REQUIRE(layout.n_subjects == 2);

    std::vector<double> theta(static_cast<std::size_t>(layout.dim()));
    theta[static_cast<std::size_t>(layout.pop_index("ka"))] = std::log(1.8);
    theta[static_cast<std::size_t>(layout.pop_index("mu_cl"))] = std::log(0.12);
    theta[static_cast<std::size_t>(layout.pop_index("mu_v"))] = std::log(0.05);
    theta[static_cast<std::size_t>(layout.pop_index("omega_cl"))] = std::log(0.6);
    theta[static_cast<std::size_t>(layout.pop_index("sigma_c"))] = std::log(0.25);
    theta[static_cast<std::size_t>(layout.re_index(ReKind::cl, 0))] = std::log(0.10);
    theta[static_cast<std::size_t>(layout.re_index(ReKind::cl, 1))] = std::log(0.16);

    // independent recomputation
    double expected = 0.0;
    expected += ref_norm_lpdf(std::log(1.8), -1.0, 2.5);
    expected += ref_norm_lpdf(std::log(0.12), -1.0, 2.5);
    expected += ref_norm_lpdf(std::log(0.05), -1.0, 2.5);
    expected += ref_half_t_log_prior(std::log(0.6), 3.0, 2.8);
    expected += ref_half_t_log_prior(std::log(0.25), 3.0, 2.8);
    expected += ref_norm_lpdf(std::log(0.10), std::log(0.12), 0.6);
    expected += ref_norm_lpdf(std::log(0.16), std::log(0.12), 0.6);
    expected += ref_norm_lpdf(std::log(6.2),
                              std::log(ref_conc(1.0, 2.5, 1.8, 0.10, 0.05)), 0.25);
    expected += ref_norm_lpdf(std::log(2.9),
                              std::log(ref_conc(4.0, 2.5, 1.8, 0.10, 0.05)), 0.25);
    expected += ref_norm_lpdf(std::log(14.8),
                              std::log(ref_conc(2.0, 7.5, 1.8, 0.16, 0.05)), 0.25);

    CHECK(log_joint(model, theta) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(log_joint(model, theta) - expected) <= 1e-10);
}

TEST_CASE("log joint with an empty dataset is the prior alone") {
    const PkModel model(mouse_style_spec(), PriorSpec::defaults(), Dataset{});
    REQUIRE(model.layout().n_subjects == 0);
    std::vector<double> theta(static_cast<std::size_t>(model.layout().dim()), -0.5);
    double expected = 0.0;
    expected += ref_norm_lpdf(-0.5, -1.0, 2.5) * 3.0; // ka, mu_cl, mu_v
    expected += ref_half_t_log_prior(-0.5, 3.0, 2.8) * 2.0; // omega_cl, sigma_c
    CHECK(log_joint(model, theta) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("log joint penalizes inflating sigma at a perfect fit") {
    auto truth = builtin_scenario(1).truth.at(Species::rat);
    truth.pop.omega_cl = 0.0;
    truth.pop.omega_v = 0.0;
    truth.sigma_c = 0.0;
    StudyDesign design = builtin_designs().at(Species::rat);
    design.n_per_dose = 2;
    Rng rng(9);
    const auto data = simulate_dataset(design, truth, {Outcome::concentration}, rng);

    ModelSpec spec;
    spec.outcomes = {Outcome::concentration};
    spec.random_effects = {ReKind::cl, ReKind::v};
    const PkModel model(spec, PriorSpec::defaults(), data);
    const auto& layout = model.layout();

    std::vector<double> theta(static_cast<std::size_t>(layout.dim()));
    theta[static_cast<std::size_t>(layout.pop_index("ka"))] = std::log(truth.pop.ka);
    theta[static_cast<std::size_t>(layout.pop_index("mu_cl"))] = std::log(truth.pop.mu_cl);
    theta[static_cast<std::size_t>(layout.pop_index("mu_v"))] = std::log(truth.pop.mu_v);
    theta[static_cast<std::size_t>(layout.pop_index("omega_cl"))] = std::log(0.3);
    theta[static_cast<std::size_t>(layout.pop_index("omega_v"))] = std::log(0.3);
    for (int i = 0; i < layout.n_subjects; ++i) {
        theta[static_cast<std::size_t>(layout.re_index(ReKind::cl, i))] =
            std::log(truth.pop.mu_cl);
        theta[static_cast<std::size_t>(layout.re_index(ReKind::v, i))] =
            std::log(truth.pop.mu_v);
    }
    auto narrow = theta, wide = theta;
    narrow[static_cast<std::size_t>(layout.pop_index("sigma_c"))] = std::log(0.2);
    wide[static_cast<std::size_t>(layout.pop_index("sigma_c"))] = std::log(0.4);
    CHECK(log_joint(model, narrow) > log_joint(model, wide));
}

TEST_CASE("log joint is invariant under dataset row permutation") {
    StudyDesign design = builtin_designs().at(Species::rat);
    design.n_per_dose = 1; // 5 subjects
    auto truth = builtin_scenario(1).truth.at(Species::rat);
    Rng rng(11);
    const auto data = simulate_dataset(design, truth,
                                       {Outcome::concentration, Outcome::inhibition}, rng);

    ModelSpec spec;
    spec.outcomes = {Outcome::concentration, Outcome::inhibition};
    spec.random_effects = {ReKind::cl, ReKind::v, ReKind::ic50, ReKind::ke};
    const PkModel m1(spec, PriorSpec::defaults(), data);
    Rng init(15);
    const auto theta = m1.initial_point(init);
    const double base = m1.log_density(theta);
    REQUIRE(std::isfinite(base));

    SUBCASE("rows permuted within subjects") {
        Dataset within = data;
        Rng shuffle(13);
        std::size_t start = 0;
        while (start < within.records.size()) {
            std::size_t end = start + 1;
            while (end < within.records.size() &&
                   within.records[end].subject_id == within.records[start].subject_id) {
                ++end;
            }
            for (std::size_t i = end - start; i > 1; --i) {
                const auto j = static_cast<std::size_t>(
                    shuffle.uniform() * static_cast<double>(i));
                std::swap(within.records[start + i - 1], within.records[start + j]);
            }
            start = end;
        }
        const PkModel m2(spec, PriorSpec::defaults(), within);
        CHECK(m2.log_density(theta) == doctest::Approx(base).epsilon(1e-12));
        CHECK(std::abs(m2.log_density(theta) - base) <= 1e-9);
    }

    SUBCASE("subject blocks reordered, parameters remapped") {
        // move the last subject's rows to the front; its random effects
        // then live in slot 0 of the rebuilt model
        Dataset rotated;
        const int last_id = data.records.back().subject_id;
        for (const auto& r : data.records) {
            if (r.subject_id == last_id) rotated.records.push_back(r);
        }
        for (const auto& r : data.records) {
            if (r.subject_id != last_id) rotated.records.push_back(r);
        }
        const PkModel m2(spec, PriorSpec::defaults(), rotated);
        const int n = m1.layout().n_subjects;
        std::vector<double> theta2 = theta;
        for (ReKind k : spec.random_effects) {
            // old order (0,...,n-1) becomes (n-1,0,...,n-2)
            theta2[static_cast<std::size_t>(m2.layout().re_index(k, 0))] =
                theta[static_cast<std::size_t>(m1.layout().re_index(k, n - 1))];
            for (int i = 1; i < n; ++i) {
                theta2[static_cast<std::size_t>(m2.layout().re_index(k, i))] =
                    theta[static_cast<std::size_t>(m1.layout().re_index(k, i - 1))];
            }
        }
        CHECK(m2.log_density(theta2) == doctest::Approx(base).epsilon(1e-12));
        CHECK(std::abs(m2.log_density(theta2) - base) <= 1e-9);
    }
}

TEST_CASE("log joint returns -inf outside the support") {
    const PkModel model(mouse_style_spec(), PriorSpec::defaults(), toy_dataset());
    std::vector<double> theta(static_cast<std::size_t>(model.layout().dim()), 0.0);
    theta[0] = std::numeric_limits<double>::infinity();
    CHECK(model.log_density(theta) == -std::numeric_limits<double>::infinity());
    theta[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK(model.log_density(theta) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("analytic gradient matches finite differences") {
    const auto designs = builtin_designs();
    auto truth = builtin_scenario(1).truth.at(Species::rat);
    StudyDesign design = designs.at(Species::rat);
    design.n_per_dose = 1; // 5 subjects
    Rng rng(21);
    const auto data = simulate_dataset(design, truth,
                                       {Outcome::concentration, Outcome::inhibition}, rng);

    ModelSpec spec;
    spec.outcomes = {Outcome::concentration, Outcome::inhibition};
    spec.random_effects = {ReKind::cl, ReKind::v, ReKind::ic50, ReKind::ke};
    const PkModel model(spec, PriorSpec::defaults(), data);

    Rng init(23);
    auto theta = model.initial_point(init);
    for (auto& t : theta) t += 0.05 * init.normal();

    std::vector<double> grad(theta.size());
    model.gradient(theta, grad);
    const double base = model.log_density(theta);
    REQUIRE(std::isfinite(base));
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
        auto up = theta, dn = theta;
        up[j] += h;
        dn[j] -= h;
        const double fd = (model.log_density(up) - model.log_density(dn)) / (2.0 * h);
        CHECK(grad[j] == doctest::Approx(fd).epsilon(5e-5));
    }
}

TEST_CASE("gibbs evaluator deltas agree with full recomputation") {
    const auto designs = builtin_designs();
    auto truth = builtin_scenario(1).truth.at(Species::dog);
    StudyDesign design = designs.at(Species::dog);
    design.n_per_dose = 2;
    Rng rng(27);
    const auto data = simulate_dataset(design, truth,
                                       {Outcome::concentration, Outcome::inhibition}, rng);
    ModelSpec spec;
    spec.outcomes = {Outcome::concentration, Outcome::inhibition};
    spec.random_effects = {ReKind::cl, ReKind::v, ReKind::ic50, ReKind::ke};
    const PkModel model(spec, PriorSpec::defaults(), data);

    Rng init(29);
    auto theta = model.initial_point(init);
    auto eval = model.make_evaluator(theta);
    CHECK(eval->log_density() == doctest::Approx(model.log_density(theta)).epsilon(1e-10));

    Rng prop(31);
    for (int step = 0; step < 300; ++step) {
        const int j = static_cast<int>(prop.uniform() * static_cast<double>(theta.size()));
        const double x = theta[static_cast<std::size_t>(j)] + 0.3 * prop.normal();
        const double delta = eval->delta(j, x);
        auto moved = theta;
        moved[static_cast<std::size_t>(j)] = x;
        const double expected = model.log_density(moved) - model.log_density(theta);
        CHECK(delta == doctest::Approx(expected).epsilon(1e-8));
        if (prop.uniform() < 0.5) {
            eval->commit();
            theta = moved;
        }
    }
    CHECK(eval->log_density() == doctest::Approx(model.log_density(theta)).epsilon(1e-8));

    SUBCASE("destructive design with fixed-effect pd parameters") {
        StudyDesign mouse = builtin_designs().at(Species::mouse);
        mouse.n_per_dose = 5;
        auto mouse_truth = builtin_scenario(1).truth.at(Species::mouse);
        Rng mrng(37);
        const auto mdata = simulate_dataset(mouse, mouse_truth,
                                            {Outcome::concentration, Outcome::inhibition},
                                            mrng);
        const auto mspec = ModelSpec::standard(
            mouse, {Outcome::concentration, Outcome::inhibition},
            {{"omega_v", 0.7}, {"omega_ic50", 0.7}, {"omega_ke", 0.7}, {"sigma_c", 0.2}});
        const PkModel mmodel(mspec, PriorSpec::defaults(), mdata);

        Rng minit(39);
        auto mtheta = mmodel.initial_point(minit);
        auto meval = mmodel.make_evaluator(mtheta);
        Rng mprop(41);
        for (int step = 0; step < 200; ++step) {
            const int j =
                static_cast<int>(mprop.uniform() * static_cast<double>(mtheta.size()));
            const double x = mtheta[static_cast<std::size_t>(j)] + 0.3 * mprop.normal();
            const double delta = meval->delta(j, x);
            auto moved = mtheta;
            moved[static_cast<std::size_t>(j)] = x;
            const double expected =
                mmodel.log_density(moved) - mmodel.log_density(mtheta);
            CHECK(delta == doctest::Approx(expected).epsilon(1e-8));
            if (mprop.uniform() < 0.5) {
                meval->commit();
                mtheta = moved;
            }
        }
        CHECK(meval->log_density() ==
              doctest::Approx(mmodel.log_density(mtheta)).epsilon(1e-8));
    }
}

TEST_CASE("gelman rubin diagnostic") {
    SUBCASE("well-mixed chains sit near one") {
        Rng rng(33);
        std::vector<std::vector<double>> chains(3);
        for (auto& c : chains) {
            c.resize(3000);
            for (auto& x : c) x = rng.normal();
        }
        const double rhat = gelman_rubin(chains);
        CHECK(rhat >= 0.99);
        CHECK(rhat <= 1.02);
    }

    SUBCASE("separated chains blow up, matching the formula") {
        Rng rng(35);
        std::vector<std::vector<double>> chains(2);
        for (int c = 0; c < 2; ++c) {
            chains[static_cast<std::size_t>(c)].resize(2000);
            for (auto& x : chains[static_cast<std::size_t>(c)]) {
                x = 10.0 * c + rng.normal();
            }
        }
        const double rhat = gelman_rubin(chains);
        CHECK(rhat > 3.0);

        // independent evaluation of the split-chain formula
        std::vector<std::vector<double>> seqs;
        for (const auto& c : chains) {
            seqs.emplace_back(c.begin(), c.begin() + 1000);
            seqs.emplace_back(c.begin() + 1000, c.end());
        }
        double w = 0.0;
        std::vector<double> means;
        for (const auto& s : seqs) {
            const auto ms = empirical_mean_sd(s);
            means.push_back(ms.mean);
            w += ms.sd * ms.sd;
        }
        w /= static_cast<double>(seqs.size());
        const double b_over_n = empirical_mean_sd(means).sd * empirical_mean_sd(means).sd;
        const double expected = std::sqrt((999.0 / 1000.0 * w + b_over_n) / w);
        CHECK(rhat == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("input validation") {
        CHECK_THROWS_AS(gelman_rubin({std::vector<double>(100, 0.5)}), DomainError);
        std::vector<std::vector<double>> flat(2, std::vector<double>(100, 1.0));
        CHECK_THROWS_AS(gelman_rubin(flat), DegenerateSampleError);
    }
}

TEST_CASE("sampler recovers a conjugate normal-mean posterior") {
    Rng gen(37);
    std::vector<double> y(20);
    for (auto& v : y) v = 5.0 + 2.0 * gen.normal();
    const NormalMeanTarget toy(y, 2.0, 0.0, 10.0);

    McmcConfig cfg;
    cfg.chains = 3;
    cfg.burn_in = 1000;
    cfg.iters = 3000;
    cfg.seed = 99;
    const auto post = run_mcmc(toy, cfg);

    const double mean = post.posterior_mean("mu");
    const double sd = post.posterior_sd("mu");
    CHECK(std::abs(mean - toy.posterior_mean()) / std::abs(toy.posterior_mean()) <= 0.02);
    CHECK(std::abs(sd - toy.posterior_sd()) / toy.posterior_sd() <= 0.05);
    REQUIRE(post.rhat.size() == 1);
    CHECK(post.rhat[0] <= 1.01);

    SUBCASE("hmc path agrees") {
        McmcConfig hmc = cfg;
        hmc.sampler = McmcConfig::Sampler::hmc;
        hmc.leapfrog_steps = 16;
        const auto post_hmc = run_mcmc(toy, hmc);
        CHECK(std::abs(post_hmc.posterior_mean("mu") - toy.posterior_mean()) /
                  std::abs(toy.posterior_mean()) <=
              0.02);
        CHECK(std::abs(post_hmc.posterior_sd("mu") - toy.posterior_sd()) /
                  toy.posterior_sd() <=
              0.05);
    }
}

TEST_CASE("sampler reports initialization failure") {
    const NeverFiniteTarget target;
    McmcConfig cfg;
    cfg.chains = 1;
    cfg.burn_in = 10;
    cfg.iters = 10;
    CHECK_THROWS_AS(run_mcmc(target, cfg), InitializationError);
}

TEST_CASE("mcmc draws are reproducible") {
    Rng gen(41);
    std::vector<double> y(10);
    for (auto& v : y) v = 1.0 + gen.normal();
    const NormalMeanTarget toy(y, 1.0, 0.0, 5.0);
    McmcConfig cfg;
    cfg.chains = 2;
    cfg.burn_in = 100;
    cfg.iters = 200;
    cfg.seed = 7;
    const auto a = run_mcmc(toy, cfg);
    const auto b = run_mcmc(toy, cfg);
    CHECK(a.values == b.values);
}

TEST_CASE("rat scenario 1 fit lands in the reported envelope") {
    const auto designs = builtin_designs();
    const auto truth = builtin_scenario(1).truth.at(Species::rat);
    Rng rng(43);
    const auto data = simulate_dataset(designs.at(Species::rat), truth,
                                       {Outcome::concentration}, rng);
    const auto spec = ModelSpec::standard(designs.at(Species::rat),
                                          {Outcome::concentration}, {});
    const PkModel model(spec, PriorSpec::defaults(), data);

    McmcConfig cfg;
    cfg.chains = 3;
    cfg.burn_in = 1000;
    cfg.iters = 2000;
    cfg.seed = 4242;
    const auto post = run_mcmc(model, cfg);

    const double mu_cl = post.posterior_mean("mu_cl");
    CHECK(mu_cl >= 0.406 - 3.0 * 0.0464);
    CHECK(mu_cl <= 0.406 + 3.0 * 0.0464);
    // residual error and variabilities stay in a plausible range
    CHECK(post.posterior_mean("sigma_c") > 0.1);
    CHECK(post.posterior_mean("sigma_c") < 0.35);
    CHECK(post.posterior_mean("omega_cl") > 0.4);
    CHECK(post.posterior_mean("omega_cl") < 1.2);
    // natural-scale draws of positive parameters never leave the support
    double min_draw = 1e300;
    for (double v : post.values) min_draw = std::min(min_draw, v);
    CHECK(min_draw > 0.0);
}

TEST_CASE("pinned mouse omega appears as a constant column") {
    const auto designs = builtin_designs();
    const auto truth = builtin_scenario(1).truth.at(Species::mouse);
    Rng rng(47);
    const auto data = simulate_dataset(designs.at(Species::mouse), truth,
                                       {Outcome::concentration}, rng);
    const auto spec = ModelSpec::standard(designs.at(Species::mouse),
                                          {Outcome::concentration}, {{"omega_v", 0.7}});
    const PkModel model(spec, PriorSpec::defaults(), data);

    McmcConfig cfg;
    cfg.chains = 2;
    cfg.burn_in = 200;
    cfg.iters = 300;
    cfg.seed = 11;
    const auto post = run_mcmc(model, cfg);

    const auto omega_v = post.column("omega_v");
    for (double v : omega_v) CHECK(v == 0.7);
    const int idx = post.index_of("omega_v");
    CHECK(std::isnan(post.rhat[static_cast<std::size_t>(idx)]));
}

TEST_CASE("posterior contracts when the dataset doubles") {
    StudyDesign design = builtin_designs().at(Species::rat);
    design.n_per_dose = 2; // 10 subjects
    auto truth = builtin_scenario(1).truth.at(Species::rat);
    const auto spec = ModelSpec::standard(design, {Outcome::concentration}, {});

    std::vector<double> sd_single, sd_double;
    for (int s = 0; s < 20; ++s) {
        Rng r1 = Rng(1000).substream(static_cast<std::uint64_t>(s));
        Rng r2 = Rng(2000).substream(static_cast<std::uint64_t>(s));
        auto d1 = simulate_dataset(design, truth, {Outcome::concentration}, r1);
        auto d2 = simulate_dataset(design, truth, {Outcome::concentration}, r2);
        Dataset both = d1;
        for (auto r : d2.records) {
            r.subject_id += 1000;
            both.records.push_back(r);
        }
        McmcConfig cfg;
        cfg.chains = 2;
        cfg.burn_in = 300;
        cfg.iters = 500;
        cfg.seed = static_cast<std::uint64_t>(s);
        const PkModel m1(spec, PriorSpec::defaults(), d1);
        const PkModel m2(spec, PriorSpec::defaults(), both);
        sd_single.push_back(run_mcmc(m1, cfg).posterior_sd("mu_cl"));
        sd_double.push_back(run_mcmc(m2, cfg).posterior_sd("mu_cl"));
    }
    CHECK(empirical_quantile(sd_double, 0.5) < empirical_quantile(sd_single, 0.5));
}

TEST_CASE("run_mcmc rejects an empty dataset") {
    const PkModel model(mouse_style_spec(), PriorSpec::defaults(), Dataset{});
    McmcConfig cfg;
    CHECK_THROWS_AS(run_mcmc(model, cfg), ConfigError);
}

TEST_CASE("sequential prior centers on extrapolated posterior means") {
    PosteriorDraws prev;
    prev.names = {"ka", "mu_cl", "mu_v"};
    prev.n_chains = 1;
    prev.n_iter = 4;
    // constant draws: posterior means equal the values themselves
    for (int it = 0; it < 4; ++it) {
        prev.values.push_back(2.04);
        prev.values.push_back(0.0961);
        prev.values.push_back(0.0508);
    }

    const auto prior = sequential_prior(prev, 0.025, 0.15, PriorSpec::defaults());
    CHECK(std::abs(std::exp(prior.entries.at("mu_cl").a) - 0.368) <= 0.001);
    CHECK(std::abs(std::exp(prior.entries.at("mu_v").a) - 0.305) <= 0.001);
    CHECK(std::exp(prior.entries.at("ka").a) == doctest::Approx(2.04).epsilon(1e-12));
    CHECK(prior.entries.at("mu_cl").b == 2.5);
    CHECK(prior.entries.at("omega_cl").kind == Prior::Kind::half_student_t);
    CHECK(prior.entries.at("omega_cl").b == 2.8);

    SUBCASE("identity when the weights match") {
        const auto same = sequential_prior(prev, 0.15, 0.15, PriorSpec::defaults());
        CHECK(std::exp(same.entries.at("mu_cl").a) ==
              doctest::Approx(0.0961).epsilon(1e-12));
    }

    SUBCASE("missing required parameter") {
        PosteriorDraws broken;
        broken.names = {"ka"};
        broken.n_chains = 1;
        broken.n_iter = 2;
        broken.values = {2.0, 2.0};
        CHECK_THROWS_AS(sequential_prior(broken, 0.025, 0.15, PriorSpec::defaults()),
                        MappingError);
    }
}
