#include "predose/mcmc.hpp"

#include "predose/errors.hpp"
#include "predose/rng.hpp"
#include "predose/stats.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <limits>

namespace predose {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> find_initial_point(const SamplerTarget& model, Rng& rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<double> theta = model.initial_point(rng);
        if (attempt > 0) {
            const double scale = 0.05 * attempt;
            for (double& t : theta) t += scale * rng.normal();
        }
        if (std::isfinite(model.log_density(theta))) return theta;
    }
    throw InitializationError("run_mcmc: no finite starting point after 100 attempts");
}

struct ChainResult {
    std::vector<double> draws; // [iter][reported]
    std::vector<double> accept_rate;
};

ChainResult run_mwg_chain(const SamplerTarget& model, const McmcConfig& cfg, Rng rng,
                          std::vector<double> theta) {
    const int dim = model.dim();
    auto eval = model.make_evaluator(theta);

    std::vector<double> log_step(static_cast<std::size_t>(dim), std::log(0.25));
    std::vector<long> accepted(static_cast<std::size_t>(dim), 0);
    std::vector<long> proposed(static_cast<std::size_t>(dim), 0);
    std::vector<long> adapt_n(static_cast<std::size_t>(dim), 0);

    ChainResult out;
    out.draws.reserve(static_cast<std::size_t>(cfg.iters) * model.reported_names().size());

    const int total = cfg.burn_in + cfg.iters;
    for (int sweep = 0; sweep < total; ++sweep) {
        const bool adapting = sweep < cfg.burn_in;
        for (int j = 0; j < dim; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            const double x = theta[sj] + std::exp(log_step[sj]) * rng.normal();
            const double d = eval->delta(j, x);
            const double acc_prob = d >= 0.0 ? 1.0 : std::exp(d);
            if (rng.uniform() < acc_prob) {
                eval->commit();
                theta[sj] = x;
                if (!adapting) ++accepted[sj];
            }
            if (!adapting) ++proposed[sj];
            if (adapting) {
                const double n = static_cast<double>(++adapt_n[sj]);
                const double gamma = std::min(0.5, 2.0 / std::pow(n, 0.6));
                log_step[sj] += gamma * (acc_prob - cfg.target_accept);
                log_step[sj] = std::clamp(log_step[sj], -15.0, 3.0);
            }
        }
        if (!adapting) {
            const auto rep = model.reported_values(theta);
            out.draws.insert(out.draws.end(), rep.begin(), rep.end());
        }
    }
    out.accept_rate.resize(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        out.accept_rate[sj] = proposed[sj] > 0 ? static_cast<double>(accepted[sj]) /
                                                     static_cast<double>(proposed[sj])
                                               : 0.0;
    }
    return out;
}

struct HmcState {
    std::vector<double> theta;
    std::vector<double> grad;
    double logp = kNegInf;
};

bool hmc_refresh(const SamplerTarget& model, HmcState& s) {
    s.logp = model.log_density(s.theta);
    if (!std::isfinite(s.logp)) return false;
    model.gradient(s.theta, s.grad);
    for (double g : s.grad) {
        if (!std::isfinite(g)) return false;
    }
    return true;
}

// One leapfrog trajectory; returns false on divergence.
bool leapfrog(const SamplerTarget& model, HmcState& s, std::vector<double>& p, double eps,
              int steps) {
    const std::size_t dim = s.theta.size();
    for (int step = 0; step < steps; ++step) {
        for (std::size_t j = 0; j < dim; ++j) p[j] += 0.5 * eps * s.grad[j];
        for (std::size_t j = 0; j < dim; ++j) {
            s.theta[j] += eps * p[j];
            if (std::abs(s.theta[j]) > 60.0) return false; // exp() territory
        }
        if (!hmc_refresh(model, s)) return false;
        for (std::size_t j = 0; j < dim; ++j) p[j] += 0.5 * eps * s.grad[j];
    }
    return true;
}

double find_reasonable_epsilon(const SamplerTarget& model, const HmcState& init, Rng& rng) {
    double eps = 0.1;
    std::vector<double> p(init.theta.size());
    const auto joint = [&](const HmcState& s, const std::vector<double>& mom) {
        double ke = 0.0;
        for (double m : mom) ke += 0.5 * m * m;
        return s.logp - ke;
    };
    for (double& m : p) m = rng.normal();
    HmcState trial = init;
    std::vector<double> p0 = p;
    const double h0 = joint(init, p0);
    if (!leapfrog(model, trial, p, eps, 1)) return 0.01;
    double ratio = std::exp(joint(trial, p) - h0);
    const bool grow = ratio > 0.5;
    for (int it = 0; it < 50; ++it) {
        eps *= grow ? 2.0 : 0.5;
        trial = init;
        p = p0;
        if (!leapfrog(model, trial, p, eps, 1)) {
            if (grow) return eps * 0.5;
            continue;
        }
        ratio = std::exp(joint(trial, p) - h0);
        if (grow ? ratio <= 0.5 : ratio >= 0.5) break;
    }
    return eps;
}

ChainResult run_hmc_chain(const SamplerTarget& model, const McmcConfig& cfg, Rng rng,
                          std::vector<double> theta0) {
    const std::size_t dim = theta0.size();
    HmcState cur{std::move(theta0), std::vector<double>(dim), kNegInf};
    if (!hmc_refresh(model, cur)) {
        throw InitializationError("run_mcmc(hmc): non-finite gradient at start");
    }

    // dual averaging (target cfg.target_accept_hmc)
    const double eps0 = find_reasonable_epsilon(model, cur, rng);
    const double mu = std::log(10.0 * eps0);
    double log_eps = std::log(eps0);
    double log_eps_bar = 0.0;
    double h_bar = 0.0;
    constexpr double kGamma = 0.05;
    constexpr double kT0 = 10.0;
    constexpr double kKappa = 0.75;

    ChainResult out;
    long accepted = 0;
    std::vector<double> p(dim);
    const int total = cfg.burn_in + cfg.iters;
    for (int it = 0; it < total; ++it) {
        const bool adapting = it < cfg.burn_in;
        const double eps = adapting ? std::exp(log_eps) : std::exp(log_eps_bar);
        // jittered trajectory length breaks resonance on near-Gaussian targets
        const int steps = 1 + static_cast<int>(rng.uniform() * cfg.leapfrog_steps);
        for (double& m : p) m = rng.normal();
        double h0 = cur.logp;
        for (double m : p) h0 -= 0.5 * m * m;
        HmcState prop = cur;
        double alpha = 0.0;
        if (leapfrog(model, prop, p, eps, steps)) {
            double h1 = prop.logp;
            for (double m : p) h1 -= 0.5 * m * m;
            alpha = std::min(1.0, std::exp(h1 - h0));
            if (rng.uniform() < alpha) {
                cur = std::move(prop);
                if (!adapting) ++accepted;
            }
        }
        if (adapting) {
            const double m = static_cast<double>(it + 1);
            h_bar = (1.0 - 1.0 / (m + kT0)) * h_bar +
                    (cfg.target_accept_hmc - alpha) / (m + kT0);
            log_eps = mu - std::sqrt(m) / kGamma * h_bar;
            const double w = std::pow(m, -kKappa);
            log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
        } else {
            const auto rep = model.reported_values(cur.theta);
            out.draws.insert(out.draws.end(), rep.begin(), rep.end());
        }
    }
    out.accept_rate = {static_cast<double>(accepted) / std::max(1, cfg.iters)};
    return out;
}

} // namespace

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
    if (chains.size() < 2) throw DomainError("gelman_rubin: need at least 2 chains");
    for (const auto& c : chains) {
        if (c.size() < 10) throw DomainError("gelman_rubin: need at least 10 draws per chain");
    }
    // split each chain in half
    std::vector<std::vector<double>> seqs;
    for (const auto& c : chains) {
        const std::size_t half = c.size() / 2;
        seqs.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        seqs.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(c.size() - half), c.end());
    }
    const double n = static_cast<double>(seqs.front().size());
    std::vector<double> means;
    double w = 0.0;
    for (const auto& s : seqs) {
        const auto ms = empirical_mean_sd(s);
        means.push_back(ms.mean);
        w += ms.sd * ms.sd;
    }
    w /= static_cast<double>(seqs.size());
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) /
                         static_cast<double>(means.size());
    if (!(w > 1e-24 * std::max(1.0, grand * grand))) {
        throw DegenerateSampleError("gelman_rubin: zero within-chain variance");
    }
    const auto mm = empirical_mean_sd(means);
    const double b_over_n = mm.sd * mm.sd; // B/n
    const double var_plus = (n - 1.0) / n * w + b_over_n;
    return std::sqrt(var_plus / w);
}

PosteriorDraws run_mcmc(const PkModel& model, const McmcConfig& cfg) {
    if (model.n_obs() == 0) throw ConfigError("run_mcmc: dataset is empty");
    return run_mcmc(static_cast<const SamplerTarget&>(model), cfg);
}

PosteriorDraws run_mcmc(const SamplerTarget& model, const McmcConfig& cfg) {
    if (cfg.chains < 1 || cfg.burn_in < 0 || cfg.iters < 1) {
        throw ConfigError("run_mcmc: invalid chain configuration");
    }

    const auto names = model.reported_names();
    const int n_rep = static_cast<int>(names.size());

    PosteriorDraws post;
    post.names = names;
    post.n_chains = cfg.chains;
    post.n_iter = cfg.iters;
    post.values.resize(static_cast<std::size_t>(cfg.chains) *
                       static_cast<std::size_t>(cfg.iters) * static_cast<std::size_t>(n_rep));

    for (int c = 0; c < cfg.chains; ++c) {
        Rng chain_rng = Rng(cfg.seed).substream(static_cast<std::uint64_t>(c));
        auto theta0 = find_initial_point(model, chain_rng);
        ChainResult res = cfg.sampler == McmcConfig::Sampler::metropolis_within_gibbs
                              ? run_mwg_chain(model, cfg, chain_rng, std::move(theta0))
                              : run_hmc_chain(model, cfg, chain_rng, std::move(theta0));
        std::copy(res.draws.begin(), res.draws.end(),
                  post.values.begin() + static_cast<std::ptrdiff_t>(
                                            static_cast<std::size_t>(c) *
                                            static_cast<std::size_t>(cfg.iters) *
                                            static_cast<std::size_t>(n_rep)));
        if (c == 0) {
            post.accept = res.accept_rate;
        } else {
            for (std::size_t j = 0; j < post.accept.size(); ++j) {
                post.accept[j] += res.accept_rate[j];
            }
        }
    }
    for (double& a : post.accept) a /= cfg.chains;

    post.rhat.assign(static_cast<std::size_t>(n_rep), std::nan(""));
    for (int p = 0; p < n_rep; ++p) {
        std::vector<std::vector<double>> per_chain(static_cast<std::size_t>(cfg.chains));
        for (int c = 0; c < cfg.chains; ++c) {
            auto& seq = per_chain[static_cast<std::size_t>(c)];
            seq.resize(static_cast<std::size_t>(cfg.iters));
            for (int it = 0; it < cfg.iters; ++it) {
                seq[static_cast<std::size_t>(it)] = post.at(c, it, p);
            }
        }
        try {
            post.rhat[static_cast<std::size_t>(p)] = gelman_rubin(per_chain);
        } catch (const DegenerateSampleError&) {
            // constant column (pinned parameter); Rhat undefined
        } catch (const DomainError&) {
            // single chain or too few draws
        }
        if (post.rhat[static_cast<std::size_t>(p)] > cfg.rhat_warn) {
            post.warnings.push_back("Rhat > " + std::to_string(cfg.rhat_warn) + " for " +
                                    names[static_cast<std::size_t>(p)]);
        }
    }
    return post;
}

} // namespace predose
