#include "predose/pkpd.hpp"

#include "predose/detail/pk_kernels.hpp"
#include "predose/errors.hpp"
#include "predose/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace predose {

namespace {

void check_pk(const PkParams& p) {
    if (!(p.ka > 0.0 && p.cl > 0.0 && p.v > 0.0)) {
        throw DomainError("PkParams: ka, cl, v must all be > 0");
    }
}

// Golden-section maximization of a unimodal function after a coarse
// geometric scan over (0, horizon].
double golden_max(const std::function<double(double)>& f, double horizon) {
    constexpr int kScanPoints = 64;
    const double t_min = horizon * 1e-4;
    const double ratio = std::pow(horizon / t_min, 1.0 / (kScanPoints - 1));
    double best = -1.0;
    int best_idx = 0;
    std::vector<double> ts(kScanPoints);
    for (int i = 0; i < kScanPoints; ++i) {
        ts[i] = t_min * std::pow(ratio, i);
        const double val = f(ts[i]);
        if (val > best) {
            best = val;
            best_idx = i;
        }
    }
    double a = ts[std::max(0, best_idx - 1)];
    double b = ts[std::min(kScanPoints - 1, best_idx + 1)];
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int it = 0; it < 80 && (b - a) > 1e-12 * horizon; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = f(x1);
        }
    }
    return std::max({best, f1, f2});
}

} // namespace

double concentration(double t, double dose, const PkParams& p) {
    check_pk(p);
    if (t < 0.0) throw DomainError("concentration: t must be >= 0");
    if (dose < 0.0) throw DomainError("concentration: dose must be >= 0");
    if (t == 0.0 || dose == 0.0) return 0.0;
    return detail::conc_kernel(t, dose, p.ka, p.cl, p.v);
}

double auc(double dose, double cl) {
    if (!(cl > 0.0)) throw DomainError("auc: cl must be > 0");
    if (dose < 0.0) throw DomainError("auc: dose must be >= 0");
    return dose / cl;
}

double prob_toxicity(double dose, double mu_cl, double omega_cl, const ToxicitySpec& spec) {
    if (!(dose > 0.0)) throw DomainError("prob_toxicity: dose must be > 0");
    if (!(mu_cl > 0.0)) throw DomainError("prob_toxicity: mu_cl must be > 0");
    if (!(spec.tau_t > 0.0 && spec.mu_alpha > 0.0)) {
        throw DomainError("prob_toxicity: tau_t and mu_alpha must be > 0");
    }
    const double var = omega_cl * omega_cl + spec.omega_alpha * spec.omega_alpha;
    if (!(var > 0.0)) {
        throw DegenerateSampleError(
            "prob_toxicity: omega_cl and omega_alpha both zero (step-function limit)");
    }
    const double z = (std::log(dose) + std::log(spec.mu_alpha) - std::log(spec.tau_t) -
                      std::log(mu_cl)) /
                     std::sqrt(var);
    return std_normal_cdf(z);
}

double mtd_analytic(double mu_cl, double omega_cl, const ToxicitySpec& spec) {
    if (!(mu_cl > 0.0)) throw DomainError("mtd_analytic: mu_cl must be > 0");
    if (!(spec.tau_t > 0.0 && spec.mu_alpha > 0.0)) {
        throw DomainError("mtd_analytic: tau_t and mu_alpha must be > 0");
    }
    if (!(spec.p_t > 0.0 && spec.p_t < 1.0)) {
        throw DomainError("mtd_analytic: p_t must lie in (0,1)");
    }
    const double var = omega_cl * omega_cl + spec.omega_alpha * spec.omega_alpha;
    if (!(var > 0.0)) {
        throw DegenerateSampleError(
            "mtd_analytic: omega_cl and omega_alpha both zero (step-function limit)");
    }
    return std::exp(std::log(spec.tau_t) + std::log(mu_cl) - std::log(spec.mu_alpha) +
                    std_normal_quantile(spec.p_t) * std::sqrt(var));
}

double effect_concentration(double t, double dose, const PkParams& p, double ke) {
    check_pk(p);
    if (!(ke > 0.0)) throw DomainError("effect_concentration: ke must be > 0");
    if (t < 0.0) throw DomainError("effect_concentration: t must be >= 0");
    if (t == 0.0 || dose == 0.0) return 0.0;
    return detail::ce_kernel(t, dose, p.ka, p.cl, p.v, ke);
}

double response(double t, double dose, const PkParams& p, const PdParams& q) {
    if (!(q.i_max > 0.0 && q.i_max <= 1.0)) {
        throw DomainError("response: i_max must lie in (0,1]");
    }
    if (!(q.ic50 > 0.0)) throw DomainError("response: ic50 must be > 0");
    const double ce = effect_concentration(t, dose, p, q.ke);
    return q.i_max * ce / (ce + q.ic50);
}

double max_response(double dose, const PkParams& p, const PdParams& q, double horizon) {
    if (!(horizon > 0.0)) throw DomainError("max_response: horizon must be > 0");
    if (dose == 0.0) return 0.0;
    return golden_max([&](double t) { return response(t, dose, p, q); }, horizon);
}

double peak_effect_concentration_unit_dose(const PkParams& p, double ke, double horizon) {
    if (!(horizon > 0.0)) {
        throw DomainError("peak_effect_concentration_unit_dose: horizon must be > 0");
    }
    return golden_max([&](double t) { return effect_concentration(t, 1.0, p, ke); }, horizon);
}

double med_monte_carlo(const PopulationPkPd& pop, const EfficacySpec& spec,
                       const MedMcConfig& cfg, Rng& rng) {
    if (cfg.n_subjects < 1) throw DomainError("med_monte_carlo: n_subjects must be >= 1");
    if (!(spec.tau_e > 0.0 && spec.tau_e < 1.0)) {
        throw DomainError("med_monte_carlo: tau_e must lie in (0,1)");
    }
    if (!(spec.p_e > 0.0 && spec.p_e < 1.0)) {
        throw DomainError("med_monte_carlo: p_e must lie in (0,1)");
    }
    if (!(cfg.bracket_lo > 0.0 && cfg.bracket_lo < cfg.bracket_hi)) {
        throw DomainError("med_monte_carlo: invalid dose bracket");
    }

    // Smallest responding dose per simulated subject. The effect
    // concentration is linear in dose and its peak time does not move with
    // dose, so subject s responds at dose d iff d >= d_min[s]; candidate
    // doses all reuse the same subjects (common random numbers).
    const int n = cfg.n_subjects;
    std::vector<double> d_min(static_cast<std::size_t>(n));
    const double log_mu_cl = std::log(pop.mu_cl);
    const double log_mu_v = std::log(pop.mu_v);
    const double log_mu_ic50 = std::log(pop.mu_ic50);
    const double log_mu_ke = std::log(pop.mu_ke);
    for (int s = 0; s < n; ++s) {
        Rng sub = rng.substream(static_cast<std::uint64_t>(s));
        PkParams p;
        p.ka = pop.ka;
        p.cl = sub.lognormal(log_mu_cl, pop.omega_cl);
        p.v = sub.lognormal(log_mu_v, pop.omega_v);
        const double ic50 = sub.lognormal(log_mu_ic50, pop.omega_ic50);
        const double ke = sub.lognormal(log_mu_ke, pop.omega_ke);
        if (pop.i_max <= spec.tau_e) {
            d_min[static_cast<std::size_t>(s)] = std::numeric_limits<double>::infinity();
            continue;
        }
        const double peak_unit = peak_effect_concentration_unit_dose(p, ke, cfg.horizon_h);
        d_min[static_cast<std::size_t>(s)] =
            spec.tau_e * ic50 / ((pop.i_max - spec.tau_e) * peak_unit);
    }

    const auto fraction_responding = [&](double d) {
        std::size_t count = 0;
        for (double dm : d_min) count += dm <= d ? 1 : 0;
        return static_cast<double>(count) / static_cast<double>(n);
    };

    if (fraction_responding(cfg.bracket_lo) > spec.p_e) return cfg.bracket_lo;
    if (fraction_responding(cfg.bracket_hi) <= spec.p_e) {
        throw NoSolutionError("med_monte_carlo: no dose in bracket reaches the response target");
    }

    // Coarse log scan, 32 points per decade, then bisection.
    const double decades = std::log10(cfg.bracket_hi / cfg.bracket_lo);
    const int n_scan = static_cast<int>(std::ceil(decades * 32.0));
    double lo = cfg.bracket_lo;
    double hi = cfg.bracket_hi;
    for (int j = 1; j <= n_scan; ++j) {
        const double d = cfg.bracket_lo * std::pow(10.0, decades * j / n_scan);
        if (fraction_responding(d) > spec.p_e) {
            hi = d;
            break;
        }
        lo = d;
    }
    while (hi - lo > cfg.rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (fraction_responding(mid) > spec.p_e) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace predose
