#include "predose/hybrid.hpp"

#include "predose/errors.hpp"
#include "predose/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace predose {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Objective: negative log joint, +inf outside the optimizer's box. Scale
// parameters are kept above 1e-3 to wall off the degenerate spike of the
// joint density at zero variance.
class Objective {
public:
    explicit Objective(const SamplerTarget& model)
        : model_(model), scale_coord_(model.lower_bounded_coords()) {}

    [[nodiscard]] bool in_box(const std::vector<double>& th) const {
        for (std::size_t j = 0; j < th.size(); ++j) {
            if (!std::isfinite(th[j]) || std::abs(th[j]) > 30.0) return false;
            if (scale_coord_[j] && th[j] < -7.0) return false;
        }
        return true;
    }

    double value(const std::vector<double>& th) const {
        if (!in_box(th)) return kInf;
        const double lp = model_.log_density(th);
        return std::isfinite(lp) ? -lp : kInf;
    }

    void gradient(const std::vector<double>& th, std::vector<double>& g) const {
        model_.gradient(th, g);
        for (double& v : g) v = -v;
    }

private:
    const SamplerTarget& model_;
    std::vector<bool> scale_coord_;
};

struct LbfgsResult {
    std::vector<double> theta;
    double value = kInf;
    bool converged = false;
};

LbfgsResult lbfgs_minimize(const Objective& obj, std::vector<double> theta, int max_iter,
                           double grad_tol) {
    const std::size_t dim = theta.size();
    constexpr std::size_t kMemory = 8;
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;

    double f = obj.value(theta);
    if (!std::isfinite(f)) return {std::move(theta), kInf, false};
    std::vector<double> g(dim);
    obj.gradient(theta, g);

    std::vector<double> dir(dim), theta_new(dim), g_new(dim), alpha(kMemory);
    LbfgsResult res;
    for (int it = 0; it < max_iter; ++it) {
        // two-loop recursion
        dir = g;
        const std::size_t m = s_hist.size();
        for (std::size_t k = m; k-- > 0;) {
            double dot = 0.0;
            for (std::size_t j = 0; j < dim; ++j) dot += s_hist[k][j] * dir[j];
            alpha[k] = rho_hist[k] * dot;
            for (std::size_t j = 0; j < dim; ++j) dir[j] -= alpha[k] * y_hist[k][j];
        }
        if (m > 0) {
            double sy = 0.0, yy = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                sy += s_hist[m - 1][j] * y_hist[m - 1][j];
                yy += y_hist[m - 1][j] * y_hist[m - 1][j];
            }
            const double h0 = sy / yy;
            for (double& d : dir) d *= h0;
        }
        for (std::size_t k = 0; k < m; ++k) {
            double dot = 0.0;
            for (std::size_t j = 0; j < dim; ++j) dot += y_hist[k][j] * dir[j];
            const double beta = rho_hist[k] * dot;
            for (std::size_t j = 0; j < dim; ++j) dir[j] += (alpha[k] - beta) * s_hist[k][j];
        }
        for (double& d : dir) d = -d; // descent direction

        double dg = 0.0;
        for (std::size_t j = 0; j < dim; ++j) dg += dir[j] * g[j];
        if (dg >= 0.0) { // fall back to steepest descent
            for (std::size_t j = 0; j < dim; ++j) dir[j] = -g[j];
            dg = 0.0;
            for (std::size_t j = 0; j < dim; ++j) dg += dir[j] * g[j];
        }

        // backtracking Armijo line search
        double step = 1.0;
        double f_new = kInf;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t j = 0; j < dim; ++j) theta_new[j] = theta[j] + step * dir[j];
            f_new = obj.value(theta_new);
            if (f_new <= f + 1e-4 * step * dg) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        obj.gradient(theta_new, g_new);
        std::vector<double> s(dim), y(dim);
        double sy = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            s[j] = theta_new[j] - theta[j];
            y[j] = g_new[j] - g[j];
            sy += s[j] * y[j];
        }
        if (sy > 1e-12) {
            if (s_hist.size() == kMemory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
        }
        theta = theta_new;
        f = f_new;
        g = g_new;

        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax < grad_tol * std::max(1.0, std::abs(f))) {
            res.converged = true;
            break;
        }
    }
    res.theta = std::move(theta);
    res.value = f;
    return res;
}

} // namespace

HybridFit hybrid_fit(const PkModel& model, const HybridConfig& cfg) {
    if (model.n_obs() == 0) throw ConfigError("hybrid_fit: dataset is empty");
    return hybrid_fit(static_cast<const SamplerTarget&>(model), cfg);
}

HybridFit hybrid_fit(const SamplerTarget& model, const HybridConfig& cfg) {
    const Objective obj(model);
    const int dim = model.dim();
    const int n_pop = model.n_leading_reported();

    Rng rng(cfg.seed, mix64(0x68796272)); // independent of the sampler streams
    LbfgsResult best;
    for (int r = 0; r <= cfg.restarts; ++r) {
        std::vector<double> start = model.initial_point(rng);
        if (r > 0) {
            for (double& t : start) t += 0.3 * rng.normal();
        }
        if (!std::isfinite(obj.value(start))) continue;
        auto res = lbfgs_minimize(obj, std::move(start), cfg.max_iterations, cfg.grad_tol);
        if (res.value < best.value) best = std::move(res);
    }
    if (!std::isfinite(best.value)) {
        throw OptimizationError("hybrid_fit: no finite optimum found");
    }
    const std::vector<double>& mode_u = best.theta;

    // curvature of the negative log joint by central differences of the
    // analytic gradient
    Matrix hess(static_cast<std::size_t>(dim));
    std::vector<double> gp(static_cast<std::size_t>(dim)), gm(static_cast<std::size_t>(dim));
    std::vector<double> th = mode_u;
    for (int i = 0; i < dim; ++i) {
        const auto si = static_cast<std::size_t>(i);
        const double h = 1e-4 * std::max(1.0, std::abs(mode_u[si]));
        th[si] = mode_u[si] + h;
        obj.gradient(th, gp);
        th[si] = mode_u[si] - h;
        obj.gradient(th, gm);
        th[si] = mode_u[si];
        for (int j = 0; j < dim; ++j) {
            hess(si, static_cast<std::size_t>(j)) =
                (gp[static_cast<std::size_t>(j)] - gm[static_cast<std::size_t>(j)]) / (2.0 * h);
        }
    }
    for (int i = 0; i < dim; ++i) {
        for (int j = i + 1; j < dim; ++j) {
            const auto si = static_cast<std::size_t>(i);
            const auto sj = static_cast<std::size_t>(j);
            const double sym = 0.5 * (hess(si, sj) + hess(sj, si));
            hess(si, sj) = sym;
            hess(sj, si) = sym;
        }
    }

    // invert with escalating jitter
    Matrix cov_full;
    double max_diag = 0.0;
    for (int i = 0; i < dim; ++i) {
        max_diag = std::max(max_diag, std::abs(hess(static_cast<std::size_t>(i),
                                                    static_cast<std::size_t>(i))));
    }
    bool ok = spd_inverse(hess, cov_full);
    double jitter = 1e-10 * std::max(1.0, max_diag);
    while (!ok && jitter <= 1e-2 * std::max(1.0, max_diag)) {
        Matrix jittered = hess;
        for (int i = 0; i < dim; ++i) {
            jittered(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) += jitter;
        }
        ok = spd_inverse(jittered, cov_full);
        jitter *= 10.0;
    }
    if (!ok) {
        throw OptimizationError("hybrid_fit: curvature not positive definite after jitter");
    }

    HybridFit fit;
    const auto all_names = model.reported_names();
    fit.pop_names.assign(all_names.begin(), all_names.begin() + n_pop);
    const auto mode_reported = model.reported_values(mode_u);
    fit.mode.assign(mode_reported.begin(), mode_reported.begin() + n_pop);
    fit.covariance = Matrix(static_cast<std::size_t>(n_pop));
    for (int i = 0; i < n_pop; ++i) {
        for (int j = 0; j < n_pop; ++j) {
            fit.covariance(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                cov_full(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }

    Matrix chol;
    if (!cholesky(fit.covariance, chol)) {
        throw OptimizationError("hybrid_fit: population covariance not positive definite");
    }

    // normal PSA draws mapped back to the natural scale
    const auto names = model.reported_names();
    fit.draws.names = names;
    fit.draws.n_chains = 1;
    fit.draws.n_iter = cfg.n_draws;
    fit.draws.values.resize(static_cast<std::size_t>(cfg.n_draws) * names.size());
    fit.draws.rhat.assign(names.size(), std::nan(""));
    std::vector<double> z(static_cast<std::size_t>(n_pop));
    std::vector<double> sample(static_cast<std::size_t>(dim));
    for (int d = 0; d < cfg.n_draws; ++d) {
        for (double& v : z) v = rng.normal();
        sample = mode_u;
        for (int i = 0; i < n_pop; ++i) {
            double acc = mode_u[static_cast<std::size_t>(i)];
            for (int j = 0; j <= i; ++j) {
                acc += chol(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *
                       z[static_cast<std::size_t>(j)];
            }
            sample[static_cast<std::size_t>(i)] = acc;
        }
        const auto rep = model.reported_values(sample);
        std::copy(rep.begin(), rep.end(),
                  fit.draws.values.begin() +
                      static_cast<std::ptrdiff_t>(static_cast<std::size_t>(d) * names.size()));
    }
    return fit;
}

} // namespace predose
