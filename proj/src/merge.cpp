#include "predose/merge.hpp"

#include "predose/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace predose {

void MergedPosterior::write_csv(std::ostream& os) const {
    os << "grid_point,density\n";
    char buf[96];
    for (std::size_t j = 0; j < density.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", density.point(j), density.values[j]);
        os << buf;
    }
}

MergedPosterior merge(const std::vector<GridDensity>& densities,
                      const std::vector<std::string>& studies) {
    if (densities.empty()) throw DomainError("merge: need at least one density");
    if (!studies.empty() && studies.size() != densities.size()) {
        throw DomainError("merge: study labels do not match densities");
    }
    const GridDensity& base = densities.front();
    for (const auto& d : densities) {
        if (!d.same_grid(base)) throw GridMismatchError("merge: densities on different grids");
    }

    const std::size_t m = base.size();
    std::vector<double> log_prod(m, 0.0);
    for (const auto& d : densities) {
        for (std::size_t j = 0; j < m; ++j) {
            log_prod[j] += d.values[j] > 0.0 ? std::log(d.values[j])
                                             : -std::numeric_limits<double>::infinity();
        }
    }
    const double shift = *std::max_element(log_prod.begin(), log_prod.end());
    if (!std::isfinite(shift)) {
        throw IncommensurableSupportError("merge: product density vanishes on the whole grid");
    }

    MergedPosterior out;
    out.studies = studies;
    out.density.lo = base.lo;
    out.density.hi = base.hi;
    out.density.values.resize(m);
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        out.density.values[j] = std::exp(log_prod[j] - shift);
        sum += out.density.values[j];
    }
    // unnormalized integral on the original scale: exp(shift) * step * sum
    const double log_integral = shift + std::log(base.step() * sum);
    if (log_integral < std::log(1e-300)) {
        throw IncommensurableSupportError("merge: densities share numerically no support");
    }
    out.density.normalize();
    out.summary = summarize(out.density);
    return out;
}

PosteriorSummary summarize(const GridDensity& density) {
    if (std::abs(density.integral() - 1.0) > 1e-6) {
        throw DomainError("summarize: density must be normalized");
    }
    const double step = density.step();
    PosteriorSummary s;
    for (std::size_t j = 0; j < density.size(); ++j) {
        s.mean += density.point(j) * density.values[j] * step;
    }
    const auto quantile = [&](double p) {
        double cdf = 0.0;
        for (std::size_t j = 0; j < density.size(); ++j) {
            const double cell = density.values[j] * step;
            if (cdf + cell >= p) {
                const double left = density.lo + static_cast<double>(j) * step;
                return cell > 0.0 ? left + (p - cdf) / cell * step : left;
            }
            cdf += cell;
        }
        return density.hi;
    };
    s.median = quantile(0.5);
    s.cri_lo = quantile(0.025);
    s.cri_hi = quantile(0.975);
    return s;
}

std::pair<double, double> beta_merge(double a, double b,
                                     const std::vector<std::pair<int, int>>& counts) {
    if (!(a > 0.0 && b > 0.0)) throw DomainError("beta_merge: a and b must be > 0");
    if (counts.empty()) throw DomainError("beta_merge: need at least one study");
    const double k = static_cast<double>(counts.size());
    double sum_x = 0.0;
    double sum_nx = 0.0;
    for (const auto& [x, n] : counts) {
        if (x < 0 || n < x) throw DomainError("beta_merge: counts must satisfy 0 <= x <= n");
        sum_x += x;
        sum_nx += n - x;
    }
    const double alpha = k * a - k + 1.0 + sum_x;
    const double beta = k * b - k + 1.0 + sum_nx;
    if (!(alpha > 0.0 && beta > 0.0)) {
        throw DomainError("beta_merge: resulting Beta parameters must be > 0");
    }
    return {alpha, beta};
}

} // namespace predose
