#include "predose/stats.hpp"

#include "predose/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace predose {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779; // 1/sqrt(2*pi)
constexpr double kInvSqrt2 = 0.7071067811865475244;   // 1/sqrt(2)
} // namespace

double std_normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

// Wichura (1988), algorithm AS 241, PPND16: ~1e-15 absolute accuracy.
double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("std_normal_quantile: p must lie in (0,1)");
    }
    const double q = p - 0.5;
    double r;
    if (std::abs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

namespace {

// Continued fraction for the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < 1e-300) d = 1e-300;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = 1.0 + aa / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = 1.0 + aa / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 3e-16) break;
    }
    return h;
}

double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

} // namespace

double student_t_cdf(double x, double df) {
    if (!(df > 0.0)) throw DomainError("student_t_cdf: df must be > 0");
    if (x == 0.0) return 0.5;
    const double p = 0.5 * reg_inc_beta(0.5 * df, 0.5, df / (df + x * x));
    return x > 0.0 ? 1.0 - p : p;
}

double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("student_t_quantile: p must lie in (0,1)");
    double lo = -1.0, hi = 1.0;
    while (student_t_cdf(lo, df) > p) lo *= 2.0;
    while (student_t_cdf(hi, df) < p) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++i) {
        const double mid = 0.5 * (lo + hi);
        (student_t_cdf(mid, df) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

MeanSd empirical_mean_sd(std::span<const double> xs) {
    if (xs.size() < 2) {
        throw DegenerateSampleError("empirical_mean_sd: need at least 2 samples");
    }
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        ss += d * d;
    }
    return {mean, std::sqrt(ss / (n - 1.0))};
}

double empirical_quantile(std::span<const double> xs, double p) {
    if (xs.empty()) throw DegenerateSampleError("empirical_quantile: empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("empirical_quantile: p must lie in [0,1]");
    std::vector<double> s(xs.begin(), xs.end());
    std::sort(s.begin(), s.end());
    const double h = (static_cast<double>(s.size()) - 1.0) * p;
    const auto idx = static_cast<std::size_t>(h);
    if (idx + 1 >= s.size()) return s.back();
    const double frac = h - static_cast<double>(idx);
    return s[idx] + frac * (s[idx + 1] - s[idx]);
}

double GridDensity::integral() const {
    return step() * std::accumulate(values.begin(), values.end(), 0.0);
}

void GridDensity::normalize() {
    const double z = integral();
    if (!(z > 0.0) || !std::isfinite(z)) {
        throw DegenerateSampleError("GridDensity::normalize: non-positive integral");
    }
    for (double& v : values) v /= z;
}

bool GridDensity::same_grid(const GridDensity& other, double tol) const {
    const double scale = std::max({std::abs(lo), std::abs(hi), 1.0});
    return values.size() == other.values.size() &&
           std::abs(lo - other.lo) <= tol * scale && std::abs(hi - other.hi) <= tol * scale;
}

double silverman_bandwidth(std::span<const double> xs) {
    const auto ms = empirical_mean_sd(xs);
    const double iqr = empirical_quantile(xs, 0.75) - empirical_quantile(xs, 0.25);
    double spread = ms.sd;
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    if (!(spread > 1e-12 * std::max(1.0, std::abs(ms.mean)))) {
        throw DegenerateSampleError("silverman_bandwidth: sample has zero spread");
    }
    return 0.9 * spread * std::pow(static_cast<double>(xs.size()), -0.2);
}

GridDensity kde(const EmpiricalDraws& draws, double lo, double hi, std::size_t m,
                double bandwidth) {
    if (!(lo < hi)) throw DomainError("kde: grid requires lo < hi");
    if (m < 2) throw DomainError("kde: grid requires m >= 2");
    const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(draws.samples);
    const double n = static_cast<double>(draws.samples.size());

    GridDensity out;
    out.lo = lo;
    out.hi = hi;
    out.values.assign(m, 0.0);
    const double step = out.step();
    for (std::size_t j = 0; j < m; ++j) {
        const double x = lo + (static_cast<double>(j) + 0.5) * step;
        double acc = 0.0;
        for (double s : draws.samples) {
            acc += std_normal_pdf((x - s) / h);
        }
        out.values[j] = acc / (n * h);
    }
    return out;
}

} // namespace predose
