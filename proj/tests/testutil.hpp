#pragma once

// Shared test oracles. These deliberately avoid the library's own closed
// forms and special functions: integration is plain RK4/Simpson, so a bug
// in the implementation cannot hide in the check.

#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

// Fixed-step RK4 for dy/dt = f(t, y).
inline std::vector<double> rk4_solve(
    const std::function<std::vector<double>(double, const std::vector<double>&)>& f,
    std::vector<double> y, double t0, double t1, int steps) {
    const double h = (t1 - t0) / steps;
    const auto axpy = [](const std::vector<double>& a, double c, const std::vector<double>& b) {
        std::vector<double> r(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + c * b[i];
        return r;
    };
    double t = t0;
    for (int s = 0; s < steps; ++s) {
        const auto k1 = f(t, y);
        const auto k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
        const auto k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
        const auto k4 = f(t + h, axpy(y, h, k3));
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    return y;
}

// Composite Simpson rule with n panels (n even).
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2 == 1) ++n;
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

inline double phi(double x) {
    return 0.3989422804014326779 * std::exp(-0.5 * x * x);
}

inline double t_pdf(double x, double df) {
    return std::exp(std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                    0.5 * std::log(df * 3.14159265358979323846) -
                    0.5 * (df + 1.0) * std::log1p(x * x / df));
}

// t CDF by quadrature from the symmetric center.
inline double t_cdf_quad(double x, double df) {
    if (x == 0.0) return 0.5;
    const double mag = std::abs(x);
    const double area = simpson([&](double u) { return t_pdf(u, df); }, 0.0, mag, 20000);
    return x > 0.0 ? 0.5 + area : 0.5 - area;
}

inline double t_quantile_quad(double p, double df) {
    double lo = -100.0, hi = 100.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (t_cdf_quad(mid, df) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// One-compartment oral concentration by RK4 on (gut amount, concentration).
inline double conc_ode(double t, double dose, double ka, double cl, double v, int steps = 40000) {
    const double k = cl / v;
    const auto rhs = [&](double, const std::vector<double>& y) {
        return std::vector<double>{-ka * y[0], ka * y[0] / v - k * y[1]};
    };
    return rk4_solve(rhs, {dose, 0.0}, 0.0, t, steps)[1];
}

// Adds the effect compartment dCe/dt = ke (C - Ce).
inline double ce_ode(double t, double dose, double ka, double cl, double v, double ke,
                     int steps = 40000) {
    const double k = cl / v;
    const auto rhs = [&](double, const std::vector<double>& y) {
        return std::vector<double>{-ka * y[0], ka * y[0] / v - k * y[1],
                                   ke * (y[1] - y[2])};
    };
    return rk4_solve(rhs, {dose, 0.0, 0.0}, 0.0, t, steps)[2];
}

} // namespace testutil
