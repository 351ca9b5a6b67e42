#pragma once

#include <span>
#include <string>
#include <vector>

namespace predose {

// Standard normal density, CDF and quantile. The CDF is accurate to well
// below 1e-12 absolute (erfc based); the quantile is Wichura's PPND16.
double std_normal_pdf(double x);
double std_normal_cdf(double x);
double std_normal_quantile(double p);

// Student-t CDF and quantile (regularized incomplete beta / bisection).
double student_t_cdf(double x, double df);
double student_t_quantile(double p, double df);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0; // unbiased (n-1) estimator
};

MeanSd empirical_mean_sd(std::span<const double> xs);

// Quantile by linear interpolation of order statistics at h = (n-1)p + 1.
double empirical_quantile(std::span<const double> xs, double p);

// Scalar Monte Carlo samples for one study/target.
struct EmpiricalDraws {
    std::vector<double> samples;
    std::string label;
};

// Density heights on a uniform grid over [lo, hi]. Heights live at cell
// midpoints x_j = lo + (j + 1/2) * step, matching the rectangle rule used
// for every integral in this library.
struct GridDensity {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] double step() const { return (hi - lo) / static_cast<double>(values.size()); }
    [[nodiscard]] double point(std::size_t j) const {
        return lo + (static_cast<double>(j) + 0.5) * step();
    }
    [[nodiscard]] double integral() const; // rectangle rule
    void normalize();                      // scale so integral() == 1

    [[nodiscard]] bool same_grid(const GridDensity& other, double tol = 1e-12) const;
};

// Bandwidth rule used throughout: 0.9 * min(sd, IQR/1.34) * n^(-1/5).
double silverman_bandwidth(std::span<const double> xs);

// Gaussian-kernel density estimate of `draws` on an m-point grid over
// [lo, hi]. `bandwidth <= 0` selects the Silverman rule. The estimate is
// not renormalized; it integrates to ~1 whenever the grid covers the
// sample support.
GridDensity kde(const EmpiricalDraws& draws, double lo, double hi, std::size_t m,
                double bandwidth = 0.0);

} // namespace predose
