#pragma once

#include "predose/stats.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace predose {

struct PosteriorSummary {
    double mean = 0.0;
    double median = 0.0;
    double cri_lo = 0.0; // 2.5% quantile
    double cri_hi = 0.0; // 97.5% quantile
};

// Final merged dose distribution: normalized pointwise product of the
// selected studies' grid densities.
struct MergedPosterior {
    GridDensity density;
    std::vector<std::string> studies;
    PosteriorSummary summary;

    void write_csv(std::ostream& os) const; // grid_point,density
};

// Pointwise product of densities on a shared grid, computed in log space
// with a max shift, then renormalized. A singleton input is returned
// unchanged (up to normalization). Throws IncommensurableSupportError
// when the unnormalized product integrates below 1e-300.
MergedPosterior merge(const std::vector<GridDensity>& densities,
                      const std::vector<std::string>& studies = {});

// Rectangle-rule mean; median and equal-tail 95% interval by linear
// interpolation of the grid CDF. Expects a normalized density.
PosteriorSummary summarize(const GridDensity& density);

// Product of K Beta posteriors Beta(a + x_k, b + n_k - x_k): the exact
// closed form used as the merge oracle. counts holds (x_k, n_k).
std::pair<double, double> beta_merge(double a, double b,
                                     const std::vector<std::pair<int, int>>& counts);

} // namespace predose
