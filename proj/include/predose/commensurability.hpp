#pragma once

#include "predose/draws.hpp"
#include "predose/stats.hpp"

#include <string>
#include <utility>
#include <vector>

namespace predose {

// One study's dose draws after the variance-standardizing log transform:
// every study keeps its own mean while all spreads equal the largest one,
// so divergence between studies no longer reflects sample-size imbalance.
struct StandardizedDraws {
    std::string study;
    std::vector<double> samples; // transformed scale
    double m_k = 0.0;   // mean of the log doses
    double s_k = 0.0;   // SD of the log doses
    double s_max = 0.0; // largest SD in the group
};

// Applies d* = (s_max/s_k) log d + (1 - s_max/s_k) m_k per draw, with
// empirical moments. Throws DegenerateSampleError when a study has zero
// log-scale spread.
std::vector<StandardizedDraws> standardize(const std::vector<DoseDraws>& group);

// Hellinger distance of two normalized densities on the same grid,
// rectangle rule, clamped to [0,1].
double hellinger(const GridDensity& p, const GridDensity& q);

struct DistanceMatrix {
    std::vector<std::string> studies;
    std::vector<double> values; // row-major K x K, zero diagonal, symmetric

    [[nodiscard]] std::size_t size() const { return studies.size(); }
    [[nodiscard]] double at(std::size_t i, std::size_t j) const {
        return values[i * size() + j];
    }
    [[nodiscard]] double between(const std::string& a, const std::string& b) const;
};

struct PairwiseConfig {
    std::size_t grid_points = 512;
    double pad_bandwidths = 3.0; // shared-grid padding in pooled bandwidths
};

// KDE of each standardized sample set on one shared grid (pooled range
// padded by pooled bandwidths), then pairwise Hellinger distances.
DistanceMatrix pairwise_distances(const std::vector<StandardizedDraws>& group,
                                  const PairwiseConfig& cfg = {});

// Three-study selection rule: with c = #{pairs at distance <= threshold},
// c >= 2 keeps all three studies, c = 1 keeps the pair attaining it, c = 0
// keeps only `default_study`.
std::vector<std::string> select_studies(const DistanceMatrix& dm, double threshold,
                                        const std::string& default_study);

// Fraction of correct commensurability predictions: predicted positive
// iff distance <= threshold.
double accuracy(const std::vector<int>& true_labels, const std::vector<double>& distances,
                double threshold);

std::vector<std::pair<double, double>> threshold_curve(const std::vector<int>& true_labels,
                                                       const std::vector<double>& distances,
                                                       const std::vector<double>& taus);

// 0.01, 0.02, ..., 0.50
std::vector<double> default_taus();

} // namespace predose
