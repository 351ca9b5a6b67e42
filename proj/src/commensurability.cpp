#include "predose/commensurability.hpp"

#include "predose/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace predose {

std::vector<StandardizedDraws> standardize(const std::vector<DoseDraws>& group) {
    if (group.size() < 2) throw DomainError("standardize: need at least 2 studies");
    std::vector<StandardizedDraws> out(group.size());
    double s_max = 0.0;
    for (std::size_t k = 0; k < group.size(); ++k) {
        const auto& dd = group[k];
        if (dd.samples.size() < 2) {
            throw DegenerateSampleError("standardize: study " + dd.study + " has < 2 draws");
        }
        std::vector<double> logs(dd.samples.size());
        for (std::size_t i = 0; i < dd.samples.size(); ++i) {
            if (!(dd.samples[i] > 0.0)) {
                throw DomainError("standardize: dose draws must be > 0");
            }
            logs[i] = std::log(dd.samples[i]);
        }
        const auto ms = empirical_mean_sd(logs);
        if (!(ms.sd > 1e-12 * std::max(1.0, std::abs(ms.mean)))) {
            throw DegenerateSampleError("standardize: zero log-scale SD in study " + dd.study);
        }
        out[k].study = dd.study;
        out[k].samples = std::move(logs);
        out[k].m_k = ms.mean;
        out[k].s_k = ms.sd;
        s_max = std::max(s_max, ms.sd);
    }
    for (auto& sd : out) {
        sd.s_max = s_max;
        const double ratio = s_max / sd.s_k;
        for (double& x : sd.samples) x = ratio * x + (1.0 - ratio) * sd.m_k;
    }
    return out;
}

double hellinger(const GridDensity& p, const GridDensity& q) {
    if (!p.same_grid(q)) throw GridMismatchError("hellinger: densities on different grids");
    double acc = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double d = std::sqrt(p.values[j]) - std::sqrt(q.values[j]);
        acc += d * d;
    }
    const double h2 = 0.5 * p.step() * acc;
    return std::sqrt(std::clamp(h2, 0.0, 1.0));
}

double DistanceMatrix::between(const std::string& a, const std::string& b) const {
    const auto find = [&](const std::string& name) {
        for (std::size_t i = 0; i < studies.size(); ++i) {
            if (studies[i] == name) return i;
        }
        throw MappingError("DistanceMatrix: no study named " + name);
    };
    return at(find(a), find(b));
}

DistanceMatrix pairwise_distances(const std::vector<StandardizedDraws>& group,
                                  const PairwiseConfig& cfg) {
    if (group.size() < 2) throw DomainError("pairwise_distances: need at least 2 studies");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double h_pool = 0.0;
    std::vector<double> bandwidths(group.size());
    for (std::size_t k = 0; k < group.size(); ++k) {
        bandwidths[k] = silverman_bandwidth(group[k].samples);
        h_pool = std::max(h_pool, bandwidths[k]);
        const auto [mn, mx] =
            std::minmax_element(group[k].samples.begin(), group[k].samples.end());
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
    }
    lo -= cfg.pad_bandwidths * h_pool;
    hi += cfg.pad_bandwidths * h_pool;

    std::vector<GridDensity> densities(group.size());
    for (std::size_t k = 0; k < group.size(); ++k) {
        EmpiricalDraws draws{group[k].samples, group[k].study};
        densities[k] = kde(draws, lo, hi, cfg.grid_points, bandwidths[k]);
        densities[k].normalize();
    }

    DistanceMatrix dm;
    dm.studies.reserve(group.size());
    for (const auto& g : group) dm.studies.push_back(g.study);
    dm.values.assign(group.size() * group.size(), 0.0);
    for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t j = i + 1; j < group.size(); ++j) {
            const double h = hellinger(densities[i], densities[j]);
            dm.values[i * group.size() + j] = h;
            dm.values[j * group.size() + i] = h;
        }
    }
    return dm;
}

std::vector<std::string> select_studies(const DistanceMatrix& dm, double threshold,
                                        const std::string& default_study) {
    if (dm.size() != 3) {
        throw UnsupportedCardinalityError("select_studies: rule is defined for exactly 3 studies");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw DomainError("select_studies: threshold must lie in (0,1)");
    }
    bool default_present = false;
    for (const auto& s : dm.studies) default_present |= s == default_study;
    if (!default_present) {
        throw ConfigError("select_studies: default study " + default_study + " not in matrix");
    }

    const std::pair<std::size_t, std::size_t> pairs[3] = {{0, 1}, {0, 2}, {1, 2}};
    int count = 0;
    int single = -1;
    for (int p = 0; p < 3; ++p) {
        if (dm.at(pairs[p].first, pairs[p].second) <= threshold) {
            ++count;
            single = p;
        }
    }
    if (count >= 2) return dm.studies;
    if (count == 1) {
        return {dm.studies[pairs[single].first], dm.studies[pairs[single].second]};
    }
    return {default_study};
}

double accuracy(const std::vector<int>& true_labels, const std::vector<double>& distances,
                double threshold) {
    if (true_labels.empty() || true_labels.size() != distances.size()) {
        throw DomainError("accuracy: labels and distances must align and be non-empty");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const int predicted = distances[i] <= threshold ? 1 : 0;
        correct += predicted == true_labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(true_labels.size());
}

std::vector<std::pair<double, double>> threshold_curve(const std::vector<int>& true_labels,
                                                       const std::vector<double>& distances,
                                                       const std::vector<double>& taus) {
    std::vector<std::pair<double, double>> out;
    out.reserve(taus.size());
    for (double tau : taus) out.emplace_back(tau, accuracy(true_labels, distances, tau));
    return out;
}

std::vector<double> default_taus() {
    std::vector<double> taus;
    for (int i = 1; i <= 50; ++i) taus.push_back(i / 100.0);
    return taus;
}

} // namespace predose
