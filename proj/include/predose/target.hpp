#pragma once

#include "predose/rng.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace predose {

// Stateful single-coordinate evaluator used by the Gibbs sweep. delta()
// quotes the log-density change of moving one coordinate; commit()
// applies the move quoted by the immediately preceding delta().
class CoordinateEvaluator {
public:
    virtual ~CoordinateEvaluator() = default;
    [[nodiscard]] virtual double log_density() const = 0;
    virtual double delta(int j, double x) = 0;
    virtual void commit() = 0;
};

// A log density the samplers and the optimizer can work on. Coordinates
// live on an unconstrained scale; a prefix of them ("leading reported"
// coordinates) maps onto the named, natural-scale parameters that end up
// in PosteriorDraws, possibly followed by pinned constants.
class SamplerTarget {
public:
    virtual ~SamplerTarget() = default;

    [[nodiscard]] virtual int dim() const = 0;
    [[nodiscard]] virtual int n_leading_reported() const = 0;
    virtual double log_density(std::span<const double> theta) const = 0;
    virtual void gradient(std::span<const double> theta, std::span<double> out) const = 0;
    [[nodiscard]] virtual std::vector<double> initial_point(Rng& rng) const = 0;
    [[nodiscard]] virtual std::vector<std::string> reported_names() const = 0;
    [[nodiscard]] virtual std::vector<double>
    reported_values(std::span<const double> theta) const = 0;

    // Coordinates the optimizer must keep away from -inf (scale
    // parameters sampled on the log scale). Default: none.
    [[nodiscard]] virtual std::vector<bool> lower_bounded_coords() const;

    // Default evaluator recomputes the full density per proposal; targets
    // with exploitable structure override this.
    [[nodiscard]] virtual std::unique_ptr<CoordinateEvaluator>
    make_evaluator(std::span<const double> theta) const;
};

} // namespace predose
