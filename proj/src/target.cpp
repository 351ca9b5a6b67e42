#include "predose/target.hpp"

#include <cmath>
#include <limits>

namespace predose {

namespace {

class FullRecomputeEvaluator final : public CoordinateEvaluator {
public:
    FullRecomputeEvaluator(const SamplerTarget& target, std::span<const double> theta)
        : target_(target), theta_(theta.begin(), theta.end()) {
        logp_ = target_.log_density(theta_);
    }

    [[nodiscard]] double log_density() const override { return logp_; }

    double delta(int j, double x) override {
        staged_j_ = j;
        staged_x_ = x;
        const double old = theta_[static_cast<std::size_t>(j)];
        theta_[static_cast<std::size_t>(j)] = x;
        staged_logp_ = target_.log_density(theta_);
        theta_[static_cast<std::size_t>(j)] = old;
        if (!std::isfinite(staged_logp_)) {
            return -std::numeric_limits<double>::infinity();
        }
        return staged_logp_ - logp_;
    }

    void commit() override {
        theta_[static_cast<std::size_t>(staged_j_)] = staged_x_;
        logp_ = staged_logp_;
    }

private:
    const SamplerTarget& target_;
    std::vector<double> theta_;
    double logp_ = 0.0;
    int staged_j_ = 0;
    double staged_x_ = 0.0;
    double staged_logp_ = 0.0;
};

} // namespace

std::vector<bool> SamplerTarget::lower_bounded_coords() const {
    return std::vector<bool>(static_cast<std::size_t>(dim()), false);
}

std::unique_ptr<CoordinateEvaluator>
SamplerTarget::make_evaluator(std::span<const double> theta) const {
    return std::make_unique<FullRecomputeEvaluator>(*this, theta);
}

} // namespace predose
