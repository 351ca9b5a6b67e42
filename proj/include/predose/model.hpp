#pragma once

#include "predose/draws.hpp"
#include "predose/rng.hpp"
#include "predose/study.hpp"
#include "predose/target.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace predose {

// Prior for one population parameter: log-normal for location parameters,
// half-Student-t for scale parameters (variabilities and residual SDs).
struct Prior {
    enum class Kind { lognormal, half_student_t };
    Kind kind = Kind::lognormal;
    double a = 0.0; // meanlog | df
    double b = 1.0; // sdlog   | scale

    static Prior lognormal(double meanlog, double sdlog) {
        return {Kind::lognormal, meanlog, sdlog};
    }
    static Prior half_student_t(double df, double scale) {
        return {Kind::half_student_t, df, scale};
    }
    [[nodiscard]] double median() const;
};

struct PriorSpec {
    std::map<std::string, Prior> entries;

    // Weakly informative defaults: LN(-1, 2.5) for ka, mu_cl, mu_v;
    // LN(0, 2.5) for mu_ic50, mu_ke; Half-Student-t(3, 2.8) for every
    // omega and sigma.
    static PriorSpec defaults();
    [[nodiscard]] const Prior& require(const std::string& name) const;
};

enum class ReKind { cl, v, ic50, ke };

std::string to_string(ReKind k);

// Structural description of one study's mixed-effects model: which
// outcomes enter the likelihood, which individual parameters carry random
// effects, and which population values are pinned rather than sampled.
struct ModelSpec {
    std::vector<Outcome> outcomes = {Outcome::concentration};
    std::vector<ReKind> random_effects = {ReKind::cl};
    std::map<std::string, double> fixed; // pinned; excluded from sampling
    double i_max = 1.0;                  // known constant of the inhibition model

    [[nodiscard]] bool has_outcome(Outcome o) const;
    [[nodiscard]] bool has_re(ReKind k) const;
    void validate(bool destructive_design) const;

    // The model used throughout for a given design: random effects on CL
    // only for destructive (single observation per animal) designs, on
    // CL/V (and IC50/ke when inhibition is fitted) otherwise; `pins` holds
    // the assumed values of the variabilities such designs cannot estimate.
    static ModelSpec standard(const StudyDesign& design, const std::vector<Outcome>& outcomes,
                              const std::map<std::string, double>& pins);
};

// Index layout of the unconstrained parameter vector: sampled population
// parameters first (log scale), then one block of per-subject random
// effects (log individual values) per random-effect kind.
struct ParamLayout {
    std::vector<std::string> pop_names;
    std::vector<ReKind> re_kinds;
    int n_subjects = 0;

    [[nodiscard]] int n_pop() const { return static_cast<int>(pop_names.size()); }
    [[nodiscard]] int dim() const {
        return n_pop() + static_cast<int>(re_kinds.size()) * n_subjects;
    }
    [[nodiscard]] int pop_index(const std::string& name) const; // -1 if absent
    [[nodiscard]] int re_index(ReKind k, int subject) const;
};

class PkModel;

// Hierarchical log joint density (priors + random-effect densities +
// residual likelihood) on the unconstrained scale, including Jacobian
// terms. Returns -inf (never NaN) outside the support.
double log_joint(const PkModel& model, std::span<const double> theta);

class PkModel final : public SamplerTarget {
public:
    PkModel(ModelSpec spec, PriorSpec priors, const Dataset& data);

    [[nodiscard]] const ModelSpec& spec() const { return spec_; }
    [[nodiscard]] const PriorSpec& priors() const { return priors_; }
    [[nodiscard]] const ParamLayout& layout() const { return layout_; }
    [[nodiscard]] int n_obs() const { return static_cast<int>(obs_y_.size()); }

    [[nodiscard]] int dim() const override { return layout_.dim(); }
    [[nodiscard]] int n_leading_reported() const override { return layout_.n_pop(); }
    [[nodiscard]] double log_density(std::span<const double> theta) const override;
    // Gradient of log_density; theta must be finite and inside the support.
    void gradient(std::span<const double> theta, std::span<double> out) const override;

    // Prior medians for population parameters, random effects at the
    // population values jittered by 10%.
    [[nodiscard]] std::vector<double> initial_point(Rng& rng) const override;

    // Parameters reported in PosteriorDraws: sampled population parameters
    // (natural scale) plus the pinned constants.
    [[nodiscard]] std::vector<std::string> reported_names() const override;
    [[nodiscard]] std::vector<double>
    reported_values(std::span<const double> theta) const override;
    [[nodiscard]] const std::map<std::string, double>& constants() const { return spec_.fixed; }

    // Scale parameters (half-t priors) are lower-bounded for the optimizer.
    [[nodiscard]] std::vector<bool> lower_bounded_coords() const override;

    // Delta evaluator touching only the terms a single-coordinate move
    // changes.
    [[nodiscard]] std::unique_ptr<CoordinateEvaluator>
    make_evaluator(std::span<const double> theta) const override;

private:
    void build_layout();
    void ingest(const Dataset& data);

    ModelSpec spec_;
    PriorSpec priors_;
    ParamLayout layout_;

    // Observation table, grouped by subject.
    std::vector<int> obs_subject_;
    std::vector<double> obs_time_;
    std::vector<double> obs_dose_;
    std::vector<bool> obs_is_conc_;
    std::vector<double> obs_y_; // log concentration or logit inhibition
    std::vector<int> subj_first_;
    std::vector<int> subj_count_;

    friend class PkMwgEvaluator;
};

// Centers of the next study's location priors: posterior means of the
// previous study mapped by allometric scaling for mu_cl / mu_v and carried
// over unchanged for ka, mu_ic50, mu_ke; every other entry (and all
// widths) stays at `base`.
PriorSpec sequential_prior(const PosteriorDraws& prev, double weight_from_kg,
                           double weight_to_kg, const PriorSpec& base);

} // namespace predose
