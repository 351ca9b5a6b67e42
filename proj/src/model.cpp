#include "predose/model.hpp"

#include "predose/detail/pk_kernels.hpp"
#include "predose/errors.hpp"
#include "predose/extrapolate.hpp"
#include "predose/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace predose {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.9189385332046727418; // log(sqrt(2*pi))

double norm_lpdf(double y, double mean, double sd) {
    const double z = (y - mean) / sd;
    return -std::log(sd) - kLogSqrt2Pi - 0.5 * z * z;
}

// log density of Student-t(df) at z (unit scale).
double t_lpdf(double z, double df) {
    return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
           0.5 * std::log(df * 3.14159265358979323846) -
           0.5 * (df + 1.0) * std::log1p(z * z / df);
}

const char* mu_name(ReKind k) {
    switch (k) {
    case ReKind::cl: return "mu_cl";
    case ReKind::v: return "mu_v";
    case ReKind::ic50: return "mu_ic50";
    case ReKind::ke: return "mu_ke";
    }
    throw DomainError("unknown random-effect kind");
}

const char* omega_name(ReKind k) {
    switch (k) {
    case ReKind::cl: return "omega_cl";
    case ReKind::v: return "omega_v";
    case ReKind::ic50: return "omega_ic50";
    case ReKind::ke: return "omega_ke";
    }
    throw DomainError("unknown random-effect kind");
}

} // namespace

std::string to_string(ReKind k) {
    switch (k) {
    case ReKind::cl: return "cl";
    case ReKind::v: return "v";
    case ReKind::ic50: return "ic50";
    case ReKind::ke: return "ke";
    }
    throw DomainError("unknown random-effect kind");
}

double Prior::median() const {
    if (kind == Kind::lognormal) return std::exp(a);
    return b * student_t_quantile(0.75, a);
}

PriorSpec PriorSpec::defaults() {
    PriorSpec s;
    s.entries["ka"] = Prior::lognormal(-1.0, 2.5);
    s.entries["mu_cl"] = Prior::lognormal(-1.0, 2.5);
    s.entries["mu_v"] = Prior::lognormal(-1.0, 2.5);
    s.entries["mu_ic50"] = Prior::lognormal(0.0, 2.5);
    s.entries["mu_ke"] = Prior::lognormal(0.0, 2.5);
    for (const char* name : {"omega_cl", "omega_v", "omega_ic50", "omega_ke", "sigma_c",
                             "sigma_i"}) {
        s.entries[name] = Prior::half_student_t(3.0, 2.8);
    }
    return s;
}

const Prior& PriorSpec::require(const std::string& name) const {
    const auto it = entries.find(name);
    if (it == entries.end()) throw ConfigError("PriorSpec: no prior for parameter " + name);
    return it->second;
}

bool ModelSpec::has_outcome(Outcome o) const {
    return std::find(outcomes.begin(), outcomes.end(), o) != outcomes.end();
}

bool ModelSpec::has_re(ReKind k) const {
    return std::find(random_effects.begin(), random_effects.end(), k) != random_effects.end();
}

void ModelSpec::validate(bool destructive_design) const {
    if (outcomes.empty()) throw ConfigError("ModelSpec: no outcomes");
    if (destructive_design) {
        for (ReKind k : random_effects) {
            if (k != ReKind::cl) {
                throw ConfigError(
                    "ModelSpec: destructive designs support random effects on CL only");
            }
        }
    }
    if (!(i_max > 0.0 && i_max <= 1.0)) throw ConfigError("ModelSpec: i_max must lie in (0,1]");
    if (!has_outcome(Outcome::inhibition)) {
        for (ReKind k : random_effects) {
            if (k == ReKind::ic50 || k == ReKind::ke) {
                throw ConfigError("ModelSpec: PD random effects without inhibition outcome");
            }
        }
    }
}

ModelSpec ModelSpec::standard(const StudyDesign& design, const std::vector<Outcome>& outcomes,
                              const std::map<std::string, double>& pins) {
    ModelSpec spec;
    spec.outcomes = outcomes;
    const bool with_pd =
        std::find(outcomes.begin(), outcomes.end(), Outcome::inhibition) != outcomes.end();
    if (design.destructive) {
        spec.random_effects = {ReKind::cl};
        spec.fixed["omega_v"] = pins.count("omega_v") ? pins.at("omega_v") : 0.7;
        if (pins.count("sigma_c")) spec.fixed["sigma_c"] = pins.at("sigma_c");
        if (with_pd) {
            spec.fixed["omega_ic50"] = pins.count("omega_ic50") ? pins.at("omega_ic50") : 0.7;
            spec.fixed["omega_ke"] = pins.count("omega_ke") ? pins.at("omega_ke") : 0.7;
            if (pins.count("sigma_i")) spec.fixed["sigma_i"] = pins.at("sigma_i");
        }
    } else {
        spec.random_effects = {ReKind::cl, ReKind::v};
        if (with_pd) {
            spec.random_effects.push_back(ReKind::ic50);
            spec.random_effects.push_back(ReKind::ke);
        }
    }
    spec.validate(design.destructive);
    return spec;
}

int ParamLayout::pop_index(const std::string& name) const {
    for (std::size_t i = 0; i < pop_names.size(); ++i) {
        if (pop_names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

int ParamLayout::re_index(ReKind k, int subject) const {
    for (std::size_t b = 0; b < re_kinds.size(); ++b) {
        if (re_kinds[b] == k) {
            return n_pop() + static_cast<int>(b) * n_subjects + subject;
        }
    }
    throw DomainError("ParamLayout: no random effect of that kind");
}

PkModel::PkModel(ModelSpec spec, PriorSpec priors, const Dataset& data)
    : spec_(std::move(spec)), priors_(std::move(priors)) {
    ingest(data);
    build_layout();
    for (const auto& name : layout_.pop_names) {
        static_cast<void>(priors_.require(name)); // fail early on missing priors
    }
    for (const auto& [name, value] : spec_.fixed) {
        if (!(value > 0.0)) throw ConfigError("ModelSpec: pinned " + name + " must be > 0");
    }
}

void PkModel::build_layout() {
    const bool with_conc = spec_.has_outcome(Outcome::concentration);
    const bool with_pd = spec_.has_outcome(Outcome::inhibition);
    std::vector<std::string> structural = {"ka", "mu_cl", "mu_v"};
    if (spec_.has_re(ReKind::cl)) structural.emplace_back("omega_cl");
    if (spec_.has_re(ReKind::v)) structural.emplace_back("omega_v");
    if (with_conc) structural.emplace_back("sigma_c");
    if (with_pd) {
        structural.emplace_back("mu_ic50");
        structural.emplace_back("mu_ke");
        if (spec_.has_re(ReKind::ic50)) structural.emplace_back("omega_ic50");
        if (spec_.has_re(ReKind::ke)) structural.emplace_back("omega_ke");
        structural.emplace_back("sigma_i");
    }
    layout_.pop_names.clear();
    for (const auto& name : structural) {
        if (!spec_.fixed.count(name)) layout_.pop_names.push_back(name);
    }
    layout_.re_kinds = spec_.random_effects;
    layout_.n_subjects = static_cast<int>(subj_first_.size());
}

void PkModel::ingest(const Dataset& data) {
    // subjects keep their order of first appearance; rows stay grouped
    std::map<int, int> subject_slot;
    std::vector<std::vector<int>> per_subject;
    for (int o = 0; o < static_cast<int>(data.records.size()); ++o) {
        const auto& r = data.records[static_cast<std::size_t>(o)];
        auto [it, inserted] = subject_slot.try_emplace(r.subject_id,
                                                       static_cast<int>(per_subject.size()));
        if (inserted) per_subject.emplace_back();
        per_subject[static_cast<std::size_t>(it->second)].push_back(o);
    }
    for (const auto& rows : per_subject) {
        subj_first_.push_back(static_cast<int>(obs_y_.size()));
        subj_count_.push_back(static_cast<int>(rows.size()));
        for (int o : rows) {
            const auto& r = data.records[static_cast<std::size_t>(o)];
            if (!(r.time_h > 0.0)) throw ConfigError("PkModel: observation times must be > 0");
            if (!(r.dose_mg > 0.0)) throw ConfigError("PkModel: doses must be > 0");
            obs_subject_.push_back(static_cast<int>(subj_first_.size()) - 1);
            obs_time_.push_back(r.time_h);
            obs_dose_.push_back(r.dose_mg);
            if (r.outcome == Outcome::concentration) {
                if (!spec_.has_outcome(Outcome::concentration)) {
                    throw ConfigError("PkModel: concentration data without that outcome");
                }
                if (!(r.value > 0.0)) {
                    throw ConfigError("PkModel: concentration values must be > 0");
                }
                obs_is_conc_.push_back(true);
                obs_y_.push_back(std::log(r.value));
            } else {
                if (!spec_.has_outcome(Outcome::inhibition)) {
                    throw ConfigError("PkModel: inhibition data without that outcome");
                }
                if (!(r.value > 0.0 && r.value < 1.0)) {
                    throw ConfigError("PkModel: inhibition values must lie in (0,1)");
                }
                obs_is_conc_.push_back(false);
                obs_y_.push_back(std::log(r.value / (1.0 - r.value)));
            }
        }
    }
}

namespace {

// Observation model means, scalar-generic. Slots: ka, cl, v, ic50, ke.
template <class S>
S conc_mean(const S& t, const S& dose, const S& ka, const S& cl, const S& v) {
    using detail::log;
    return log(detail::conc_kernel(t, dose, ka, cl, v));
}

template <class S>
S inhib_mean(const S& t, const S& dose, const S& ka, const S& cl, const S& v, const S& ic50,
             const S& ke, double i_max) {
    using detail::log;
    using detail::log1p;
    const S ce = detail::ce_kernel(t, dose, ka, cl, v, ke);
    const S r = S(i_max) * ce / (ce + ic50);
    return log1p(-r) - log(r); // logit(1 - r)
}

inline double conc_mean(double t, double dose, double ka, double cl, double v) {
    return std::log(detail::conc_kernel(t, dose, ka, cl, v));
}

inline double inhib_mean(double t, double dose, double ka, double cl, double v, double ic50,
                         double ke, double i_max) {
    const double ce = detail::ce_kernel(t, dose, ka, cl, v, ke);
    const double r = i_max * ce / (ce + ic50);
    return std::log1p(-r) - std::log(r);
}

} // namespace

// Resolves current values of the population parameters (sampled or pinned).
struct PopValues {
    double ka = 0.0, mu_cl = 0.0, mu_v = 0.0;
    double omega_cl = 0.0, omega_v = 0.0;
    double sigma_c = 0.0, sigma_i = 0.0;
    double mu_ic50 = 0.0, mu_ke = 0.0;
    double omega_ic50 = 0.0, omega_ke = 0.0;

    static PopValues resolve(const ModelSpec& spec, const ParamLayout& layout,
                             std::span<const double> theta) {
        PopValues pv;
        const auto get = [&](const char* name, double fallback) {
            const int idx = layout.pop_index(name);
            if (idx >= 0) return std::exp(theta[static_cast<std::size_t>(idx)]);
            const auto it = spec.fixed.find(name);
            return it != spec.fixed.end() ? it->second : fallback;
        };
        pv.ka = get("ka", 0.0);
        pv.mu_cl = get("mu_cl", 0.0);
        pv.mu_v = get("mu_v", 0.0);
        pv.omega_cl = get("omega_cl", 0.0);
        pv.omega_v = get("omega_v", 0.0);
        pv.sigma_c = get("sigma_c", 0.0);
        pv.sigma_i = get("sigma_i", 0.0);
        pv.mu_ic50 = get("mu_ic50", 0.0);
        pv.mu_ke = get("mu_ke", 0.0);
        pv.omega_ic50 = get("omega_ic50", 0.0);
        pv.omega_ke = get("omega_ke", 0.0);
        return pv;
    }

    [[nodiscard]] double mu_of(ReKind k) const {
        switch (k) {
        case ReKind::cl: return mu_cl;
        case ReKind::v: return mu_v;
        case ReKind::ic50: return mu_ic50;
        case ReKind::ke: return mu_ke;
        }
        return 0.0;
    }
    [[nodiscard]] double omega_of(ReKind k) const {
        switch (k) {
        case ReKind::cl: return omega_cl;
        case ReKind::v: return omega_v;
        case ReKind::ic50: return omega_ic50;
        case ReKind::ke: return omega_ke;
        }
        return 0.0;
    }
};

double log_joint(const PkModel& model, std::span<const double> theta) {
    return model.log_density(theta);
}

double PkModel::log_density(std::span<const double> theta) const {
    if (static_cast<int>(theta.size()) != layout_.dim()) {
        throw DomainError("PkModel::log_density: wrong parameter dimension");
    }
    for (double t : theta) {
        if (!std::isfinite(t)) return kNegInf;
    }
    const PopValues pv = PopValues::resolve(spec_, layout_, theta);
    double lp = 0.0;

    // priors (sampled coordinates are logs; lognormal priors become plain
    // normals, half-t priors carry the exp Jacobian)
    for (int p = 0; p < layout_.n_pop(); ++p) {
        const auto& prior = priors_.require(layout_.pop_names[static_cast<std::size_t>(p)]);
        const double u = theta[static_cast<std::size_t>(p)];
        if (prior.kind == Prior::Kind::lognormal) {
            lp += norm_lpdf(u, prior.a, prior.b);
        } else {
            const double x = std::exp(u);
            lp += std::log(2.0) + t_lpdf(x / prior.b, prior.a) - std::log(prior.b) + u;
        }
    }

    // random-effect densities
    for (std::size_t b = 0; b < layout_.re_kinds.size(); ++b) {
        const ReKind k = layout_.re_kinds[b];
        const double m = std::log(pv.mu_of(k));
        const double w = pv.omega_of(k);
        if (!(w > 0.0)) return kNegInf;
        for (int i = 0; i < layout_.n_subjects; ++i) {
            lp += norm_lpdf(theta[static_cast<std::size_t>(layout_.re_index(k, i))], m, w);
        }
    }

    // residual likelihood
    const bool re_cl = spec_.has_re(ReKind::cl);
    const bool re_v = spec_.has_re(ReKind::v);
    const bool re_ic50 = spec_.has_re(ReKind::ic50);
    const bool re_ke = spec_.has_re(ReKind::ke);
    for (int i = 0; i < layout_.n_subjects; ++i) {
        const double cl =
            re_cl ? std::exp(theta[static_cast<std::size_t>(layout_.re_index(ReKind::cl, i))])
                  : pv.mu_cl;
        const double v =
            re_v ? std::exp(theta[static_cast<std::size_t>(layout_.re_index(ReKind::v, i))])
                 : pv.mu_v;
        double ic50 = pv.mu_ic50;
        double ke = pv.mu_ke;
        if (re_ic50) {
            ic50 = std::exp(theta[static_cast<std::size_t>(layout_.re_index(ReKind::ic50, i))]);
        }
        if (re_ke) {
            ke = std::exp(theta[static_cast<std::size_t>(layout_.re_index(ReKind::ke, i))]);
        }
        const int first = subj_first_[static_cast<std::size_t>(i)];
        const int count = subj_count_[static_cast<std::size_t>(i)];
        for (int o = first; o < first + count; ++o) {
            const auto oi = static_cast<std::size_t>(o);
            double mean, sigma;
            if (obs_is_conc_[oi]) {
                mean = conc_mean(obs_time_[oi], obs_dose_[oi], pv.ka, cl, v);
                sigma = pv.sigma_c;
            } else {
                mean = inhib_mean(obs_time_[oi], obs_dose_[oi], pv.ka, cl, v, ic50, ke,
                                  spec_.i_max);
                sigma = pv.sigma_i;
            }
            if (!(sigma > 0.0)) return kNegInf;
            lp += norm_lpdf(obs_y_[oi], mean, sigma);
        }
    }
    return std::isfinite(lp) ? lp : kNegInf;
}

void PkModel::gradient(std::span<const double> theta, std::span<double> out) const {
    using D5 = detail::Dual<5>;
    if (static_cast<int>(theta.size()) != layout_.dim() || out.size() != theta.size()) {
        throw DomainError("PkModel::gradient: wrong dimension");
    }
    std::fill(out.begin(), out.end(), 0.0);
    const PopValues pv = PopValues::resolve(spec_, layout_, theta);

    for (int p = 0; p < layout_.n_pop(); ++p) {
        const auto& prior = priors_.require(layout_.pop_names[static_cast<std::size_t>(p)]);
        const double u = theta[static_cast<std::size_t>(p)];
        if (prior.kind == Prior::Kind::lognormal) {
            out[static_cast<std::size_t>(p)] += -(u - prior.a) / (prior.b * prior.b);
        } else {
            const double z = std::exp(u) / prior.b;
            out[static_cast<std::size_t>(p)] +=
                1.0 - (prior.a + 1.0) * z * z / (prior.a + z * z);
        }
    }

    for (std::size_t b = 0; b < layout_.re_kinds.size(); ++b) {
        const ReKind k = layout_.re_kinds[b];
        const double m = std::log(pv.mu_of(k));
        const double w = pv.omega_of(k);
        const int i_mu = layout_.pop_index(mu_name(k));
        const int i_om = layout_.pop_index(omega_name(k));
        for (int i = 0; i < layout_.n_subjects; ++i) {
            const int idx = layout_.re_index(k, i);
            const double diff = theta[static_cast<std::size_t>(idx)] - m;
            out[static_cast<std::size_t>(idx)] += -diff / (w * w);
            if (i_mu >= 0) out[static_cast<std::size_t>(i_mu)] += diff / (w * w);
            if (i_om >= 0) {
                out[static_cast<std::size_t>(i_om)] += -1.0 + diff * diff / (w * w);
            }
        }
    }

    // likelihood: per-observation dual propagation through the model mean
    const int i_ka = layout_.pop_index("ka");
    const int i_sc = layout_.pop_index("sigma_c");
    const int i_si = layout_.pop_index("sigma_i");
    const bool re_cl = spec_.has_re(ReKind::cl);
    const bool re_v = spec_.has_re(ReKind::v);
    const bool re_ic50 = spec_.has_re(ReKind::ic50);
    const bool re_ke = spec_.has_re(ReKind::ke);
    for (int i = 0; i < layout_.n_subjects; ++i) {
        // slot -> global coordinate (or -1 for pinned/non-sampled values)
        int slot_idx[5];
        slot_idx[0] = i_ka;
        slot_idx[1] = re_cl ? layout_.re_index(ReKind::cl, i) : layout_.pop_index("mu_cl");
        slot_idx[2] = re_v ? layout_.re_index(ReKind::v, i) : layout_.pop_index("mu_v");
        slot_idx[3] = re_ic50 ? layout_.re_index(ReKind::ic50, i) : layout_.pop_index("mu_ic50");
        slot_idx[4] = re_ke ? layout_.re_index(ReKind::ke, i) : layout_.pop_index("mu_ke");

        const double cl_i =
            re_cl ? std::exp(theta[static_cast<std::size_t>(layout_.re_index(ReKind::cl, i))])
                  : pv.mu_cl;
        const double v_i =
            re_v ? std::exp(theta[static_cast<std::size_t>(layout_.re_index(ReKind::v, i))])
                 : pv.mu_v;
        double ic50_i = pv.mu_ic50;
        double ke_i = pv.mu_ke;
        if (re_ic50) {
            ic50_i = std::exp(theta[static_cast<std::size_t>(layout_.re_index(ReKind::ic50, i))]);
        }
        if (re_ke) {
            ke_i = std::exp(theta[static_cast<std::size_t>(layout_.re_index(ReKind::ke, i))]);
        }
        // seed duals in log-scale coordinates: d(exp u)/du = exp u
        const auto seed = [](double x, int slot) {
            D5 d(x);
            d.d[static_cast<std::size_t>(slot)] = x;
            return d;
        };
        const D5 ka_d = seed(pv.ka, 0);
        const D5 cl_d = seed(cl_i, 1);
        const D5 v_d = seed(v_i, 2);
        const D5 ic50_d = seed(ic50_i, 3);
        const D5 ke_d = seed(ke_i, 4);

        const int first = subj_first_[static_cast<std::size_t>(i)];
        const int count = subj_count_[static_cast<std::size_t>(i)];
        for (int o = first; o < first + count; ++o) {
            const auto oi = static_cast<std::size_t>(o);
            const D5 t(obs_time_[oi]);
            const D5 dose(obs_dose_[oi]);
            D5 mean;
            double sigma;
            int i_sigma;
            if (obs_is_conc_[oi]) {
                mean = conc_mean(t, dose, ka_d, cl_d, v_d);
                sigma = pv.sigma_c;
                i_sigma = i_sc;
            } else {
                mean = inhib_mean(t, dose, ka_d, cl_d, v_d, ic50_d, ke_d, spec_.i_max);
                sigma = pv.sigma_i;
                i_sigma = i_si;
            }
            const double r = (obs_y_[oi] - mean.val) / sigma;
            for (int s = 0; s < 5; ++s) {
                if (slot_idx[s] >= 0) {
                    out[static_cast<std::size_t>(slot_idx[s])] +=
                        r / sigma * mean.d[static_cast<std::size_t>(s)];
                }
            }
            if (i_sigma >= 0) {
                out[static_cast<std::size_t>(i_sigma)] += -1.0 + r * r;
            }
        }
    }
}

std::vector<double> PkModel::initial_point(Rng& rng) const {
    std::vector<double> theta(static_cast<std::size_t>(layout_.dim()), 0.0);
    for (int p = 0; p < layout_.n_pop(); ++p) {
        theta[static_cast<std::size_t>(p)] =
            std::log(priors_.require(layout_.pop_names[static_cast<std::size_t>(p)]).median());
    }
    const PopValues pv = PopValues::resolve(spec_, layout_, theta);
    for (std::size_t b = 0; b < layout_.re_kinds.size(); ++b) {
        const ReKind k = layout_.re_kinds[b];
        const double m = std::log(pv.mu_of(k));
        for (int i = 0; i < layout_.n_subjects; ++i) {
            theta[static_cast<std::size_t>(layout_.re_index(k, i))] = m + 0.1 * rng.normal();
        }
    }
    return theta;
}

std::vector<std::string> PkModel::reported_names() const {
    std::vector<std::string> names = layout_.pop_names;
    for (const auto& [name, value] : spec_.fixed) names.push_back(name);
    return names;
}

std::vector<double> PkModel::reported_values(std::span<const double> theta) const {
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(layout_.n_pop()) + spec_.fixed.size());
    for (int p = 0; p < layout_.n_pop(); ++p) {
        vals.push_back(std::exp(theta[static_cast<std::size_t>(p)]));
    }
    for (const auto& [name, value] : spec_.fixed) vals.push_back(value);
    return vals;
}

// Stateful single-coordinate evaluator backing the Gibbs sweep. Keeps the
// model means, per-subject likelihood sums, random-effect density totals
// and prior terms cached so one proposal touches only what it changes.
class PkMwgEvaluator final : public CoordinateEvaluator {
public:
    PkMwgEvaluator(const PkModel& m, std::span<const double> theta)
        : m_(m), layout_(m.layout()), theta_(theta.begin(), theta.end()) {
        const int n = layout_.n_subjects;
        cl_.resize(static_cast<std::size_t>(n));
        v_.resize(static_cast<std::size_t>(n));
        ic50_.resize(static_cast<std::size_t>(n));
        ke_.resize(static_cast<std::size_t>(n));
        mean_.resize(m_.obs_y_.size());
        subj_ll_.resize(static_cast<std::size_t>(n));
        staged_means_.resize(m_.obs_y_.size());
        staged_subj_ll_.resize(static_cast<std::size_t>(n));
        rebuild();
    }

    [[nodiscard]] double log_density() const override { return total_; }

    double delta(int j, double x) override;
    void commit() override;

private:
    enum class Case { pop_all_means, pop_inhib_means, pop_density, pop_sigma, re_coord };

    void rebuild();
    void compute_subject_means(int i, const PopValues& pv, double cl, double v, double ic50,
                               double ke, bool only_inhib, std::vector<double>& means) const;
    [[nodiscard]] double subject_obs_ll(int i, const std::vector<double>& means, double sigma_c,
                                        double sigma_i) const;
    [[nodiscard]] double prior_term(int p, double u) const;
    [[nodiscard]] double re_density(std::size_t block, double m, double w) const;
    void refresh_total() {
        total_ = obs_ll_;
        for (double t : prior_) total_ += t;
        for (double t : re_den_) total_ += t;
        if (!std::isfinite(total_)) total_ = kNegInf;
    }

    const PkModel& m_;
    const ParamLayout& layout_;
    std::vector<double> theta_;
    PopValues pv_;
    std::vector<double> cl_, v_, ic50_, ke_; // individual naturals
    std::vector<double> mean_;
    std::vector<double> subj_ll_;
    double obs_ll_ = 0.0;
    std::vector<double> re_den_;
    std::vector<double> prior_;
    double total_ = 0.0;

    // staged proposal
    int staged_j_ = -1;
    double staged_x_ = 0.0;
    Case staged_case_ = Case::pop_density;
    std::vector<double> staged_means_;
    std::vector<double> staged_subj_ll_;
    double staged_obs_ll_ = 0.0;
    double staged_prior_ = 0.0;
    double staged_re_den_ = 0.0;
    std::size_t staged_block_ = 0;
    int staged_subject_ = -1;
    double staged_total_ = 0.0;
};

void PkMwgEvaluator::rebuild() {
    pv_ = PopValues::resolve(m_.spec(), layout_, theta_);
    const bool re_cl = m_.spec().has_re(ReKind::cl);
    const bool re_v = m_.spec().has_re(ReKind::v);
    const bool re_ic50 = m_.spec().has_re(ReKind::ic50);
    const bool re_ke = m_.spec().has_re(ReKind::ke);
    for (int i = 0; i < layout_.n_subjects; ++i) {
        const auto si = static_cast<std::size_t>(i);
        cl_[si] = re_cl ? std::exp(theta_[static_cast<std::size_t>(
                              layout_.re_index(ReKind::cl, i))])
                        : pv_.mu_cl;
        v_[si] = re_v ? std::exp(theta_[static_cast<std::size_t>(layout_.re_index(ReKind::v, i))])
                      : pv_.mu_v;
        ic50_[si] = re_ic50 ? std::exp(theta_[static_cast<std::size_t>(
                                  layout_.re_index(ReKind::ic50, i))])
                            : pv_.mu_ic50;
        ke_[si] = re_ke ? std::exp(theta_[static_cast<std::size_t>(
                              layout_.re_index(ReKind::ke, i))])
                        : pv_.mu_ke;
    }
    obs_ll_ = 0.0;
    for (int i = 0; i < layout_.n_subjects; ++i) {
        const auto si = static_cast<std::size_t>(i);
        compute_subject_means(i, pv_, cl_[si], v_[si], ic50_[si], ke_[si], false, mean_);
        subj_ll_[si] = subject_obs_ll(i, mean_, pv_.sigma_c, pv_.sigma_i);
        obs_ll_ += subj_ll_[si];
    }
    prior_.assign(static_cast<std::size_t>(layout_.n_pop()), 0.0);
    for (int p = 0; p < layout_.n_pop(); ++p) {
        prior_[static_cast<std::size_t>(p)] = prior_term(p, theta_[static_cast<std::size_t>(p)]);
    }
    re_den_.assign(layout_.re_kinds.size(), 0.0);
    for (std::size_t b = 0; b < layout_.re_kinds.size(); ++b) {
        const ReKind k = layout_.re_kinds[b];
        re_den_[b] = re_density(b, std::log(pv_.mu_of(k)), pv_.omega_of(k));
    }
    refresh_total();
}

void PkMwgEvaluator::compute_subject_means(int i, const PopValues& pv, double cl, double v,
                                           double ic50, double ke, bool only_inhib,
                                           std::vector<double>& means) const {
    const int first = m_.subj_first_[static_cast<std::size_t>(i)];
    const int count = m_.subj_count_[static_cast<std::size_t>(i)];
    for (int o = first; o < first + count; ++o) {
        const auto oi = static_cast<std::size_t>(o);
        if (m_.obs_is_conc_[oi]) {
            if (only_inhib) {
                means[oi] = mean_[oi];
            } else {
                means[oi] = conc_mean(m_.obs_time_[oi], m_.obs_dose_[oi], pv.ka, cl, v);
            }
        } else {
            means[oi] = inhib_mean(m_.obs_time_[oi], m_.obs_dose_[oi], pv.ka, cl, v, ic50, ke,
                                   m_.spec().i_max);
        }
    }
}

double PkMwgEvaluator::subject_obs_ll(int i, const std::vector<double>& means, double sigma_c,
                                      double sigma_i) const {
    const int first = m_.subj_first_[static_cast<std::size_t>(i)];
    const int count = m_.subj_count_[static_cast<std::size_t>(i)];
    double acc = 0.0;
    for (int o = first; o < first + count; ++o) {
        const auto oi = static_cast<std::size_t>(o);
        const double sigma = m_.obs_is_conc_[oi] ? sigma_c : sigma_i;
        acc += norm_lpdf(m_.obs_y_[oi], means[oi], sigma);
    }
    return acc;
}

double PkMwgEvaluator::prior_term(int p, double u) const {
    const auto& prior = m_.priors().require(layout_.pop_names[static_cast<std::size_t>(p)]);
    if (prior.kind == Prior::Kind::lognormal) {
        return norm_lpdf(u, prior.a, prior.b);
    }
    const double x = std::exp(u);
    return std::log(2.0) + t_lpdf(x / prior.b, prior.a) - std::log(prior.b) + u;
}

double PkMwgEvaluator::re_density(std::size_t block, double m, double w) const {
    const ReKind k = layout_.re_kinds[block];
    double acc = 0.0;
    for (int i = 0; i < layout_.n_subjects; ++i) {
        acc += norm_lpdf(theta_[static_cast<std::size_t>(layout_.re_index(k, i))], m, w);
    }
    return acc;
}

double PkMwgEvaluator::delta(int j, double x) {
    staged_j_ = j;
    staged_x_ = x;
    if (!std::isfinite(x)) return kNegInf;

    if (j < layout_.n_pop()) {
        const std::string& name = layout_.pop_names[static_cast<std::size_t>(j)];
        staged_prior_ = prior_term(j, x);
        double d = staged_prior_ - prior_[static_cast<std::size_t>(j)];
        const double nat = std::exp(x);

        PopValues pv = pv_;
        if (name == "ka") pv.ka = nat;
        else if (name == "mu_cl") pv.mu_cl = nat;
        else if (name == "mu_v") pv.mu_v = nat;
        else if (name == "omega_cl") pv.omega_cl = nat;
        else if (name == "omega_v") pv.omega_v = nat;
        else if (name == "sigma_c") pv.sigma_c = nat;
        else if (name == "sigma_i") pv.sigma_i = nat;
        else if (name == "mu_ic50") pv.mu_ic50 = nat;
        else if (name == "mu_ke") pv.mu_ke = nat;
        else if (name == "omega_ic50") pv.omega_ic50 = nat;
        else if (name == "omega_ke") pv.omega_ke = nat;

        const auto density_only = [&](ReKind k) {
            for (std::size_t b = 0; b < layout_.re_kinds.size(); ++b) {
                if (layout_.re_kinds[b] == k) {
                    staged_case_ = Case::pop_density;
                    staged_block_ = b;
                    staged_re_den_ = re_density(b, std::log(pv.mu_of(k)), pv.omega_of(k));
                    return staged_re_den_ - re_den_[b];
                }
            }
            return kNegInf; // omega of a kind without random effects is never sampled
        };

        if (name == "omega_cl") d += density_only(ReKind::cl);
        else if (name == "omega_v") d += density_only(ReKind::v);
        else if (name == "omega_ic50") d += density_only(ReKind::ic50);
        else if (name == "omega_ke") d += density_only(ReKind::ke);
        else if (name == "mu_cl" && m_.spec().has_re(ReKind::cl)) d += density_only(ReKind::cl);
        else if (name == "mu_v" && m_.spec().has_re(ReKind::v)) d += density_only(ReKind::v);
        else if (name == "mu_ic50" && m_.spec().has_re(ReKind::ic50)) {
            d += density_only(ReKind::ic50);
        } else if (name == "mu_ke" && m_.spec().has_re(ReKind::ke)) {
            d += density_only(ReKind::ke);
        } else if (name == "sigma_c" || name == "sigma_i") {
            staged_case_ = Case::pop_sigma;
            staged_obs_ll_ = 0.0;
            for (int i = 0; i < layout_.n_subjects; ++i) {
                staged_subj_ll_[static_cast<std::size_t>(i)] =
                    subject_obs_ll(i, mean_, pv.sigma_c, pv.sigma_i);
                staged_obs_ll_ += staged_subj_ll_[static_cast<std::size_t>(i)];
            }
            d += staged_obs_ll_ - obs_ll_;
        } else {
            // ka, or a location parameter entering the likelihood directly
            const bool only_inhib = name == "mu_ic50" || name == "mu_ke";
            staged_case_ = only_inhib ? Case::pop_inhib_means : Case::pop_all_means;
            staged_obs_ll_ = 0.0;
            for (int i = 0; i < layout_.n_subjects; ++i) {
                const auto si = static_cast<std::size_t>(i);
                const double cl = name == "mu_cl" ? nat : cl_[si];
                const double v = name == "mu_v" ? nat : v_[si];
                const double ic50 = name == "mu_ic50" ? nat : ic50_[si];
                const double ke = name == "mu_ke" ? nat : ke_[si];
                compute_subject_means(i, pv, cl, v, ic50, ke, only_inhib, staged_means_);
                staged_subj_ll_[si] = subject_obs_ll(i, staged_means_, pv.sigma_c, pv.sigma_i);
                staged_obs_ll_ += staged_subj_ll_[si];
            }
            d += staged_obs_ll_ - obs_ll_;
        }
        return std::isfinite(d) ? d : kNegInf;
    }

    // random-effect coordinate
    staged_case_ = Case::re_coord;
    const int offset = j - layout_.n_pop();
    const std::size_t block = static_cast<std::size_t>(offset) /
                              static_cast<std::size_t>(layout_.n_subjects);
    const int i = offset % layout_.n_subjects;
    staged_block_ = block;
    staged_subject_ = i;
    const ReKind k = layout_.re_kinds[block];
    const double m = std::log(pv_.mu_of(k));
    const double w = pv_.omega_of(k);
    double d = norm_lpdf(x, m, w) - norm_lpdf(theta_[static_cast<std::size_t>(j)], m, w);

    const auto si = static_cast<std::size_t>(i);
    const double nat = std::exp(x);
    const double cl = k == ReKind::cl ? nat : cl_[si];
    const double v = k == ReKind::v ? nat : v_[si];
    const double ic50 = k == ReKind::ic50 ? nat : ic50_[si];
    const double ke = k == ReKind::ke ? nat : ke_[si];
    const bool only_inhib = k == ReKind::ic50 || k == ReKind::ke;
    compute_subject_means(i, pv_, cl, v, ic50, ke, only_inhib, staged_means_);
    staged_subj_ll_[si] = subject_obs_ll(i, staged_means_, pv_.sigma_c, pv_.sigma_i);
    d += staged_subj_ll_[si] - subj_ll_[si];
    return std::isfinite(d) ? d : kNegInf;
}

void PkMwgEvaluator::commit() {
    const int j = staged_j_;
    const double x = staged_x_;
    theta_[static_cast<std::size_t>(j)] = x;

    if (staged_case_ == Case::re_coord) {
        const int i = staged_subject_;
        const auto si = static_cast<std::size_t>(i);
        const ReKind k = layout_.re_kinds[staged_block_];
        const double nat = std::exp(x);
        if (k == ReKind::cl) cl_[si] = nat;
        else if (k == ReKind::v) v_[si] = nat;
        else if (k == ReKind::ic50) ic50_[si] = nat;
        else ke_[si] = nat;
        const double m = std::log(pv_.mu_of(k));
        const double w = pv_.omega_of(k);
        re_den_[staged_block_] = re_density(staged_block_, m, w);
        const int first = m_.subj_first_[si];
        const int count = m_.subj_count_[si];
        for (int o = first; o < first + count; ++o) {
            mean_[static_cast<std::size_t>(o)] = staged_means_[static_cast<std::size_t>(o)];
        }
        obs_ll_ += staged_subj_ll_[si] - subj_ll_[si];
        subj_ll_[si] = staged_subj_ll_[si];
        refresh_total();
        return;
    }

    // population coordinate
    const std::string& name = layout_.pop_names[static_cast<std::size_t>(j)];
    prior_[static_cast<std::size_t>(j)] = staged_prior_;
    const double nat = std::exp(x);
    if (name == "ka") pv_.ka = nat;
    else if (name == "mu_cl") pv_.mu_cl = nat;
    else if (name == "mu_v") pv_.mu_v = nat;
    else if (name == "omega_cl") pv_.omega_cl = nat;
    else if (name == "omega_v") pv_.omega_v = nat;
    else if (name == "sigma_c") pv_.sigma_c = nat;
    else if (name == "sigma_i") pv_.sigma_i = nat;
    else if (name == "mu_ic50") pv_.mu_ic50 = nat;
    else if (name == "mu_ke") pv_.mu_ke = nat;
    else if (name == "omega_ic50") pv_.omega_ic50 = nat;
    else if (name == "omega_ke") pv_.omega_ke = nat;

    switch (staged_case_) {
    case Case::pop_density:
        re_den_[staged_block_] = staged_re_den_;
        break;
    case Case::pop_sigma:
        subj_ll_ = staged_subj_ll_;
        obs_ll_ = staged_obs_ll_;
        break;
    case Case::pop_all_means:
    case Case::pop_inhib_means:
        mean_.swap(staged_means_);
        subj_ll_ = staged_subj_ll_;
        obs_ll_ = staged_obs_ll_;
        // a location parameter without random effects also moves the
        // cached individual values
        if (name == "mu_cl" && !m_.spec().has_re(ReKind::cl)) cl_.assign(cl_.size(), nat);
        if (name == "mu_v" && !m_.spec().has_re(ReKind::v)) v_.assign(v_.size(), nat);
        if (name == "mu_ic50" && !m_.spec().has_re(ReKind::ic50)) {
            ic50_.assign(ic50_.size(), nat);
        }
        if (name == "mu_ke" && !m_.spec().has_re(ReKind::ke)) ke_.assign(ke_.size(), nat);
        break;
    case Case::re_coord:
        break;
    }
    refresh_total();
}

std::unique_ptr<CoordinateEvaluator>
PkModel::make_evaluator(std::span<const double> theta) const {
    return std::make_unique<PkMwgEvaluator>(*this, theta);
}

std::vector<bool> PkModel::lower_bounded_coords() const {
    std::vector<bool> out(static_cast<std::size_t>(layout_.dim()), false);
    for (int p = 0; p < layout_.n_pop(); ++p) {
        const auto& prior = priors_.require(layout_.pop_names[static_cast<std::size_t>(p)]);
        out[static_cast<std::size_t>(p)] = prior.kind == Prior::Kind::half_student_t;
    }
    return out;
}

PriorSpec sequential_prior(const PosteriorDraws& prev, double weight_from_kg,
                           double weight_to_kg, const PriorSpec& base) {
    if (!prev.has("mu_cl") || !prev.has("mu_v")) {
        throw MappingError("sequential_prior: previous posterior must contain mu_cl and mu_v");
    }
    PriorSpec out = base;
    out.entries.at("mu_cl").a =
        std::log(allometric_cl(prev.posterior_mean("mu_cl"), weight_from_kg, weight_to_kg));
    out.entries.at("mu_v").a =
        std::log(allometric_v(prev.posterior_mean("mu_v"), weight_from_kg, weight_to_kg));
    for (const char* name : {"ka", "mu_ic50", "mu_ke"}) {
        if (prev.has(name)) out.entries.at(name).a = std::log(prev.posterior_mean(name));
    }
    return out;
}

} // namespace predose
