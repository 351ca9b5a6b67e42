#include "predose/draws.hpp"

#include "predose/errors.hpp"
#include "predose/stats.hpp"

#include <cstdio>
#include <ostream>

namespace predose {

namespace {

void append_num(std::string& out, double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
}

} // namespace

int PosteriorDraws::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

std::vector<double> PosteriorDraws::column(const std::string& name) const {
    const int idx = index_of(name);
    if (idx < 0) throw MappingError("PosteriorDraws: no parameter named " + name);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_draws()));
    for (int c = 0; c < n_chains; ++c) {
        for (int it = 0; it < n_iter; ++it) out.push_back(at(c, it, idx));
    }
    return out;
}

double PosteriorDraws::posterior_mean(const std::string& name) const {
    const auto col = column(name);
    double acc = 0.0;
    for (double v : col) acc += v;
    return acc / static_cast<double>(col.size());
}

double PosteriorDraws::posterior_sd(const std::string& name) const {
    return empirical_mean_sd(column(name)).sd;
}

void PosteriorDraws::write_csv(std::ostream& os) const {
    std::string header = "chain,iteration";
    for (const auto& n : names) {
        header += ',';
        header += n;
    }
    os << header << '\n';
    for (int c = 0; c < n_chains; ++c) {
        for (int it = 0; it < n_iter; ++it) {
            std::string line = std::to_string(c + 1);
            line += ',';
            line += std::to_string(it + 1);
            for (int p = 0; p < n_params(); ++p) {
                line += ',';
                append_num(line, at(c, it, p));
            }
            line += '\n';
            os << line;
        }
    }
}

void DoseDraws::write_csv(std::ostream& os) const {
    os << "# study=" << study << " target=" << target << " L=" << samples.size()
       << " seed=" << seed << '\n';
    os << "dose_mg\n";
    for (double s : samples) {
        std::string line;
        append_num(line, s);
        line += '\n';
        os << line;
    }
}

} // namespace predose
