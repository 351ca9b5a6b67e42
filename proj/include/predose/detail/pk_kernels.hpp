#pragma once

#include "predose/detail/dual.hpp"

#include <cmath>
#include <utility>

// Scalar-generic closed forms shared by the simulators (double) and the
// samplers/optimizer (Dual<N> gradients). All branches switch on the value
// part only and the branch expansions agree to well below double precision
// at the thresholds, so the functions are numerically smooth.
namespace predose::detail {

using std::exp;
using std::expm1;
using std::log;
using std::log1p;
using std::sqrt;

// expm1(x)/x, continuous through x = 0.
template <class S>
S em1_over(const S& x) {
    if (std::abs(value(x)) < 1e-4) {
        return S(1.0) + x * (S(1.0 / 2) + x * (S(1.0 / 6) + x * S(1.0 / 24)));
    }
    return expm1(x) / x;
}

// One-compartment oral concentration: (d/V) * ka/(ka-k) * (e^-kt - e^-ka t)
// with k = CL/V, evaluated so the ka -> k coincidence is exact.
template <class S>
S conc_kernel(const S& t, const S& dose, const S& ka, const S& cl, const S& v) {
    const S k = cl / v;
    const S x = (ka - k) * t;
    if (std::abs(value(x)) <= 1.0) {
        return (dose / v) * ka * t * exp(-ka * t) * em1_over(x);
    }
    return (dose / v) * ka / (ka - k) * (exp(-k * t) - exp(-ka * t));
}

// First divided difference of e^(-x t) at xa <= xb (always <= 0).
template <class S>
S exp_first_diff(const S& xa, const S& xb, const S& t) {
    const S u = (xb - xa) * t;
    if (value(u) <= 1.0) {
        return -t * exp(-xb * t) * em1_over(u);
    }
    return (exp(-xa * t) - exp(-xb * t)) / (xa - xb);
}

// Second divided difference of e^(-x t) over three positive rates.
// Evaluated as t^2 e^(-x2 t) * psi(u, w) with the rates sorted, where the
// near-coincident regime uses the series of psi; accurate for any
// separation of the rates and exactly zero at t = 0.
template <class S>
S exp_second_diff(S x1, S x2, S x3, const S& t) {
    if (value(x2) < value(x1)) std::swap(x1, x2);
    if (value(x3) < value(x2)) std::swap(x2, x3);
    if (value(x2) < value(x1)) std::swap(x1, x2);
    const S u = (x2 - x1) * t;
    const S w = (x3 - x2) * t;
    if (value(u) + value(w) <= 1e-3) {
        const S psi = S(0.5) + (u - w) * S(1.0 / 6) + (u * u - u * w + w * w) * S(1.0 / 24) +
                      (u - w) * (u * u + w * w) * S(1.0 / 120);
        return t * t * exp(-x2 * t) * psi;
    }
    return (exp_first_diff(x1, x2, t) - exp_first_diff(x2, x3, t)) / (x1 - x3);
}

// Effect-compartment concentration: d ka ke / V times the second divided
// difference of e^(-x t) at rates (ka, CL/V, ke).
template <class S>
S ce_kernel(const S& t, const S& dose, const S& ka, const S& cl, const S& v, const S& ke) {
    return dose * ka * ke / v * exp_second_diff(ka, cl / v, ke, t);
}

// Inhibition response i_max * Ce / (Ce + ic50).
template <class S>
S response_kernel(const S& t, const S& dose, const S& ka, const S& cl, const S& v, const S& ke,
                  const S& i_max, const S& ic50) {
    const S ce = ce_kernel(t, dose, ka, cl, v, ke);
    return i_max * ce / (ce + ic50);
}

} // namespace predose::detail
