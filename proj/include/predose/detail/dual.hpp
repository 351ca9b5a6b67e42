#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace predose::detail {

// Forward-mode dual number with N partial derivatives. The PK/PD kernels
// are templated on the scalar type; instantiating them with Dual<N> yields
// exact per-observation gradients for the samplers and the optimizer.
template <int N>
struct Dual {
    double val = 0.0;
    std::array<double, N> d{};

    Dual() = default;
    Dual(double v) : val(v) {} // NOLINT(google-explicit-constructor)
    static Dual seed(double v, int slot) {
        Dual x(v);
        x.d[static_cast<std::size_t>(slot)] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o) {
        val += o.val;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        val -= o.val;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (int i = 0; i < N; ++i) d[i] = d[i] * o.val + val * o.d[i];
        val *= o.val;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const double inv = 1.0 / o.val;
        for (int i = 0; i < N; ++i) d[i] = (d[i] - val * inv * o.d[i]) * inv;
        val *= inv;
        return *this;
    }
};

template <int N> Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <int N> Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <int N> Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <int N> Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }

template <int N> Dual<N> operator-(const Dual<N>& a) {
    Dual<N> r(-a.val);
    for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
    return r;
}

template <int N> bool operator<(const Dual<N>& a, const Dual<N>& b) { return a.val < b.val; }
template <int N> bool operator>(const Dual<N>& a, const Dual<N>& b) { return a.val > b.val; }
template <int N> bool operator<=(const Dual<N>& a, const Dual<N>& b) { return a.val <= b.val; }
template <int N> bool operator>=(const Dual<N>& a, const Dual<N>& b) { return a.val >= b.val; }

template <int N> Dual<N> chain(double f, double dfdx, const Dual<N>& x) {
    Dual<N> r(f);
    for (int i = 0; i < N; ++i) r.d[i] = dfdx * x.d[i];
    return r;
}

template <int N> Dual<N> exp(const Dual<N>& x) {
    const double e = std::exp(x.val);
    return chain(e, e, x);
}
template <int N> Dual<N> expm1(const Dual<N>& x) {
    return chain(std::expm1(x.val), std::exp(x.val), x);
}
template <int N> Dual<N> log(const Dual<N>& x) {
    return chain(std::log(x.val), 1.0 / x.val, x);
}
template <int N> Dual<N> log1p(const Dual<N>& x) {
    return chain(std::log1p(x.val), 1.0 / (1.0 + x.val), x);
}
template <int N> Dual<N> sqrt(const Dual<N>& x) {
    const double s = std::sqrt(x.val);
    return chain(s, 0.5 / s, x);
}

template <int N> double value(const Dual<N>& x) { return x.val; }
inline double value(double x) { return x; }

} // namespace predose::detail
