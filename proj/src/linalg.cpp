#include "predose/linalg.hpp"

#include <cmath>

namespace predose {

bool cholesky(const Matrix& m, Matrix& lower) {
    const std::size_t n = m.n;
    lower = Matrix(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = m(i, j);
            for (std::size_t k = 0; k < j; ++k) sum -= lower(i, k) * lower(j, k);
            if (i == j) {
                if (!(sum > 0.0)) return false;
                lower(i, i) = std::sqrt(sum);
            } else {
                lower(i, j) = sum / lower(j, j);
            }
        }
    }
    return true;
}

bool spd_inverse(const Matrix& m, Matrix& inv) {
    Matrix l;
    if (!cholesky(m, l)) return false;
    const std::size_t n = m.n;
    inv = Matrix(n);
    // solve L L^T X = I column by column
    std::vector<double> y(n);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t i = 0; i < n; ++i) {
            double sum = i == col ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) sum -= l(i, k) * y[k];
            y[i] = sum / l(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double sum = y[ii];
            for (std::size_t k = ii + 1; k < n; ++k) sum -= l(k, ii) * inv(k, col);
            inv(ii, col) = sum / l(ii, ii);
        }
    }
    return true;
}

} // namespace predose
