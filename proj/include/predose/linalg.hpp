#pragma once

#include <cstddef>
#include <vector>

namespace predose {

// Minimal dense symmetric matrix support for the curvature/PSA path.
struct Matrix {
    std::size_t n = 0;
    std::vector<double> a; // row-major n x n

    Matrix() = default;
    explicit Matrix(std::size_t size) : n(size), a(size * size, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

// Lower-triangular Cholesky factor of a symmetric positive definite
// matrix; returns false if the matrix is not positive definite.
bool cholesky(const Matrix& m, Matrix& lower);

// Inverse of an SPD matrix via its Cholesky factor.
bool spd_inverse(const Matrix& m, Matrix& inv);

} // namespace predose
