#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "predose/errors.hpp"
#include "predose/rng.hpp"
#include "predose/stats.hpp"
#include "testutil.hpp"

#include <algorithm>
#include <cmath>

using namespace predose;

TEST_CASE("standard normal cdf values") {
    CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::abs(std_normal_cdf(40.0) - 1.0) <= 1e-12);
    // oracle: quadrature of the density (tail below -8 is ~6e-16)
    const double oracle = testutil::simpson(testutil::phi, -8.0, 1.0, 8000);
    CHECK(std::abs(std_normal_cdf(1.0) - oracle) <= 1e-10);
    CHECK(std_normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
}

TEST_CASE("standard normal cdf symmetry and monotonicity") {
    double prev = -1.0;
    for (double x = -8.0; x <= 8.0; x += 0.25) {
        CHECK(std::abs(std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))) <= 1e-12);
        const double val = std_normal_cdf(x);
        CHECK(val >= prev);
        prev = val;
    }
}

TEST_CASE("standard normal quantile") {
    CHECK(std::abs(std_normal_quantile(0.5)) <= 1e-15);
    // oracle: bisection on the quadrature CDF
    double lo = -3.0, hi = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double cdf = 0.5 - testutil::simpson(testutil::phi, mid, 0.0, 4000);
        (cdf < 0.2 ? lo : hi) = mid;
    }
    const double oracle = 0.5 * (lo + hi);
    CHECK(std_normal_quantile(0.2) == doctest::Approx(oracle).epsilon(1e-8));
    CHECK(std_normal_quantile(0.2) == doctest::Approx(-0.8416212335729143).epsilon(1e-12));

    for (int i = 1; i <= 99; ++i) {
        const double p = i / 100.0;
        CHECK(std::abs(std_normal_cdf(std_normal_quantile(p)) - p) <= 1e-10);
    }
    CHECK_THROWS_AS(std_normal_quantile(0.0), DomainError);
    CHECK_THROWS_AS(std_normal_quantile(1.0), DomainError);
    CHECK_THROWS_AS(std_normal_quantile(-0.2), DomainError);
}

TEST_CASE("student t cdf against quadrature") {
    for (double x : {-2.5, -0.7, 0.0, 0.8, 1.2, 4.0}) {
        CHECK(student_t_cdf(x, 3.0) ==
              doctest::Approx(testutil::t_cdf_quad(x, 3.0)).epsilon(1e-8));
    }
    CHECK(student_t_quantile(0.75, 3.0) ==
          doctest::Approx(testutil::t_quantile_quad(0.75, 3.0)).epsilon(1e-7));
}

TEST_CASE("lognormal sampling") {
    Rng rng(42);
    const double degenerate = rng.lognormal(std::log(40.0), 0.0);
    CHECK(degenerate == std::exp(std::log(40.0)));

    const int n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    Rng r2(7);
    for (int i = 0; i < n; ++i) {
        const double x = std::log(r2.lognormal(std::log(40.0), 0.7));
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sumsq - n * mean * mean) / (n - 1));
    CHECK(mean == doctest::Approx(std::log(40.0)).epsilon(0.01 / std::log(40.0)));
    CHECK(std::abs(sd - 0.7) <= 0.01);

    CHECK_THROWS_AS(rng.lognormal(0.0, -1.0), DomainError);
}

TEST_CASE("lognormal sampling is reproducible bit for bit") {
    Rng a(2024), b(2024);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.lognormal(1.0, 0.5) == b.lognormal(1.0, 0.5));
    }
    Rng c = Rng(2024).substream(3);
    Rng d = Rng(2024).substream(3);
    for (int i = 0; i < 100; ++i) CHECK(c.next_u64() == d.next_u64());
    Rng e = Rng(2024).substream(4);
    CHECK(Rng(2024).substream(3).next_u64() != e.next_u64());
}

TEST_CASE("half student t sampling") {
    const int n = 1000000;
    std::vector<double> xs;
    xs.reserve(n);
    Rng rng(99);
    double min_x = 1e300;
    for (int i = 0; i < n; ++i) {
        xs.push_back(rng.half_student_t(3.0, 2.8));
        min_x = std::min(min_x, xs.back());
    }
    CHECK(min_x > 0.0);
    const double med = empirical_quantile(xs, 0.5);
    const double expected = 2.8 * testutil::t_quantile_quad(0.75, 3.0);
    CHECK(expected == doctest::Approx(2.1417).epsilon(2e-4)); // freeze the oracle value
    CHECK(std::abs(med - expected) <= 0.02);

    CHECK_THROWS_AS(rng.half_student_t(3.0, 0.0), DomainError);
    CHECK_THROWS_AS(rng.half_student_t(0.0, 1.0), DomainError);
}

TEST_CASE("empirical moments and quantiles") {
    const std::vector<double> xs = {1.0, 2.0, 3.0};
    const auto ms = empirical_mean_sd(xs);
    CHECK(ms.mean == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(ms.sd == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<double> grid(100);
    for (int i = 0; i < 100; ++i) grid[static_cast<std::size_t>(i)] = i + 1;
    CHECK(empirical_quantile(grid, 0.5) == doctest::Approx(50.5).epsilon(1e-15));

    Rng rng(5);
    std::vector<double> zs(1000000);
    for (auto& z : zs) z = rng.normal();
    CHECK(std::abs(empirical_quantile(zs, 0.025) - (-1.959964)) <= 0.02);
    CHECK(std::abs(empirical_quantile(zs, 0.975) - 1.959964) <= 0.02);

    CHECK_THROWS_AS(empirical_mean_sd(std::vector<double>{1.0}), DegenerateSampleError);
    CHECK_THROWS_AS(empirical_quantile(std::vector<double>{}, 0.5), DegenerateSampleError);
}

TEST_CASE("kde matches the normal density") {
    Rng rng(31);
    EmpiricalDraws draws;
    draws.samples.resize(100000);
    for (auto& s : draws.samples) s = rng.normal();

    const auto d = kde(draws, -5.0, 5.0, 512);
    double max_err = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        max_err = std::max(max_err, std::abs(d.values[j] - testutil::phi(d.point(j))));
    }
    CHECK(max_err <= 0.01);

    SUBCASE("translation equivariance") {
        EmpiricalDraws shifted = draws;
        for (auto& s : shifted.samples) s += 2.5;
        const auto d2 = kde(shifted, -2.5, 7.5, 512);
        for (std::size_t j = 0; j < d.size(); ++j) {
            CHECK(d2.values[j] == doctest::Approx(d.values[j]).epsilon(1e-9));
        }
    }

    SUBCASE("integral close to one on a covering grid") {
        const double h = silverman_bandwidth(draws.samples);
        const auto [mn, mx] = std::minmax_element(draws.samples.begin(), draws.samples.end());
        const auto dd = kde(draws, *mn - 4.0 * h, *mx + 4.0 * h, 512);
        CHECK(dd.integral() >= 0.99);
        CHECK(dd.integral() <= 1.01);
    }

    SUBCASE("permutation invariance") {
        EmpiricalDraws shuffled = draws;
        Rng perm(8);
        for (std::size_t i = shuffled.samples.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(perm.uniform() * static_cast<double>(i));
            std::swap(shuffled.samples[i - 1], shuffled.samples[j]);
        }
        const auto d3 = kde(shuffled, -5.0, 5.0, 512);
        for (std::size_t j = 0; j < d.size(); ++j) {
            CHECK(d3.values[j] == doctest::Approx(d.values[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("kde rejects degenerate samples") {
    EmpiricalDraws flat;
    flat.samples.assign(100, 3.25);
    CHECK_THROWS_AS(kde(flat, 0.0, 5.0, 64), DegenerateSampleError);
}

TEST_CASE("grid density normalization") {
    Rng rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        GridDensity d;
        d.lo = -1.0 + rng.uniform();
        d.hi = d.lo + 0.5 + 3.0 * rng.uniform();
        d.values.resize(64 + static_cast<std::size_t>(rng.uniform() * 400));
        for (auto& v : d.values) v = rng.uniform() + 1e-3;
        d.normalize();
        CHECK(std::abs(d.integral() - 1.0) <= 1e-6);
    }
}
