#include <doctest.h>

#include <cmath>

#include "driftnet/errors.hpp"
#include "driftnet/numkernel.hpp"

using namespace driftnet;

TEST_CASE("gaussian_matrix with zero std is the constant mean") {
    RandomSource rng(1, 0);
    const Matrix m = gaussian_matrix(rng, 2, 2, 0.0, 0.0);
    for (double v : m.data()) CHECK(v == 0.0);
    RandomSource rng2(1, 0);
    const Matrix m2 = gaussian_matrix(rng2, 3, 1, 2.5, 0.0);
    for (double v : m2.data()) CHECK(v == 2.5);
}

TEST_CASE("gaussian_matrix is reproducible for a fixed seed and stream") {
    RandomSource a(7, 3), b(7, 3);
    const Matrix ma = gaussian_matrix(a, 4, 5, 0.0, 1.0);
    const Matrix mb = gaussian_matrix(b, 4, 5, 0.0, 1.0);
    CHECK(ma == mb);
}

TEST_CASE("distinct streams are distinct and decorrelated") {
    RandomSource a(7, 0), b(7, 1);
    const Matrix ma = gaussian_matrix(a, 1, 1000, 0.0, 1.0);
    const Matrix mb = gaussian_matrix(b, 1, 1000, 0.0, 1.0);
    CHECK(ma.data() != mb.data());
    double corr = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) corr += ma.data()[i] * mb.data()[i];
    corr /= 1000.0;
    CHECK(std::abs(corr) < 0.12);
}

TEST_CASE("gaussian_matrix sample moments match the target distribution") {
    RandomSource rng(11, 0);
    const Matrix m = gaussian_matrix(rng, 100000, 1, 0.0, 3.0);
    double mean = 0.0;
    for (double v : m.data()) mean += v;
    mean /= 1e5;
    double var = 0.0;
    for (double v : m.data()) var += (v - mean) * (v - mean);
    const double std = std::sqrt(var / 1e5);
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(std - 3.0) < 0.05);
}

TEST_CASE("gaussian_matrix rejects a negative std") {
    RandomSource rng(1, 0);
    CHECK_THROWS_AS(gaussian_matrix(rng, 1, 1, 0.0, -1.0), std::invalid_argument);
}

TEST_CASE("cosine_distance known values") {
    const std::vector<double> v123{1, 2, 3};
    CHECK(cosine_distance(v123, v123) == doctest::Approx(0.0).epsilon(1e-12));
    const std::vector<double> e1{1, 0}, e2{0, 1};
    CHECK(cosine_distance(e1, e2) == doctest::Approx(1.0));
    const std::vector<double> a{1, 1}, b{-1, -1};
    CHECK(cosine_distance(a, b) == doctest::Approx(2.0));
}

TEST_CASE("cosine_distance zero-vector rules keep the metric total") {
    const std::vector<double> zero{0, 0, 0};
    const std::vector<double> some{1, 0, 2};
    CHECK(cosine_distance(zero, zero) == 0.0);
    CHECK(cosine_distance(zero, some) == 1.0);
    CHECK(cosine_distance(some, zero) == 1.0);
}

TEST_CASE("cosine_distance is symmetric") {
    RandomSource rng(3, 9);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix m = gaussian_matrix(rng, 2, 6, 0.0, 1.0);
        CHECK(cosine_distance(m.row(0), m.row(1)) == cosine_distance(m.row(1), m.row(0)));
    }
}

TEST_CASE("pca of identical rows has an all-zero spectrum") {
    Matrix m(5, 3);
    for (std::size_t i = 0; i < 5; ++i) {
        m(i, 0) = 1.0;
        m(i, 1) = -2.0;
        m(i, 2) = 0.5;
    }
    const Spectrum s = pca(m);
    for (double ev : s.eigenvalues) CHECK(ev == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pca of rank-1 data recovers the line") {
    const Matrix m = Matrix::from_rows({{1, 0}, {-1, 0}, {2, 0}, {-2, 0}});
    const Spectrum s = pca(m);
    CHECK(s.eigenvalues[0] == doctest::Approx(2.5));
    CHECK(s.eigenvalues[1] == doctest::Approx(0.0));
    CHECK(std::abs(s.components(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(s.components(1, 0)) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("pca spectrum mass equals the covariance trace") {
    RandomSource rng(5, 1);
    const Matrix m = gaussian_matrix(rng, 50, 4, 0.5, 2.0);
    const Spectrum s = pca(m);
    double mass = 0.0;
    for (double ev : s.eigenvalues) mass += ev;
    CHECK(mass == doctest::Approx(covariance_trace(m)).epsilon(1e-8));
}

TEST_CASE("pca components are orthonormal and reconstruct the covariance") {
    RandomSource rng(6, 2);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix m = gaussian_matrix(rng, 30, 5, 0.0, 1.5);
        const Spectrum s = pca(m);
        const std::size_t q = s.components.rows();
        for (std::size_t a = 0; a < q; ++a)
            for (std::size_t b = 0; b < q; ++b) {
                double dot = 0.0;
                for (std::size_t i = 0; i < q; ++i)
                    dot += s.components(i, a) * s.components(i, b);
                CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-8));
            }
        const Matrix cov = covariance_matrix(m);
        Matrix rebuilt(q, q);
        for (std::size_t k = 0; k < q; ++k)
            for (std::size_t i = 0; i < q; ++i)
                for (std::size_t j = 0; j < q; ++j)
                    rebuilt(i, j) += s.eigenvalues[k] * s.components(i, k) * s.components(j, k);
        double frob = 0.0;
        for (std::size_t i = 0; i < q; ++i)
            for (std::size_t j = 0; j < q; ++j)
                frob += (rebuilt(i, j) - cov(i, j)) * (rebuilt(i, j) - cov(i, j));
        CHECK(std::sqrt(frob) < 1e-6);
    }
}

TEST_CASE("pca requires at least two rows") {
    Matrix m(1, 3);
    CHECK_THROWS_AS(pca(m), InsufficientSamples);
}

TEST_CASE("covariance_trace known values") {
    Matrix same(4, 2, 1.0);
    CHECK(covariance_trace(same) == doctest::Approx(0.0));
    const Matrix two = Matrix::from_rows({{0, 0}, {2, 0}});
    CHECK(covariance_trace(two) == doctest::Approx(1.0));
}

TEST_CASE("covariance_trace matches the per-column variance oracle") {
    RandomSource rng(9, 4);
    const Matrix m = gaussian_matrix(rng, 100, 3, -1.0, 2.0);
    double oracle = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 100; ++i) mean += m(i, j);
        mean /= 100.0;
        double var = 0.0;
        for (std::size_t i = 0; i < 100; ++i) var += (m(i, j) - mean) * (m(i, j) - mean);
        oracle += var / 100.0;
    }
    CHECK(covariance_trace(m) == doctest::Approx(oracle).epsilon(1e-10));
    CHECK_THROWS_AS(covariance_trace(Matrix(1, 3)), InsufficientSamples);
}
