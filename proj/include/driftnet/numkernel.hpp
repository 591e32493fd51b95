#pragma once

#include <span>
#include <vector>

#include "driftnet/matrix.hpp"
#include "driftnet/random.hpp"

namespace driftnet {

// Eigen-structure of a symmetric PSD matrix. Eigenvalues are sorted
// non-increasing and clamped at zero from below; components holds one
// orthonormal eigenvector per column, same order.
struct Spectrum {
    std::vector<double> eigenvalues;
    Matrix components;
};

/// rows x cols matrix of i.i.d. N(mean, std^2) entries. std must be finite
/// and non-negative; std == 0 fills with mean and draws nothing.
Matrix gaussian_matrix(RandomSource& rng, std::size_t rows, std::size_t cols,
                       double mean, double std);

/// 1 - cos(a, b), in [0, 2]. Both vectors zero -> 0; exactly one zero -> 1,
/// so clustering over all-zero performance vectors stays total.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Population covariance (divide by n) of the rows of `samples`. n >= 2.
Matrix covariance_matrix(const Matrix& samples);

/// Sum of per-coordinate population variances of the rows. n >= 2.
double covariance_trace(const Matrix& samples);

/// Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.
Spectrum symmetric_eigh(const Matrix& symmetric);

/// PCA of the rows: symmetric_eigh of their population covariance. n >= 2.
Spectrum pca(const Matrix& samples);

}  // namespace driftnet
