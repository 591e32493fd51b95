#include "driftnet/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "driftnet/errors.hpp"

namespace driftnet {

Matrix gaussian_matrix(RandomSource& rng, std::size_t rows, std::size_t cols,
                       double mean, double std) {
    if (!std::isfinite(std) || std < 0.0)
        throw std::invalid_argument("gaussian_matrix: std must be finite and >= 0");
    Matrix m(rows, cols, mean);
    if (std == 0.0) return m;
    for (double& v : m.data()) v = rng.normal(mean, std);
    return m;
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine_distance: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;
    const double d = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(d, 0.0, 2.0);
}

Matrix covariance_matrix(const Matrix& samples) {
    const std::size_t n = samples.rows();
    const std::size_t q = samples.cols();
    if (n < 2) throw InsufficientSamples("covariance: need at least 2 rows");
    std::vector<double> mean(q, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) mean[j] += samples(i, j);
    for (double& v : mean) v /= static_cast<double>(n);
    Matrix cov(q, q);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < q; ++a) {
            const double da = samples(i, a) - mean[a];
            if (da == 0.0) continue;
            for (std::size_t b = a; b < q; ++b)
                cov(a, b) += da * (samples(i, b) - mean[b]);
        }
    }
    for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = a; b < q; ++b) {
            cov(a, b) /= static_cast<double>(n);
            cov(b, a) = cov(a, b);
        }
    return cov;
}

double covariance_trace(const Matrix& samples) {
    const std::size_t n = samples.rows();
    if (n < 2) throw InsufficientSamples("covariance_trace: need at least 2 rows");
    double trace = 0.0;
    for (std::size_t j = 0; j < samples.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += samples(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = samples(i, j) - mean;
            var += d * d;
        }
        trace += var / static_cast<double>(n);
    }
    return trace;
}

Spectrum symmetric_eigh(const Matrix& symmetric) {
    if (symmetric.rows() != symmetric.cols())
        throw std::invalid_argument("symmetric_eigh: matrix not square");
    const std::size_t n = symmetric.rows();
    Matrix a = symmetric;
    Matrix v = Matrix::identity(n);

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    const double tol = 1e-12 * (1.0 + scale);

    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) < tol) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < tol * 1e-4) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t;
                if (tau >= 0.0)
                    t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
                else
                    t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                const double app = a(p, p), aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i == p || i == q) continue;
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(p, i) = a(i, p);
                    a(i, q) = s * aip + c * aiq;
                    a(q, i) = a(i, q);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    Spectrum spec;
    spec.eigenvalues.resize(n);
    spec.components = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        double ev = a(order[k], order[k]);
        if (ev < 0.0 && ev > -1e-10) ev = 0.0;
        spec.eigenvalues[k] = ev;
        for (std::size_t i = 0; i < n; ++i) spec.components(i, k) = v(i, order[k]);
    }
    return spec;
}

Spectrum pca(const Matrix& samples) {
    return symmetric_eigh(covariance_matrix(samples));
}

}  // namespace driftnet
