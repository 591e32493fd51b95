#include "driftnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "driftnet/errors.hpp"

namespace driftnet {

namespace {

double comb2(double n) { return n * (n - 1.0) / 2.0; }

std::vector<double> mid_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cf(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double tol = 1e-10;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double f = d;
    for (int m = 1; m <= 200; ++m) {
        const double dm = static_cast<double>(m);
        // even step
        double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        f *= d * c;
        // odd step
        num = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::abs(delta - 1.0) < tol) break;
    }
    return f;
}

bool same_partition(std::span<const int> a, std::span<const int> b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j)
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    return true;
}

}  // namespace

double test_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw std::invalid_argument("test_accuracy: length mismatch or empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

RetrievalAccuracy retrieval_accuracy(const std::vector<RetrievalEvent>& events) {
    if (events.empty()) throw InsufficientData("retrieval_accuracy: no events");
    std::map<int, std::pair<long, long>> tallies;  // task -> (successes, total)
    for (const RetrievalEvent& e : events) {
        if (e.test_task < 0)
            throw std::invalid_argument("retrieval_accuracy: event lacks a test-task id");
        std::size_t chosen_idx = 0;
        while (chosen_idx < e.group_labels.size() && e.group_labels[chosen_idx] != e.chosen_group)
            ++chosen_idx;
        if (chosen_idx >= e.group_member_tasks.size())
            throw std::invalid_argument("retrieval_accuracy: event lacks member task ids");
        const auto& members = e.group_member_tasks[chosen_idx];
        const long relevant = static_cast<long>(
            std::count(members.begin(), members.end(), e.test_task));
        const bool success = 2 * relevant > static_cast<long>(members.size());
        auto& [wins, total] = tallies[e.test_task];
        wins += success ? 1 : 0;
        ++total;
    }
    RetrievalAccuracy acc;
    double sum = 0.0;
    for (const auto& [task, wt] : tallies) {
        const double a = static_cast<double>(wt.first) / static_cast<double>(wt.second);
        acc.per_task[task] = a;
        sum += a;
    }
    acc.overall = sum / static_cast<double>(tallies.size());
    return acc;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("adjusted_rand_index: length mismatch or fewer than 2");
    const double n = static_cast<double>(a.size());

    std::map<int, double> count_a, count_b;
    std::map<std::pair<int, int>, double> joint;
    for (std::size_t i = 0; i < a.size(); ++i) {
        count_a[a[i]] += 1.0;
        count_b[b[i]] += 1.0;
        joint[{a[i], b[i]}] += 1.0;
    }

    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [k, v] : joint) sum_ij += comb2(v);
    for (const auto& [k, v] : count_a) sum_a += comb2(v);
    for (const auto& [k, v] : count_b) sum_b += comb2(v);

    const double expected = sum_a * sum_b / comb2(n);
    const double denom = 0.5 * (sum_a + sum_b) - expected;
    if (denom == 0.0) return same_partition(a, b) ? 1.0 : 0.0;
    return (sum_ij - expected) / denom;
}

Matrix drift_normalized(const DriftTrace& trace) {
    const int total = static_cast<int>(trace.snapshots.size());
    if (total == 0) throw DegenerateTrace("drift_normalized: empty trace");
    if (trace.t0 < 1 || trace.t0 >= total)
        throw std::invalid_argument("drift_normalized: t0 out of range");
    const Matrix& ref = trace.snapshots[static_cast<std::size_t>(trace.t0 - 1)];
    const std::size_t q = ref.cols();

    std::vector<std::size_t> retained;
    std::vector<double> norms;
    for (std::size_t j = 0; j < ref.rows(); ++j) {
        double norm2 = 0.0;
        for (double v : ref.row(j)) norm2 += v * v;
        const double norm = std::sqrt(norm2);
        if (norm >= 1e-12) {
            retained.push_back(j);
            norms.push_back(norm);
        }
    }
    if (retained.empty()) throw DegenerateTrace("drift_normalized: all reference norms are ~0");

    Matrix rows(static_cast<std::size_t>(total - trace.t0) * retained.size(), q);
    std::size_t r = 0;
    for (int t = trace.t0 + 1; t <= total; ++t) {
        const Matrix& zt = trace.snapshots[static_cast<std::size_t>(t - 1)];
        for (std::size_t k = 0; k < retained.size(); ++k, ++r) {
            const std::size_t j = retained[k];
            for (std::size_t d = 0; d < q; ++d)
                rows(r, d) = (zt(j, d) - ref(j, d)) / norms[k];
        }
    }
    return rows;
}

int effective_dimension(const Spectrum& spectrum) {
    double sum = 0.0, sum_sq = 0.0;
    for (double s : spectrum.eigenvalues) {
        sum += s;
        sum_sq += s * s;
    }
    if (sum_sq <= 0.0) throw DegenerateTrace("effective_dimension: all-zero spectrum");
    const double ratio = sum * sum / sum_sq;
    // back off one ulp-scale step so an exactly integral ratio is not pushed up
    return static_cast<int>(std::ceil(ratio - 1e-9));
}

double drift_rate(const DriftTrace& trace) {
    const int total = static_cast<int>(trace.snapshots.size());
    if (total - trace.t0 < 2)
        throw DegenerateTrace("drift_rate: need at least 2 time points past t0");
    const Matrix normalized = drift_normalized(trace);

    double motion = 0.0;
    for (double v : normalized.data()) motion = std::max(motion, std::abs(v));
    if (motion < 1e-15) return 0.0;

    const Spectrum spectrum = pca(normalized);
    double spectral_mass = 0.0;
    for (double s : spectrum.eigenvalues) spectral_mass += s;
    if (spectral_mass <= 0.0) return 0.0;
    const int d = effective_dimension(spectrum);

    const Matrix& ref = trace.snapshots[static_cast<std::size_t>(trace.t0 - 1)];
    const std::size_t q = ref.cols();
    const std::size_t inputs = ref.rows();
    const std::size_t times = static_cast<std::size_t>(total - trace.t0);

    // Work in the d-dim coordinates of the leading components; the covariance
    // trace there equals the trace of the projected q-dim covariance.
    double mean_rate = 0.0;
    std::vector<double> coords(times * static_cast<std::size_t>(d));
    for (std::size_t j = 0; j < inputs; ++j) {
        Matrix proj(times, static_cast<std::size_t>(d));
        for (std::size_t ti = 0; ti < times; ++ti) {
            const Matrix& zt = trace.snapshots[static_cast<std::size_t>(trace.t0) + ti];
            for (int k = 0; k < d; ++k) {
                double dot = 0.0;
                for (std::size_t a = 0; a < q; ++a)
                    dot += (zt(j, a) - ref(j, a)) * spectrum.components(a, static_cast<std::size_t>(k));
                proj(ti, static_cast<std::size_t>(k)) = dot;
            }
        }
        mean_rate += covariance_trace(proj);
    }
    return mean_rate / static_cast<double>(inputs);
}

TestResult t_test(std::span<const double> x, std::span<const double> y) {
    const double n1 = static_cast<double>(x.size());
    const double n2 = static_cast<double>(y.size());
    if (x.size() < 2 || y.size() < 2)
        throw std::invalid_argument("t_test: need at least 2 samples per group");

    auto mean = [](std::span<const double> v) {
        double m = 0.0;
        for (double q : v) m += q;
        return m / static_cast<double>(v.size());
    };
    auto sample_var = [&](std::span<const double> v, double m) {
        double s = 0.0;
        for (double q : v) s += (q - m) * (q - m);
        return s / (static_cast<double>(v.size()) - 1.0);
    };

    const double m1 = mean(x), m2 = mean(y);
    const double pooled =
        ((n1 - 1.0) * sample_var(x, m1) + (n2 - 1.0) * sample_var(y, m2)) / (n1 + n2 - 2.0);
    if (pooled <= 0.0) {
        const bool equal = m1 == m2;
        return {equal ? 0.0 : std::copysign(1e300, m1 - m2), equal ? 1.0 : 0.0};
    }
    const double t = (m1 - m2) / std::sqrt(pooled * (1.0 / n1 + 1.0 / n2));
    const double df = n1 + n2 - 2.0;
    const double p = incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    return {t, std::clamp(p, 0.0, 1.0)};
}

TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y) {
    const std::size_t n1 = x.size();
    const std::size_t n2 = y.size();
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("mann_whitney_u: empty sample");

    std::vector<double> combined(x.begin(), x.end());
    combined.insert(combined.end(), y.begin(), y.end());
    const std::vector<double> ranks = mid_ranks(combined);

    double r1 = 0.0;
    for (std::size_t i = 0; i < n1; ++i) r1 += ranks[i];
    const double prod = static_cast<double>(n1) * static_cast<double>(n2);
    const double u1 = prod + static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0 - r1;
    const double u = std::min(u1, prod - u1);

    // tie-corrected variance of U under the null
    const double n = static_cast<double>(n1 + n2);
    std::vector<double> sorted(combined);
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double variance = prod / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (variance <= 0.0) return {u, 1.0};

    const double z = (u - prod / 2.0 + 0.5) / std::sqrt(variance);
    return {u, std::clamp(2.0 * normal_cdf(z), 0.0, 1.0)};
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman: length mismatch or fewer than 2");
    const std::vector<double> rx = mid_ranks(std::vector<double>(x.begin(), x.end()));
    const std::vector<double> ry = mid_ranks(std::vector<double>(y.begin(), y.end()));
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    if (x < (a + 1.0) / (a + b + 2.0))
        return std::exp(ln_front) * beta_cf(a, b, x) / a;
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          b * std::log(1.0 - x) + a * std::log(x)) *
                     beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace driftnet
