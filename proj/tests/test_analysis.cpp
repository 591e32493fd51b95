#include <doctest.h>

#include <cmath>

#include "driftnet/analysis.hpp"
#include "driftnet/errors.hpp"
#include "driftnet/numkernel.hpp"
#include "driftnet/selfcheck.hpp"

using namespace driftnet;

namespace {

RetrievalEvent event_with(int test_task, std::vector<int> chosen_members) {
    RetrievalEvent e;
    e.chosen_group = 0;
    e.group_labels = {0};
    e.uncertainties = {0.0};
    e.group_member_tasks = {std::move(chosen_members)};
    e.test_task = test_task;
    return e;
}

// Trace whose features at time t are base + offsets[t-1] per input row.
DriftTrace trace_from_offsets(const Matrix& base, const std::vector<std::vector<double>>& offsets,
                              int t0) {
    DriftTrace trace;
    trace.t0 = t0;
    for (const auto& offset : offsets) {
        Matrix snap = base;
        for (std::size_t i = 0; i < snap.rows(); ++i)
            for (std::size_t j = 0; j < snap.cols(); ++j) snap(i, j) += offset[j];
        trace.snapshots.push_back(std::move(snap));
    }
    return trace;
}

}  // namespace

TEST_CASE("test_accuracy counts exact matches") {
    CHECK(test_accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(test_accuracy({1, 2, 3}, {4, 5, 6}) == 0.0);
    CHECK(test_accuracy({1, 2, 3, 4}, {1, 2, 3, 0}) == 0.75);
    CHECK_THROWS_AS(test_accuracy({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("retrieval accuracy requires a strict member majority") {
    std::vector<RetrievalEvent> events;
    events.push_back(event_with(0, {0, 0, 0}));        // success
    events.push_back(event_with(0, {0, 0, 1, 1}));     // exactly half: failure
    events.push_back(event_with(1, {1, 1, 0}));        // success
    const RetrievalAccuracy acc = retrieval_accuracy(events);
    CHECK(acc.per_task.at(0) == doctest::Approx(0.5));
    CHECK(acc.per_task.at(1) == doctest::Approx(1.0));
    CHECK(acc.overall == doctest::Approx(0.75));  // mean of per-task accuracies
    CHECK_THROWS_AS(retrieval_accuracy({}), InsufficientData);
}

TEST_CASE("adjusted rand index known values") {
    CHECK(adjusted_rand_index(std::vector<int>{1, 1, 2, 2}, std::vector<int>{1, 1, 2, 2}) == 1.0);
    CHECK(adjusted_rand_index(std::vector<int>{1, 1, 2, 2}, std::vector<int>{2, 2, 1, 1}) == 1.0);
    CHECK(adjusted_rand_index(std::vector<int>{1, 1, 2, 2}, std::vector<int>{1, 2, 1, 2}) ==
          doctest::Approx(-0.5));
    CHECK_THROWS_AS(adjusted_rand_index(std::vector<int>{1}, std::vector<int>{1, 2}),
                    std::invalid_argument);
}

TEST_CASE("adjusted rand index degenerate partitions") {
    CHECK(adjusted_rand_index(std::vector<int>{3, 3, 3}, std::vector<int>{7, 7, 7}) == 1.0);
    CHECK(adjusted_rand_index(std::vector<int>{1, 2, 3}, std::vector<int>{5, 6, 7}) == 1.0);
    CHECK(adjusted_rand_index(std::vector<int>{1, 2, 3}, std::vector<int>{1, 1, 1}) == 0.0);
}

TEST_CASE("adjusted rand index is symmetric and label-permutation invariant") {
    RandomSource rng(1, 4);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng.uniform_below(20);
        std::vector<int> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = static_cast<int>(rng.uniform_below(4));
            b[i] = static_cast<int>(rng.uniform_below(4));
        }
        CHECK(adjusted_rand_index(a, b) == doctest::Approx(adjusted_rand_index(b, a)));
        std::vector<int> permuted(a);
        for (int& v : permuted) v = 7 - v;  // relabeling only
        CHECK(adjusted_rand_index(permuted, b) == doctest::Approx(adjusted_rand_index(a, b)));
    }
}

TEST_CASE("adjusted rand index matches the pair-counting oracle") {
    const CheckResult r = check_ari_oracle(500, 811);
    INFO(r.detail);
    CHECK(r.pass);
}

TEST_CASE("normalized drift of constant features is zero") {
    Matrix base(3, 2);
    base(0, 0) = 1.0;
    base(1, 1) = 2.0;
    base(2, 0) = -1.0;
    const DriftTrace trace = trace_from_offsets(base, {{0, 0}, {0, 0}, {0, 0}, {0, 0}}, 2);
    const Matrix rows = drift_normalized(trace);
    CHECK(rows.rows() == 2 * 3);
    for (double v : rows.data()) CHECK(v == 0.0);
}

TEST_CASE("the drift normalizer is homogeneous in the reference features") {
    Matrix base(2, 2);
    base(0, 0) = 1.0;
    base(1, 1) = 1.0;
    const std::vector<std::vector<double>> offsets = {{0, 0}, {0.5, -0.25}, {1.0, 0.75}};
    const DriftTrace small = trace_from_offsets(base, offsets, 1);
    Matrix doubled_base = base;
    for (double& v : doubled_base.data()) v *= 2.0;
    // same drift vectors, doubled reference norms
    DriftTrace big = trace_from_offsets(doubled_base, offsets, 1);
    const Matrix rows_small = drift_normalized(small);
    const Matrix rows_big = drift_normalized(big);
    REQUIRE(rows_small.rows() == rows_big.rows());
    for (std::size_t i = 0; i < rows_small.data().size(); ++i)
        CHECK(rows_big.data()[i] == doctest::Approx(rows_small.data()[i] / 2.0));
}

TEST_CASE("inputs with vanishing reference features are dropped") {
    Matrix base(2, 2);  // row 1 is exactly zero at t0
    base(0, 0) = 1.0;
    const DriftTrace trace = trace_from_offsets(base, {{0, 0}, {1, 1}, {2, 2}}, 1);
    const Matrix rows = drift_normalized(trace);
    CHECK(rows.rows() == 2);  // 2 time points x 1 retained input

    Matrix zeros(2, 2);
    const DriftTrace dead = trace_from_offsets(zeros, {{0, 0}, {1, 1}, {2, 2}}, 1);
    CHECK_THROWS_AS(drift_normalized(dead), DegenerateTrace);
}

TEST_CASE("effective dimension of reference spectra") {
    CHECK(effective_dimension({{1, 0, 0}, Matrix()}) == 1);
    CHECK(effective_dimension({{1, 1, 1, 1}, Matrix()}) == 4);
    CHECK(effective_dimension({{2, 1}, Matrix()}) == 2);  // ceil(9/5)
    for (int q = 1; q <= 10; ++q) {
        std::vector<double> uniform(static_cast<std::size_t>(q), 0.37);
        CHECK(effective_dimension({uniform, Matrix()}) == q);
    }
    CHECK_THROWS_AS(effective_dimension({{0, 0}, Matrix()}), DegenerateTrace);
}

TEST_CASE("drift rate is zero for constant features and grows with walk size") {
    Matrix base(4, 3);
    for (std::size_t i = 0; i < 4; ++i) base(i, 0) = 1.0 + static_cast<double>(i);
    const DriftTrace constant =
        trace_from_offsets(base, std::vector<std::vector<double>>(12, {0, 0, 0}), 3);
    CHECK(drift_rate(constant) == 0.0);

    auto walk_rate = [&](double step_std, std::uint64_t seed) {
        RandomSource rng(seed, 0);
        std::vector<std::vector<double>> offsets;
        std::vector<double> pos(3, 0.0);
        for (int t = 0; t < 60; ++t) {
            offsets.push_back(pos);
            for (double& v : pos) v += rng.normal(0.0, step_std);
        }
        return drift_rate(trace_from_offsets(base, offsets, 15));
    };
    const double r1 = walk_rate(0.1, 42);
    const double r2 = walk_rate(0.3, 42);
    const double r3 = walk_rate(1.0, 42);
    CHECK(r1 < r2);
    CHECK(r2 < r3);
    CHECK(r1 > 0.0);
}

TEST_CASE("drift rate is invariant under a global feature-space rotation") {
    RandomSource rng(17, 3);
    Matrix base = gaussian_matrix(rng, 5, 3, 1.0, 0.5);
    std::vector<std::vector<double>> offsets;
    std::vector<double> pos(3, 0.0);
    for (int t = 0; t < 40; ++t) {
        offsets.push_back(pos);
        pos[0] += rng.normal(0.0, 0.3);
        pos[1] += rng.normal(0.0, 0.05);
        pos[2] += rng.normal(0.0, 0.01);
    }
    const DriftTrace trace = trace_from_offsets(base, offsets, 10);

    // random rotation via Gram-Schmidt on a Gaussian matrix
    Matrix g = gaussian_matrix(rng, 3, 3, 0.0, 1.0);
    Matrix rot(3, 3);
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> v(3);
        for (std::size_t r = 0; r < 3; ++r) v[r] = g(r, c);
        for (std::size_t prev = 0; prev < c; ++prev) {
            double dot = 0.0;
            for (std::size_t r = 0; r < 3; ++r) dot += v[r] * rot(r, prev);
            for (std::size_t r = 0; r < 3; ++r) v[r] -= dot * rot(r, prev);
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < 3; ++r) rot(r, c) = v[r] / norm;
    }
    DriftTrace rotated = trace;
    for (Matrix& snap : rotated.snapshots) snap = matmul(snap, rot);

    CHECK(drift_rate(rotated) == doctest::Approx(drift_rate(trace)).epsilon(1e-6));
}

TEST_CASE("t-test reference values") {
    const std::vector<double> x{1, 2, 3};
    const std::vector<double> y{11, 12, 13};
    const TestResult r = t_test(x, y);
    CHECK(r.statistic == doctest::Approx(-12.24744871391589).epsilon(1e-10));
    CHECK(r.p_value == doctest::Approx(0.00025521674944).epsilon(1e-6));
    CHECK(r.p_value < 0.01);

    const TestResult swapped = t_test(y, x);
    CHECK(swapped.statistic == doctest::Approx(-r.statistic));
    CHECK(swapped.p_value == doctest::Approx(r.p_value));

    const std::vector<double> same{1.0, 2.0, 3.0, 4.0};
    const TestResult null_case = t_test(same, same);
    CHECK(null_case.statistic == doctest::Approx(0.0));
    CHECK(null_case.p_value == doctest::Approx(1.0));
}

TEST_CASE("t-test degenerate samples") {
    const std::vector<double> flat{2.0, 2.0, 2.0};
    CHECK(t_test(flat, flat).p_value == 1.0);
    const std::vector<double> other{3.0, 3.0};
    CHECK(t_test(flat, other).p_value == 0.0);
    CHECK_THROWS_AS(t_test(std::vector<double>{1.0}, flat), std::invalid_argument);
}

TEST_CASE("rank-sum test reference behavior") {
    // total separation: returned statistic is the min-side convention
    const std::vector<double> lo{1, 2, 3, 4};
    const std::vector<double> hi{10, 11, 12, 13};
    const TestResult sep = mann_whitney_u(lo, hi);
    CHECK(sep.statistic == 0.0);

    const std::vector<double> same{1, 2, 3};
    CHECK(mann_whitney_u(same, same).p_value >= 0.9);

    RandomSource rng(5, 0);
    std::vector<double> x(20), y(20);
    for (double& v : x) v = rng.normal();
    for (double& v : y) v = rng.normal(2.0, 1.0);
    CHECK(mann_whitney_u(x, y).p_value < 0.001);
}

TEST_CASE("statistical tests agree with the permutation oracle") {
    const CheckResult r = check_stat_tests_vs_permutation(50, 77);
    INFO(r.detail);
    CHECK(r.pass);
}

TEST_CASE("spearman correlation on monotone data") {
    const std::vector<double> x{0.3, 1.0, 3.0, 6.0};
    const std::vector<double> up{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> down{4.0, 3.0, 2.0, 1.0};
    CHECK(spearman(x, up) == doctest::Approx(1.0));
    CHECK(spearman(x, down) == doctest::Approx(-1.0));
}
