#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>

#include "driftnet/errors.hpp"
#include "driftnet/numkernel.hpp"
#include "driftnet/tasks.hpp"

using namespace driftnet;

namespace {

// Bit-exact row fingerprint for multiset comparisons.
std::string row_key(std::span<const double> row, double label) {
    std::string key(sizeof(double) * (row.size() + 1), '\0');
    std::memcpy(key.data(), row.data(), sizeof(double) * row.size());
    std::memcpy(key.data() + sizeof(double) * row.size(), &label, sizeof(double));
    return key;
}

}  // namespace

TEST_CASE("simulation task structure matches the generating equations") {
    TaskStream s = TaskStream::simulated_regression(123);
    REQUIRE(s.num_tasks() == 2);
    const TaskData& t1 = s.task(0);
    const TaskData& t2 = s.task(1);
    for (std::size_t i = 0; i < t1.train_inputs.rows(); ++i) CHECK(t1.train_inputs(i, 1) == 0.0);
    for (std::size_t i = 0; i < t2.train_inputs.rows(); ++i)
        CHECK(t2.train_inputs(i, 1) == t2.train_inputs(i, 0));
    CHECK(t1.train_inputs.rows() == 10000);
    CHECK(t1.test_inputs.rows() == 2000);
}

TEST_CASE("noise-free simulation labels satisfy the generating equation exactly") {
    TaskStream s = TaskStream::simulated_regression(9, /*noise_free=*/true);
    const TaskData& t1 = s.task(0);
    for (std::size_t i = 0; i < 100; ++i) {
        const double expected = t1.train_inputs(i, 0) + t1.train_inputs(i, 1) + t1.train_inputs(i, 2);
        CHECK(t1.train_labels[i] == expected);
    }
    const TaskData& t2 = s.task(1);
    for (std::size_t i = 0; i < 100; ++i) {
        const double expected =
            -t2.test_inputs(i, 0) - t2.test_inputs(i, 1) - t2.test_inputs(i, 2);
        CHECK(t2.test_labels[i] == expected);
    }
}

TEST_CASE("simulation input covariance is singular for task 1 and rank 2 for task 2") {
    TaskStream s = TaskStream::simulated_regression(21);
    const Spectrum s1 = pca(s.task(0).train_inputs);
    CHECK(s1.eigenvalues.back() < 1e-6);
    const Spectrum s2 = pca(s.task(1).train_inputs);
    CHECK(s2.eigenvalues[1] > 0.5);       // two directions carry variance
    CHECK(s2.eigenvalues.back() < 1e-6);  // third collapses
}

TEST_CASE("batch counting and time steps") {
    TaskStream s = TaskStream::simulated_regression(4);
    CHECK(s.total_steps() == 2L * 100L * 625L);
    auto first = s.next();
    REQUIRE(first.has_value());
    CHECK(first->batch.step == 1);
    CHECK(first->task_id == 0);
    CHECK(first->batch.inputs.rows() == 16);
    CHECK(first->batch.labels.size() == 16);
}

TEST_CASE("each epoch is a reshuffled permutation of the same training set") {
    TaskStream s = TaskStream::blob_classification(2, 2, 4, 6.0, 55, 40, 10, 3, 8);
    const long per_epoch = s.batches_per_epoch(0);
    std::multiset<std::string> epoch1, epoch2;
    std::vector<long> order1, order2;
    for (long e = 0; e < 2; ++e) {
        for (long b = 0; b < per_epoch; ++b) {
            auto tagged = s.next();
            REQUIRE(tagged.has_value());
            for (std::size_t i = 0; i < tagged->batch.inputs.rows(); ++i) {
                auto key = row_key(tagged->batch.inputs.row(i), tagged->batch.labels[i]);
                (e == 0 ? epoch1 : epoch2).insert(key);
            }
        }
    }
    CHECK(epoch1 == epoch2);
}

TEST_CASE("stream replay under a fixed seed is bit-identical") {
    TaskStream a = TaskStream::simulated_regression(77);
    TaskStream b = TaskStream::simulated_regression(77);
    for (int i = 0; i < 700; ++i) {
        auto ba = a.next();
        auto bb = b.next();
        REQUIRE(ba.has_value());
        REQUIRE(bb.has_value());
        CHECK(ba->batch.inputs == bb->batch.inputs);
        CHECK(ba->batch.labels == bb->batch.labels);
        CHECK(ba->task_id == bb->task_id);
    }
    a.reset();
    TaskStream c = TaskStream::simulated_regression(77);
    auto ra = a.next();
    auto rc = c.next();
    CHECK(ra->batch.inputs == rc->batch.inputs);
}

TEST_CASE("exhausted stream returns the end sentinel") {
    TaskStream s = TaskStream::blob_classification(1, 2, 3, 5.0, 2, 8, 4, 1, 8);
    long steps = 0;
    while (s.next()) ++steps;
    CHECK(steps == s.total_steps());
    CHECK_FALSE(s.next().has_value());
}

TEST_CASE("blob stream partitions global classes across tasks") {
    TaskStream s = TaskStream::blob_classification(5, 2, 8, 8.0, 31, 20, 10, 2, 8);
    CHECK(s.num_classes() == 10);
    for (int t = 0; t < 5; ++t) {
        const TaskData& td = s.task(t);
        // test labels are clean; train labels carry the flip-noise analogue
        std::map<int, int> seen;
        for (double y : td.test_labels) ++seen[static_cast<int>(y)];
        REQUIRE(seen.size() == 2);
        CHECK(seen.begin()->first == 2 * t);
        CHECK(std::next(seen.begin())->first == 2 * t + 1);
        std::map<int, int> train_seen;
        for (double y : td.train_labels) ++train_seen[static_cast<int>(y)];
        CHECK(train_seen[2 * t] + train_seen[2 * t + 1] >
              static_cast<int>(td.train_labels.size() * 8 / 10));
    }
}

TEST_CASE("blob classes are separable by a nearest-mean oracle") {
    TaskStream s =
        TaskStream::blob_classification(5, 2, 16, 8.0, 99, 200, 100, 2, 16, 0, /*train_label_noise=*/0.0);
    // Class means estimated from train data; test points classified per task.
    long total = 0, correct = 0;
    for (int t = 0; t < s.num_tasks(); ++t) {
        const TaskData& td = s.task(t);
        std::map<int, std::vector<double>> mean;
        std::map<int, int> count;
        for (std::size_t i = 0; i < td.train_inputs.rows(); ++i) {
            const int c = static_cast<int>(td.train_labels[i]);
            auto& m = mean[c];
            m.resize(td.train_inputs.cols(), 0.0);
            for (std::size_t j = 0; j < td.train_inputs.cols(); ++j) m[j] += td.train_inputs(i, j);
            ++count[c];
        }
        for (auto& [c, m] : mean)
            for (double& v : m) v /= count[c];
        for (std::size_t i = 0; i < td.test_inputs.rows(); ++i) {
            int best = -1;
            double best_d = 1e300;
            for (const auto& [c, m] : mean) {
                double d = 0.0;
                for (std::size_t j = 0; j < td.test_inputs.cols(); ++j)
                    d += (td.test_inputs(i, j) - m[j]) * (td.test_inputs(i, j) - m[j]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            correct += best == static_cast<int>(td.test_labels[i]) ? 1 : 0;
            ++total;
        }
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("blob generation is deterministic and fails cleanly when infeasible") {
    TaskStream a = TaskStream::blob_classification(2, 2, 4, 5.0, 7, 10, 5, 1, 8);
    TaskStream b = TaskStream::blob_classification(2, 2, 4, 5.0, 7, 10, 5, 1, 8);
    CHECK(a.task(0).train_inputs == b.task(0).train_inputs);
    CHECK(a.task(1).test_labels == b.task(1).test_labels);
    // 50 classes on a 1-d axis drawn at the separation scale cannot fit.
    CHECK_THROWS_AS(TaskStream::blob_classification(25, 2, 1, 100.0, 1, 5, 2, 1, 8),
                    GenerationFailed);
}

TEST_CASE("stream dump and load round-trip bit-exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "driftnet_stream_fixture";
    std::filesystem::remove_all(dir);
    TaskStream original = TaskStream::blob_classification(2, 2, 4, 6.0, 13, 12, 6, 2, 8);
    original.dump(dir);
    TaskStream loaded = TaskStream::load(dir);
    CHECK(loaded.kind() == original.kind());
    CHECK(loaded.num_tasks() == original.num_tasks());
    CHECK(loaded.num_classes() == original.num_classes());
    CHECK(loaded.task(0).train_inputs == original.task(0).train_inputs);
    CHECK(loaded.task(1).test_labels == original.task(1).test_labels);
    while (true) {
        auto x = original.next();
        auto y = loaded.next();
        REQUIRE(x.has_value() == y.has_value());
        if (!x) break;
        CHECK(x->batch.inputs == y->batch.inputs);
        CHECK(x->batch.labels == y->batch.labels);
    }
    std::filesystem::remove_all(dir);
}

template <typename T>
constexpr bool carries_task_identity = requires(T view) { view.task_id; };

TEST_CASE("the learner-facing batch view carries no task identity") {
    static_assert(!carries_task_identity<Batch>);
    static_assert(carries_task_identity<TaggedBatch>);
    CHECK(true);
}
