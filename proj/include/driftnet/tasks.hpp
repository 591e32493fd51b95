#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "driftnet/matrix.hpp"
#include "driftnet/random.hpp"

namespace driftnet {

enum class LabelKind { Regression, Classification };

// Learner-facing batch view. Deliberately has no task identity field;
// evaluation code receives TaggedBatch instead.
struct Batch {
    Matrix inputs;               // n_batch x p
    std::vector<double> labels;  // regression values, or class indices
    long step = 0;               // global 1-based time step
};

struct TaggedBatch {
    Batch batch;
    int task_id = 0;
};

struct TaskData {
    Matrix train_inputs;
    std::vector<double> train_labels;
    Matrix test_inputs;
    std::vector<double> test_labels;
};

// Ordered sequence of tasks, each a fixed i.i.d. training set replayed for a
// number of epochs with per-epoch reshuffling. Single consumer; replay under
// the same seed is bit identical.
class TaskStream {
public:
    /// Two linear-regression tasks with singular input covariance. 10,000
    /// train / 2,000 test samples per task, 100 epochs, batch size 16.
    static TaskStream simulated_regression(std::uint64_t seed, bool noise_free = false);

    /// Class-incremental stream of Gaussian blobs; tasks partition the
    /// global class set, labels are global class indices. Each task's data
    /// occupies a shared low-dimensional core plus private_dims dimensions of
    /// its own (<= 0 picks (input_dim - core) / num_tasks); means are
    /// rejection-sampled to pairwise distance >= class_separation.
    static TaskStream blob_classification(int num_tasks, int classes_per_task,
                                          int input_dim, double class_separation,
                                          std::uint64_t seed,
                                          int train_per_class = 1000,
                                          int test_per_class = 500,
                                          int epochs_per_task = 20,
                                          int batch_size = 16,
                                          int private_dims = 0,
                                          double train_label_noise = 0.05);

    std::optional<TaggedBatch> next();
    void reset();

    LabelKind kind() const { return kind_; }
    int num_tasks() const { return static_cast<int>(tasks_.size()); }
    std::size_t input_dim() const { return tasks_.empty() ? 0 : tasks_[0].train_inputs.cols(); }
    int num_classes() const { return num_classes_; }
    int epochs_per_task() const { return epochs_per_task_; }
    int batch_size() const { return batch_size_; }
    const TaskData& task(int i) const { return tasks_.at(static_cast<std::size_t>(i)); }

    long batches_per_epoch(int task) const;
    long steps_per_task(int task) const;
    long total_steps() const;

    void dump(const std::filesystem::path& dir) const;
    static TaskStream load(const std::filesystem::path& dir);

private:
    TaskStream() = default;
    void start_epoch();

    std::vector<TaskData> tasks_;
    LabelKind kind_ = LabelKind::Regression;
    int num_classes_ = 0;
    int epochs_per_task_ = 0;
    int batch_size_ = 16;
    std::uint64_t seed_ = 0;

    RandomSource shuffle_rng_;
    std::vector<std::size_t> perm_;
    int task_idx_ = 0;
    int epoch_idx_ = 0;
    long batch_idx_ = 0;
    long t_ = 0;
};

/// Columnar text codec: header "<rows> <feature-cols>", then one row per
/// sample, whitespace-separated features with the label last.
void dump_split(const Matrix& inputs, const std::vector<double>& labels,
                const std::filesystem::path& file);
std::pair<Matrix, std::vector<double>> load_split(const std::filesystem::path& file);

}  // namespace driftnet
