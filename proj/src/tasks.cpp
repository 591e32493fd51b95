#include "driftnet/tasks.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "driftnet/errors.hpp"

namespace driftnet {

namespace {

constexpr std::uint64_t kDataPurpose = 0xD47A;
constexpr std::uint64_t kShufflePurpose = 0x5F1E;

// Simulation ground truth: task 1 uses x2 = 0 with coefficients (0,1,1,1),
// task 2 uses x2 = x1 with coefficients (0,-1,-1,-1); label noise N(0, 0.01).
struct SimTaskSpec {
    double beta0, beta1, beta2, beta3;
    bool x2_equals_x1;
};

constexpr SimTaskSpec kSimTasks[2] = {
    {0.0, 1.0, 1.0, 1.0, false},
    {0.0, -1.0, -1.0, -1.0, true},
};

constexpr double kSimLabelStd = 0.1;  // Var = 0.01

void fill_sim_split(const SimTaskSpec& spec, int n, bool noise_free,
                    RandomSource& rng, Matrix& x, std::vector<double>& y) {
    x = Matrix(static_cast<std::size_t>(n), 3);
    y.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double x1 = rng.normal();
        const double x3 = rng.normal();
        const double x2 = spec.x2_equals_x1 ? x1 : 0.0;
        x(i, 0) = x1;
        x(i, 1) = x2;
        x(i, 2) = x3;
        double label = spec.beta0 + spec.beta1 * x1 + spec.beta2 * x2 + spec.beta3 * x3;
        if (!noise_free) label += rng.normal(0.0, kSimLabelStd);
        y[static_cast<std::size_t>(i)] = label;
    }
}

}  // namespace

TaskStream TaskStream::simulated_regression(std::uint64_t seed, bool noise_free) {
    TaskStream s;
    s.kind_ = LabelKind::Regression;
    s.epochs_per_task_ = 100;
    s.batch_size_ = 16;
    s.seed_ = seed;

    RandomSource data_rng = RandomSource(seed, 0).derive(kDataPurpose);
    for (const auto& spec : kSimTasks) {
        TaskData task;
        fill_sim_split(spec, 10000, noise_free, data_rng, task.train_inputs, task.train_labels);
        fill_sim_split(spec, 2000, noise_free, data_rng, task.test_inputs, task.test_labels);
        s.tasks_.push_back(std::move(task));
    }
    s.reset();
    return s;
}

TaskStream TaskStream::blob_classification(int num_tasks, int classes_per_task,
                                           int input_dim, double class_separation,
                                           std::uint64_t seed, int train_per_class,
                                           int test_per_class, int epochs_per_task,
                                           int batch_size, int private_dims,
                                           double train_label_noise) {
    if (num_tasks * classes_per_task < 2)
        throw std::invalid_argument("blob_classification: need at least 2 classes");
    if (class_separation <= 0.0)
        throw std::invalid_argument("blob_classification: separation must be > 0");

    TaskStream s;
    s.kind_ = LabelKind::Classification;
    s.num_classes_ = num_tasks * classes_per_task;
    s.epochs_per_task_ = epochs_per_task;
    s.batch_size_ = batch_size;
    s.seed_ = seed;

    RandomSource data_rng = RandomSource(seed, 0).derive(kDataPurpose);

    // Every task's data lives on its own low-rank support: a core subspace
    // shared by all tasks plus a private block per task. The shared core
    // makes sequential training interfere (later tasks corrupt earlier
    // boundaries there), while each task's private directions are
    // gradient-free for the other tasks, so training noise drifts stored
    // minima along directions that other tasks' inputs can see. This mirrors
    // the singular input covariance of the regression tasks, where task 1
    // leaves x2 free and task 2 reads it.
    const int core_dim = std::min(6, input_dim);
    int private_dim = private_dims;
    if (private_dim <= 0) private_dim = std::max(1, (input_dim - core_dim) / num_tasks);
    private_dim = std::min(private_dim, std::max(0, (input_dim - core_dim) / num_tasks));
    const int sub_dim = core_dim + private_dim;

    // Random orthonormal frame; the first core_dim columns are the shared
    // core, then private_dim consecutive columns per task.
    std::vector<std::vector<double>> frame;
    const int needed = core_dim + private_dim * num_tasks;
    for (int d = 0; d < needed; ++d) {
        std::vector<double> v(static_cast<std::size_t>(input_dim));
        for (double& x : v) x = data_rng.normal();
        for (const auto& prev : frame) {
            double dot = 0.0;
            for (int j = 0; j < input_dim; ++j)
                dot += v[static_cast<std::size_t>(j)] * prev[static_cast<std::size_t>(j)];
            for (int j = 0; j < input_dim; ++j)
                v[static_cast<std::size_t>(j)] -= dot * prev[static_cast<std::size_t>(j)];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-9) throw GenerationFailed("blob_classification: rank-deficient frame");
        for (double& x : v) x /= norm;
        frame.push_back(std::move(v));
    }

    auto in_subspace = [&](int task, const std::vector<double>& coords) {
        std::vector<double> out(static_cast<std::size_t>(input_dim), 0.0);
        for (int d = 0; d < sub_dim; ++d) {
            const int column = d < core_dim ? d : core_dim + task * private_dim + (d - core_dim);
            for (int j = 0; j < input_dim; ++j)
                out[static_cast<std::size_t>(j)] +=
                    coords[static_cast<std::size_t>(d)] *
                    frame[static_cast<std::size_t>(column)][static_cast<std::size_t>(j)];
        }
        return out;
    };

    // Same-task classes differ only in their core coordinates, so the
    // discriminative signal of every task lives in the directions that later
    // tasks retrain; the private coordinates hold a per-task offset. Means
    // are rejection-sampled to pairwise distance >= separation.
    std::vector<std::vector<double>> task_offsets;  // private coords per task
    for (int t = 0; t < num_tasks; ++t) {
        std::vector<double> offset(static_cast<std::size_t>(private_dim));
        for (double& v : offset) v = data_rng.normal(0.0, class_separation * 0.75);
        task_offsets.push_back(std::move(offset));
    }

    const double core_prior = class_separation / 2.2;
    std::vector<std::vector<double>> means;
    for (int c = 0; c < s.num_classes_; ++c) {
        const int task = c / classes_per_task;
        bool placed = false;
        for (int attempt = 0; attempt < 10000; ++attempt) {
            std::vector<double> coords(static_cast<std::size_t>(sub_dim));
            for (int d = 0; d < core_dim; ++d)
                coords[static_cast<std::size_t>(d)] = data_rng.normal(0.0, core_prior);
            for (int d = 0; d < private_dim; ++d)
                coords[static_cast<std::size_t>(core_dim + d)] =
                    task_offsets[static_cast<std::size_t>(task)][static_cast<std::size_t>(d)];
            std::vector<double> candidate = in_subspace(task, coords);
            bool ok = true;
            for (const auto& m : means) {
                double d2 = 0.0;
                for (int j = 0; j < input_dim; ++j) {
                    const double d = candidate[static_cast<std::size_t>(j)] - m[static_cast<std::size_t>(j)];
                    d2 += d * d;
                }
                if (d2 < class_separation * class_separation) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                means.push_back(std::move(candidate));
                placed = true;
                break;
            }
        }
        if (!placed)
            throw GenerationFailed("blob_classification: could not place class mean " +
                                   std::to_string(c) + " after 10000 attempts");
    }

    // Train labels carry a small flip rate (the classification analogue of
    // the regression tasks' label noise); it anchors finite weights so the
    // softmax stays calibrated off-distribution. Test labels are clean.
    auto sample_class = [&](int cls, int n, Matrix& x, std::vector<double>& y, int row0,
                            bool with_label_noise) {
        const int task = cls / classes_per_task;
        std::vector<double> coords(static_cast<std::size_t>(sub_dim));
        for (int i = 0; i < n; ++i) {
            for (double& v : coords) v = data_rng.normal();
            const std::vector<double> spread = in_subspace(task, coords);
            for (int j = 0; j < input_dim; ++j)
                x(row0 + i, j) = means[static_cast<std::size_t>(cls)][static_cast<std::size_t>(j)] +
                                 spread[static_cast<std::size_t>(j)];
            double label = static_cast<double>(cls);
            if (with_label_noise && train_label_noise > 0.0 &&
                data_rng.uniform() < train_label_noise) {
                const int other = static_cast<int>(
                    data_rng.uniform_below(static_cast<std::uint64_t>(s.num_classes_ - 1)));
                label = static_cast<double>(other >= cls ? other + 1 : other);
            }
            y[static_cast<std::size_t>(row0 + i)] = label;
        }
    };

    for (int t = 0; t < num_tasks; ++t) {
        TaskData task;
        const int n_train = classes_per_task * train_per_class;
        const int n_test = classes_per_task * test_per_class;
        task.train_inputs = Matrix(static_cast<std::size_t>(n_train), static_cast<std::size_t>(input_dim));
        task.train_labels.resize(static_cast<std::size_t>(n_train));
        task.test_inputs = Matrix(static_cast<std::size_t>(n_test), static_cast<std::size_t>(input_dim));
        task.test_labels.resize(static_cast<std::size_t>(n_test));
        for (int k = 0; k < classes_per_task; ++k) {
            const int cls = t * classes_per_task + k;
            sample_class(cls, train_per_class, task.train_inputs, task.train_labels,
                         k * train_per_class, true);
            sample_class(cls, test_per_class, task.test_inputs, task.test_labels,
                         k * test_per_class, false);
        }
        s.tasks_.push_back(std::move(task));
    }
    s.reset();
    return s;
}

long TaskStream::batches_per_epoch(int task) const {
    const long n = static_cast<long>(tasks_.at(static_cast<std::size_t>(task)).train_inputs.rows());
    return (n + batch_size_ - 1) / batch_size_;
}

long TaskStream::steps_per_task(int task) const {
    return batches_per_epoch(task) * epochs_per_task_;
}

long TaskStream::total_steps() const {
    long total = 0;
    for (int i = 0; i < num_tasks(); ++i) total += steps_per_task(i);
    return total;
}

void TaskStream::reset() {
    shuffle_rng_ = RandomSource(seed_, 0).derive(kShufflePurpose);
    task_idx_ = 0;
    epoch_idx_ = 0;
    batch_idx_ = 0;
    t_ = 0;
    if (!tasks_.empty()) start_epoch();
}

void TaskStream::start_epoch() {
    const std::size_t n = tasks_[static_cast<std::size_t>(task_idx_)].train_inputs.rows();
    perm_.resize(n);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = shuffle_rng_.uniform_below(i);
        std::swap(perm_[i - 1], perm_[j]);
    }
}

std::optional<TaggedBatch> TaskStream::next() {
    if (task_idx_ >= num_tasks()) return std::nullopt;
    const TaskData& task = tasks_[static_cast<std::size_t>(task_idx_)];
    const std::size_t n = task.train_inputs.rows();
    const std::size_t p = task.train_inputs.cols();
    const std::size_t begin = static_cast<std::size_t>(batch_idx_) * static_cast<std::size_t>(batch_size_);
    const std::size_t end = std::min(begin + static_cast<std::size_t>(batch_size_), n);

    TaggedBatch out;
    out.task_id = task_idx_;
    out.batch.inputs = Matrix(end - begin, p);
    out.batch.labels.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t src = perm_[i];
        for (std::size_t j = 0; j < p; ++j)
            out.batch.inputs(i - begin, j) = task.train_inputs(src, j);
        out.batch.labels[i - begin] = task.train_labels[src];
    }
    out.batch.step = ++t_;

    ++batch_idx_;
    if (end >= n) {
        batch_idx_ = 0;
        ++epoch_idx_;
        if (epoch_idx_ >= epochs_per_task_) {
            epoch_idx_ = 0;
            ++task_idx_;
        }
        if (task_idx_ < num_tasks()) start_epoch();
    }
    return out;
}

void dump_split(const Matrix& inputs, const std::vector<double>& labels,
                const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("dump_split: cannot open " + file.string());
    out.precision(17);
    out << inputs.rows() << ' ' << inputs.cols() << '\n';
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        for (std::size_t j = 0; j < inputs.cols(); ++j) out << inputs(i, j) << ' ';
        out << labels[i] << '\n';
    }
}

std::pair<Matrix, std::vector<double>> load_split(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("load_split: cannot open " + file.string());
    std::size_t n = 0, p = 0;
    if (!(in >> n >> p)) throw IoError("load_split: bad header in " + file.string());
    Matrix x(n, p);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            if (!(in >> x(i, j))) throw IoError("load_split: truncated row");
        if (!(in >> y[i])) throw IoError("load_split: truncated label");
    }
    return {std::move(x), std::move(y)};
}

void TaskStream::dump(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream meta(dir / "meta.txt");
    if (!meta) throw IoError("dump: cannot open meta.txt under " + dir.string());
    meta << (kind_ == LabelKind::Regression ? "regression" : "classification") << ' '
         << num_tasks() << ' ' << epochs_per_task_ << ' ' << batch_size_ << ' '
         << num_classes_ << ' ' << seed_ << '\n';
    for (int i = 0; i < num_tasks(); ++i) {
        dump_split(tasks_[static_cast<std::size_t>(i)].train_inputs,
                   tasks_[static_cast<std::size_t>(i)].train_labels,
                   dir / ("task" + std::to_string(i) + "_train.txt"));
        dump_split(tasks_[static_cast<std::size_t>(i)].test_inputs,
                   tasks_[static_cast<std::size_t>(i)].test_labels,
                   dir / ("task" + std::to_string(i) + "_test.txt"));
    }
}

TaskStream TaskStream::load(const std::filesystem::path& dir) {
    std::ifstream meta(dir / "meta.txt");
    if (!meta) throw IoError("load: cannot open meta.txt under " + dir.string());
    std::string kind;
    int tasks = 0;
    TaskStream s;
    if (!(meta >> kind >> tasks >> s.epochs_per_task_ >> s.batch_size_ >> s.num_classes_ >> s.seed_))
        throw IoError("load: bad meta.txt");
    s.kind_ = (kind == "regression") ? LabelKind::Regression : LabelKind::Classification;
    for (int i = 0; i < tasks; ++i) {
        TaskData task;
        auto [tx, ty] = load_split(dir / ("task" + std::to_string(i) + "_train.txt"));
        task.train_inputs = std::move(tx);
        task.train_labels = std::move(ty);
        auto [ex, ey] = load_split(dir / ("task" + std::to_string(i) + "_test.txt"));
        task.test_inputs = std::move(ex);
        task.test_labels = std::move(ey);
        s.tasks_.push_back(std::move(task));
    }
    s.reset();
    return s;
}

}  // namespace driftnet
