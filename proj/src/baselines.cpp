#include "driftnet/baselines.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "driftnet/errors.hpp"
#include "driftnet/explorer.hpp"

namespace driftnet {

namespace {

constexpr std::uint64_t kStreamPurpose = 0x5EED;
constexpr std::uint64_t kInitPurpose = 0x111;
constexpr std::uint64_t kNoisePurpose = 0x222;
constexpr std::uint64_t kBufferPurpose = 0x333;
constexpr std::uint64_t kErPurpose = 0x444;
constexpr std::uint64_t kJointPurpose = 0x555;

std::uint64_t run_stream_id(StrategyKind kind, double sigma, int repetition) {
    std::uint64_t id = mix_stream(0xD21F, static_cast<std::uint64_t>(kind));
    id = mix_stream(id, std::bit_cast<std::uint64_t>(sigma));
    return mix_stream(id, static_cast<std::uint64_t>(repetition));
}

Model make_model(const ExperimentConfig& cfg, const TaskStream& stream, double sigma,
                 RandomSource& rng) {
    if (stream.kind() == LabelKind::Regression)
        return Model::linear_regression(stream.input_dim());
    const std::size_t classes = static_cast<std::size_t>(stream.num_classes());
    const bool want_mlp = cfg.model == "mlp" || (cfg.model == "auto" && cfg.noise == "dropout");
    if (want_mlp) {
        const double p = cfg.noise == "dropout" ? sigma : 0.0;
        return Model::mlp_one_hidden(stream.input_dim(), static_cast<std::size_t>(cfg.mlp_hidden),
                                     classes, p, rng);
    }
    return Model::softmax_linear(stream.input_dim(), classes, rng);
}

std::vector<int> argmax_rows(const Matrix& probs) {
    std::vector<int> out(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        auto row = probs.row(i);
        std::size_t best = 0;
        for (std::size_t k = 1; k < row.size(); ++k)
            if (row[k] > row[best]) best = k;
        out[i] = static_cast<int>(best);
    }
    return out;
}

double split_score(LabelKind kind, const Matrix& predictions, const std::vector<double>& labels) {
    if (kind == LabelKind::Regression)
        return criterion_value(Criterion::Mse, predictions, labels);
    std::vector<int> truth(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) truth[i] = static_cast<int>(labels[i]);
    return test_accuracy(argmax_rows(predictions), truth);
}

Matrix mean_prediction(const std::vector<Model>& models, const Matrix& x) {
    Matrix mean = models.front().predict(x);
    for (std::size_t m = 1; m < models.size(); ++m) {
        const Matrix p = models[m].predict(x);
        for (std::size_t i = 0; i < mean.data().size(); ++i) mean.data()[i] += p.data()[i];
    }
    for (double& v : mean.data()) v /= static_cast<double>(models.size());
    return mean;
}

const char* metric_name(LabelKind kind) {
    return kind == LabelKind::Regression ? "test_loss" : "test_accuracy";
}

const char* avg_metric_name(LabelKind kind) {
    return kind == LabelKind::Regression ? "avg_test_loss" : "avg_test_accuracy";
}

// Appends per-task rows plus the aggregate row for one boundary.
void append_boundary_rows(std::vector<MetricRow>& rows, const std::string& strategy,
                          int repetition, double sigma, int tasks_seen, LabelKind kind,
                          const std::vector<double>& per_task_scores) {
    double sum = 0.0;
    for (int i = 0; i < tasks_seen; ++i) {
        rows.push_back({strategy, repetition, sigma, tasks_seen, i, metric_name(kind),
                        per_task_scores[static_cast<std::size_t>(i)]});
        sum += per_task_scores[static_cast<std::size_t>(i)];
    }
    rows.push_back({strategy, repetition, sigma, tasks_seen, -1, avg_metric_name(kind),
                    sum / static_cast<double>(tasks_seen)});
}

// Shared scaffolding: walk the stream, hand each batch to `on_batch`, and at
// each task boundary collect per-task scores from `score_task`.
template <typename OnBatch, typename ScoreTask>
void stream_loop(TaskStream& stream, OnBatch&& on_batch, ScoreTask&& score_task,
                 std::vector<MetricRow>& rows, const std::string& strategy, int repetition,
                 double sigma) {
    int current_task = 0;
    long steps_left = stream.steps_per_task(0);
    while (auto tagged = stream.next()) {
        on_batch(*tagged);
        if (--steps_left == 0) {
            const int tasks_seen = current_task + 1;
            std::vector<double> scores;
            for (int i = 0; i < tasks_seen; ++i) scores.push_back(score_task(i, tasks_seen));
            append_boundary_rows(rows, strategy, repetition, sigma, tasks_seen, stream.kind(),
                                 scores);
            ++current_task;
            if (current_task < stream.num_tasks()) steps_left = stream.steps_per_task(current_task);
        }
    }
}

StrategyRunResult run_fine_tune(const ExperimentConfig& cfg, double sigma, int repetition) {
    TaskStream stream = make_stream(cfg, repetition);
    RandomSource root(cfg.base_seed, run_stream_id(StrategyKind::FineTune, sigma, repetition));
    RandomSource init_rng = root.derive(kInitPurpose);
    RandomSource noise_rng = root.derive(kNoisePurpose);
    Model model = make_model(cfg, stream, sigma, init_rng);

    StrategyRunResult result;
    stream_loop(
        stream,
        [&](const TaggedBatch& tb) {
            model = noisy_update(model, tb.batch, NoiseSpec::none(), cfg.learning_rate, noise_rng);
        },
        [&](int task, int) {
            const TaskData& td = stream.task(task);
            return split_score(stream.kind(), model.predict(td.test_inputs), td.test_labels);
        },
        result.rows, strategy_name(StrategyKind::FineTune), repetition, sigma);
    return result;
}

StrategyRunResult run_stable(const ExperimentConfig& cfg, double sigma, int repetition) {
    TaskStream stream = make_stream(cfg, repetition);
    RandomSource root(cfg.base_seed, run_stream_id(StrategyKind::Stable, sigma, repetition));
    RandomSource init_rng = root.derive(kInitPurpose);
    RandomSource noise_rng = root.derive(kNoisePurpose);
    Model model = make_model(cfg, stream, sigma, init_rng);

    std::vector<Model> snapshots;
    long step_in_task = 0;
    int task_idx = 0;
    int epochs_done = 0;

    StrategyRunResult result;
    stream_loop(
        stream,
        [&](const TaggedBatch& tb) {
            model = noisy_update(model, tb.batch, NoiseSpec::none(), cfg.learning_rate, noise_rng);
            ++step_in_task;
            if (step_in_task % stream.batches_per_epoch(task_idx) == 0) {
                ++epochs_done;
                if (epochs_done % cfg.encode_interval_epochs == 0) snapshots.push_back(model);
            }
            if (step_in_task == stream.steps_per_task(task_idx)) {
                step_in_task = 0;
                ++task_idx;
            }
        },
        [&](int task, int) {
            const TaskData& td = stream.task(task);
            std::vector<Model> window;
            const std::size_t w = std::min<std::size_t>(
                snapshots.size(), static_cast<std::size_t>(cfg.stable_window));
            if (w == 0) window.push_back(model);
            for (std::size_t i = snapshots.size() - w; i < snapshots.size(); ++i)
                window.push_back(snapshots[i]);
            return split_score(stream.kind(), mean_prediction(window, td.test_inputs),
                               td.test_labels);
        },
        result.rows, strategy_name(StrategyKind::Stable), repetition, sigma);
    return result;
}

StrategyRunResult run_theoretical_limits(const ExperimentConfig& cfg, double sigma,
                                         int repetition) {
    TaskStream stream = make_stream(cfg, repetition);
    RandomSource root(cfg.base_seed,
                      run_stream_id(StrategyKind::TheoreticalLimits, sigma, repetition));
    RandomSource noise_rng = root.derive(kNoisePurpose);

    // One model per task; training and testing are routed by the true id.
    std::vector<Model> per_task;
    for (int i = 0; i < stream.num_tasks(); ++i) {
        RandomSource init_rng = root.derive(kInitPurpose + static_cast<std::uint64_t>(i));
        per_task.push_back(make_model(cfg, stream, sigma, init_rng));
    }

    StrategyRunResult result;
    stream_loop(
        stream,
        [&](const TaggedBatch& tb) {
            Model& m = per_task[static_cast<std::size_t>(tb.task_id)];
            m = noisy_update(m, tb.batch, NoiseSpec::none(), cfg.learning_rate, noise_rng);
        },
        [&](int task, int) {
            const TaskData& td = stream.task(task);
            return split_score(stream.kind(),
                               per_task[static_cast<std::size_t>(task)].predict(td.test_inputs),
                               td.test_labels);
        },
        result.rows, strategy_name(StrategyKind::TheoreticalLimits), repetition, sigma);
    return result;
}

StrategyRunResult run_joint(const ExperimentConfig& cfg, double sigma, int repetition) {
    TaskStream stream = make_stream(cfg, repetition);
    RandomSource root(cfg.base_seed, run_stream_id(StrategyKind::Joint, sigma, repetition));

    // Offline retraining on the union of everything seen, with the same total
    // gradient-step budget as the sequential strategies at that boundary.
    auto train_union = [&](int tasks_seen) {
        const std::size_t p = stream.input_dim();
        std::size_t total_rows = 0;
        for (int i = 0; i < tasks_seen; ++i) total_rows += stream.task(i).train_inputs.rows();
        Matrix x(total_rows, p);
        std::vector<double> y(total_rows);
        std::size_t r = 0;
        for (int i = 0; i < tasks_seen; ++i) {
            const TaskData& td = stream.task(i);
            for (std::size_t j = 0; j < td.train_inputs.rows(); ++j, ++r) {
                for (std::size_t k = 0; k < p; ++k) x(r, k) = td.train_inputs(j, k);
                y[r] = td.train_labels[j];
            }
        }

        RandomSource init_rng = root.derive(kInitPurpose + static_cast<std::uint64_t>(tasks_seen));
        RandomSource train_rng = root.derive(kJointPurpose + static_cast<std::uint64_t>(tasks_seen));
        Model model = make_model(cfg, stream, sigma, init_rng);

        const std::size_t bs = static_cast<std::size_t>(stream.batch_size());
        std::vector<std::size_t> perm(total_rows);
        for (int epoch = 0; epoch < stream.epochs_per_task(); ++epoch) {
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            for (std::size_t i = total_rows; i > 1; --i)
                std::swap(perm[i - 1], perm[train_rng.uniform_below(i)]);
            for (std::size_t start = 0; start < total_rows; start += bs) {
                const std::size_t end = std::min(start + bs, total_rows);
                Batch b;
                b.inputs = Matrix(end - start, p);
                b.labels.resize(end - start);
                for (std::size_t i = start; i < end; ++i) {
                    for (std::size_t k = 0; k < p; ++k) b.inputs(i - start, k) = x(perm[i], k);
                    b.labels[i - start] = y[perm[i]];
                }
                model = noisy_update(model, b, NoiseSpec::none(), cfg.learning_rate, train_rng);
            }
        }
        return model;
    };

    StrategyRunResult result;
    std::vector<Model> boundary_models;
    stream_loop(
        stream, [](const TaggedBatch&) {},
        [&](int task, int tasks_seen) {
            if (static_cast<int>(boundary_models.size()) < tasks_seen)
                boundary_models.push_back(train_union(tasks_seen));
            const TaskData& td = stream.task(task);
            return split_score(stream.kind(), boundary_models.back().predict(td.test_inputs),
                               td.test_labels);
        },
        result.rows, strategy_name(StrategyKind::Joint), repetition, sigma);
    return result;
}

StrategyRunResult run_er(const ExperimentConfig& cfg, double sigma, int repetition) {
    TaskStream stream = make_stream(cfg, repetition);
    RandomSource root(cfg.base_seed, run_stream_id(StrategyKind::Er, sigma, repetition));
    RandomSource init_rng = root.derive(kInitPurpose);
    RandomSource noise_rng = root.derive(kNoisePurpose);
    RandomSource buffer_rng = root.derive(kBufferPurpose);
    RandomSource sample_rng = root.derive(kErPurpose);
    Model model = make_model(cfg, stream, sigma, init_rng);

    const std::size_t capacity = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.er_buffer_rows / std::max(1, stream.batch_size())));
    ReservoirBuffer buffer(capacity);
    long seen = 0;

    StrategyRunResult result;
    stream_loop(
        stream,
        [&](const TaggedBatch& tb) {
            const Batch& b = tb.batch;
            if (!buffer.empty()) {
                const Batch& replay =
                    buffer.batch(static_cast<std::size_t>(sample_rng.uniform_below(buffer.size())));
                Batch combined;
                const std::size_t p = b.inputs.cols();
                combined.inputs = Matrix(b.inputs.rows() + replay.inputs.rows(), p);
                combined.labels.reserve(b.labels.size() + replay.labels.size());
                std::size_t r = 0;
                for (const Batch* src : {&b, &replay}) {
                    for (std::size_t i = 0; i < src->inputs.rows(); ++i, ++r)
                        for (std::size_t k = 0; k < p; ++k)
                            combined.inputs(r, k) = src->inputs(i, k);
                    combined.labels.insert(combined.labels.end(), src->labels.begin(),
                                           src->labels.end());
                }
                combined.step = b.step;
                model = noisy_update(model, combined, NoiseSpec::none(), cfg.learning_rate,
                                     noise_rng);
            } else {
                model = noisy_update(model, b, NoiseSpec::none(), cfg.learning_rate, noise_rng);
            }
            buffer.update(b, ++seen, buffer_rng);
        },
        [&](int task, int) {
            const TaskData& td = stream.task(task);
            return split_score(stream.kind(), model.predict(td.test_inputs), td.test_labels);
        },
        result.rows, strategy_name(StrategyKind::Er), repetition, sigma);
    return result;
}

}  // namespace

StrategyKind strategy_from_string(const std::string& name) {
    if (name == "fine-tune") return StrategyKind::FineTune;
    if (name == "joint") return StrategyKind::Joint;
    if (name == "stable") return StrategyKind::Stable;
    if (name == "theoretical-limits") return StrategyKind::TheoreticalLimits;
    if (name == "er") return StrategyKind::Er;
    if (name == "driftnet") return StrategyKind::DriftNet;
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

std::string strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::FineTune: return "fine-tune";
        case StrategyKind::Joint: return "joint";
        case StrategyKind::Stable: return "stable";
        case StrategyKind::TheoreticalLimits: return "theoretical-limits";
        case StrategyKind::Er: return "er";
        case StrategyKind::DriftNet: return "driftnet";
    }
    throw std::invalid_argument("unknown strategy kind");
}

TaskStream make_stream(const ExperimentConfig& cfg, int repetition) {
    const std::uint64_t seed =
        mix_stream(cfg.base_seed, mix_stream(kStreamPurpose, static_cast<std::uint64_t>(repetition)));
    if (cfg.experiment == "simulation") return TaskStream::simulated_regression(seed);
    return TaskStream::blob_classification(cfg.blob_tasks, cfg.blob_classes_per_task,
                                           cfg.blob_input_dim, cfg.blob_separation, seed,
                                           cfg.blob_train_per_class, cfg.blob_test_per_class,
                                           cfg.blob_epochs, 16, cfg.blob_private_dims,
                                           cfg.blob_label_noise);
}

StrategyRunResult run_driftnet(const ExperimentConfig& cfg, double sigma, int repetition) {
    TaskStream stream = make_stream(cfg, repetition);
    RandomSource root(cfg.base_seed, run_stream_id(StrategyKind::DriftNet, sigma, repetition));
    RandomSource init_rng = root.derive(kInitPurpose);
    RandomSource noise_rng = root.derive(kNoisePurpose);
    RandomSource buffer_rng = root.derive(kBufferPurpose);

    Model model = make_model(cfg, stream, sigma, init_rng);
    const NoiseSpec noise = cfg.noise_spec(sigma);
    const Criterion crit = model.default_criterion();
    const Measure measure = cfg.measure_kind();
    const PvMode pv_mode = cfg.pv_mode_kind();

    ReservoirBuffer buffer(static_cast<std::size_t>(cfg.buffer_batches));
    KnowledgeBase kb(model, cfg.group_cap);

    StrategyRunResult result;
    DriftNetArtifacts art;
    const int probe_rows = cfg.drift_probe_rows;
    const int t0 = std::max(1, cfg.experiment == "simulation" ? stream.epochs_per_task() / 4
                                                              : stream.epochs_per_task() / 2);
    for (int i = 0; i < stream.num_tasks(); ++i) art.traces.push_back({t0, {}});

    auto probe_inputs = [&](int task) {
        const Matrix& test = stream.task(task).test_inputs;
        const std::size_t rows = std::min<std::size_t>(static_cast<std::size_t>(probe_rows),
                                                       test.rows());
        Matrix probe(rows, test.cols());
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < test.cols(); ++j) probe(i, j) = test(i, j);
        return probe;
    };
    std::vector<Matrix> probes;
    for (int i = 0; i < stream.num_tasks(); ++i) probes.push_back(probe_inputs(i));

    double epoch_loss = 0.0;
    long epoch_batches = 0;
    long step_in_task = 0;
    int task_idx = 0;
    int epochs_done = 0;
    std::vector<double> trailing_history;
    int gate_rejections = 0;

    const std::string name = strategy_name(StrategyKind::DriftNet);

    stream_loop(
        stream,
        [&](const TaggedBatch& tb) {
            const Batch& b = tb.batch;
            epoch_loss += criterion_value(crit, model.predict(b.inputs), b.labels);
            ++epoch_batches;
            model = noisy_update(model, b, noise, cfg.learning_rate, noise_rng);
            buffer.update(b, b.step, buffer_rng);
            ++step_in_task;

            if (step_in_task % stream.batches_per_epoch(task_idx) == 0) {
                ++epochs_done;
                const double trailing = epoch_loss / static_cast<double>(epoch_batches);
                epoch_loss = 0.0;
                epoch_batches = 0;

                art.traces[static_cast<std::size_t>(task_idx)].snapshots.push_back(
                    model.features(probes[static_cast<std::size_t>(task_idx)]));

                if (epochs_done % cfg.snapshot_interval_epochs == 0) {
                    // A stored minimum must sit on a loss plateau: the
                    // trailing epoch loss stays within a factor of the best
                    // recent epoch, in both directions. Still-descending
                    // epochs right after initialization or a task switch
                    // straddle basins; their mixed performance vectors glue
                    // the clusters together and their residuals inflate the
                    // within-group output variance. The baseline is a short
                    // rolling window so each task's own plateau level counts.
                    bool stable_loss = cfg.snapshot_gate <= 0.0;
                    if (!stable_loss && !trailing_history.empty()) {
                        double recent = trailing_history.back();
                        const std::size_t window = std::min<std::size_t>(3, trailing_history.size());
                        for (std::size_t k = trailing_history.size() - window;
                             k < trailing_history.size(); ++k)
                            recent = std::min(recent, trailing_history[k]);
                        const double lo = std::min(trailing, recent) + 1e-12;
                        const double hi = std::max(trailing, recent) + 1e-12;
                        stable_loss = hi <= cfg.snapshot_gate * lo;
                    }
                    // Never let the gate starve the knowledge base, but give
                    // it a few epochs first: the earliest epochs are still
                    // in transit from initialization and would pollute the
                    // first group's spread.
                    if (kb.empty() && !stable_loss) {
                        ++gate_rejections;
                        if (gate_rejections >= 3) stable_loss = true;
                    }
                    if (stable_loss) kb.add_snapshot(model.params(), b.step, tb.task_id);
                }
                trailing_history.push_back(trailing);
                if (epochs_done % cfg.encode_interval_epochs == 0 && !kb.empty() &&
                    !buffer.empty())
                    kb.encode(buffer, cfg.dbscan_eps, cfg.dbscan_min_pts, pv_mode,
                              cfg.pv_threshold);
            }
            if (step_in_task == stream.steps_per_task(task_idx)) {
                step_in_task = 0;
                ++task_idx;
            }
        },
        [&](int task, int tasks_seen) {
            const TaskData& td = stream.task(task);
            const std::size_t bs = static_cast<std::size_t>(stream.batch_size());
            const std::size_t n = td.test_inputs.rows();
            Matrix predictions(n, kb.prototype().output_dim());
            for (std::size_t start = 0; start < n; start += bs) {
                const std::size_t end = std::min(start + bs, n);
                Matrix xb(end - start, td.test_inputs.cols());
                for (std::size_t i = start; i < end; ++i)
                    for (std::size_t j = 0; j < td.test_inputs.cols(); ++j)
                        xb(i - start, j) = td.test_inputs(i, j);
                RetrievalEvent event = retrieve(kb, xb, measure);
                event.tasks_seen = tasks_seen;
                event.test_task = task;
                for (std::size_t i = start; i < end; ++i)
                    for (std::size_t k = 0; k < predictions.cols(); ++k)
                        predictions(i, k) = event.prediction(i - start, k);
                art.events.push_back(std::move(event));
            }
            return split_score(stream.kind(), predictions, td.test_labels);
        },
        result.rows, name, repetition, sigma);

    // Retrieval accuracy per boundary, from that boundary's events.
    for (int tasks_seen = 1; tasks_seen <= stream.num_tasks(); ++tasks_seen) {
        std::vector<RetrievalEvent> boundary;
        for (const auto& e : art.events)
            if (e.tasks_seen == tasks_seen) boundary.push_back(e);
        if (boundary.empty()) continue;
        const RetrievalAccuracy acc = retrieval_accuracy(boundary);
        for (const auto& [task, value] : acc.per_task)
            result.rows.push_back(
                {name, repetition, sigma, tasks_seen, task, "retrieval_accuracy", value});
        result.rows.push_back(
            {name, repetition, sigma, tasks_seen, -1, "retrieval_accuracy", acc.overall});
    }

    // Final grouping quality against the hidden task ids; ungrouped snapshots
    // count as singletons.
    if (kb.size() >= 2) {
        std::vector<int> gr(kb.size());
        std::vector<int> hidden(kb.size());
        int next = 0;
        for (int g : kb.groups()) next = std::max(next, g + 1);
        for (std::size_t i = 0; i < kb.size(); ++i) {
            gr[i] = kb.groups()[i] >= 0 ? kb.groups()[i] : next++;
            hidden[i] = kb.snapshots()[i].hidden_task;
        }
        art.final_ari = adjusted_rand_index(gr, hidden);
        art.final_groups = gr;
        art.final_hidden = hidden;
        result.rows.push_back(
            {name, repetition, sigma, stream.num_tasks(), -1, "ari", art.final_ari});
    }
    if (!buffer.empty() && !kb.empty())
        art.final_pv = kb.performance_vectors(buffer, pv_mode, cfg.pv_threshold);

    double rate_sum = 0.0;
    int rate_count = 0;
    for (const DriftTrace& trace : art.traces) {
        double rate = 0.0;
        try {
            rate = drift_rate(trace);
        } catch (const DegenerateTrace&) {
            rate = 0.0;
        }
        art.per_task_drift_rate.push_back(rate);
        rate_sum += rate;
        ++rate_count;
    }
    art.drift_rate_mean = rate_count ? rate_sum / rate_count : 0.0;
    result.rows.push_back(
        {name, repetition, sigma, stream.num_tasks(), -1, "drift_rate", art.drift_rate_mean});

    result.driftnet = std::move(art);
    return result;
}

StrategyRunResult run_strategy(StrategyKind kind, const ExperimentConfig& cfg, double sigma,
                               int repetition) {
    switch (kind) {
        case StrategyKind::FineTune: return run_fine_tune(cfg, sigma, repetition);
        case StrategyKind::Joint: return run_joint(cfg, sigma, repetition);
        case StrategyKind::Stable: return run_stable(cfg, sigma, repetition);
        case StrategyKind::TheoreticalLimits: return run_theoretical_limits(cfg, sigma, repetition);
        case StrategyKind::Er: return run_er(cfg, sigma, repetition);
        case StrategyKind::DriftNet: return run_driftnet(cfg, sigma, repetition);
    }
    throw std::invalid_argument("run_strategy: unknown kind");
}

}  // namespace driftnet
