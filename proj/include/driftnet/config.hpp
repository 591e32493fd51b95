#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "driftnet/explorer.hpp"
#include "driftnet/retrieval.hpp"

namespace driftnet {

// Experiment description: presets per experiment kind, overridable from a
// line-oriented "key = value" file with [section] headers.
struct ExperimentConfig {
    // [experiment]
    std::string experiment = "simulation";  // simulation | blobs
    std::vector<std::string> strategies = {"driftnet", "stable"};
    std::vector<double> sigmas = {3.0};
    int repetitions = 10;
    std::uint64_t base_seed = 42;
    std::string output_dir = "out";
    int workers = 0;  // 0 -> DRIFTNET_WORKERS env or hardware concurrency

    // [driftnet]
    std::string noise = "gradient";  // none | batch-only | input | gradient | dropout
    bool relative_noise = false;
    double learning_rate = 1e-3;
    int snapshot_interval_epochs = 1;
    int encode_interval_epochs = 10;
    int buffer_batches = 20;
    double dbscan_eps = 1.0;
    int dbscan_min_pts = 3;
    int group_cap = 20;
    std::string measure = "regression-variance";
    std::string pv_mode = "thresholded";  // raw | thresholded
    double pv_threshold = 0.3;            // three label-noise standard deviations
    double snapshot_gate = 1.5;           // trailing-loss plateau band; <= 0 disables gating
    int drift_probe_rows = 32;

    // [baselines]
    int stable_window = 10;
    int er_buffer_rows = 1000;

    // [blobs]
    int blob_tasks = 5;
    int blob_classes_per_task = 2;
    int blob_input_dim = 16;
    double blob_separation = 8.0;
    int blob_train_per_class = 1000;
    int blob_test_per_class = 500;
    int blob_epochs = 20;
    int blob_private_dims = 0;  // <= 0: auto
    double blob_label_noise = 0.05;
    std::string model = "auto";  // auto | softmax-linear | mlp
    int mlp_hidden = 64;

    static ExperimentConfig preset(const std::string& experiment);
    static ExperimentConfig load(const std::filesystem::path& file);

    /// Throws ConfigError naming the offending field.
    void validate() const;

    NoiseSpec noise_spec(double sigma) const;
    Measure measure_kind() const;
    PvMode pv_mode_kind() const;
};

}  // namespace driftnet
