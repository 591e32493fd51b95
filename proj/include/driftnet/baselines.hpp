#pragma once

#include <optional>
#include <string>
#include <vector>

#include "driftnet/analysis.hpp"
#include "driftnet/config.hpp"
#include "driftnet/memory.hpp"
#include "driftnet/retrieval.hpp"
#include "driftnet/tasks.hpp"

namespace driftnet {

enum class StrategyKind { FineTune, Joint, Stable, TheoreticalLimits, Er, DriftNet };

StrategyKind strategy_from_string(const std::string& name);
std::string strategy_name(StrategyKind kind);

struct MetricRow {
    std::string strategy;
    int repetition = 0;
    double sigma = 0.0;
    int tasks_seen = 0;
    int task_id = -1;  // -1 for aggregates
    std::string metric;
    double value = 0.0;
};

// DriftNet-only evaluation byproducts kept for analysis and reports.
struct DriftNetArtifacts {
    std::vector<RetrievalEvent> events;
    double final_ari = 0.0;
    double drift_rate_mean = 0.0;
    std::vector<double> per_task_drift_rate;
    Matrix final_pv;
    std::vector<int> final_groups;
    std::vector<int> final_hidden;
    std::vector<DriftTrace> traces;
};

struct StrategyRunResult {
    std::vector<MetricRow> rows;
    std::optional<DriftNetArtifacts> driftnet;
};

/// Fresh task stream for one repetition. Identical for every strategy and
/// noise level, so all strategies consume the same data in the same order.
TaskStream make_stream(const ExperimentConfig& cfg, int repetition);

/// Runs one lifelong-learning strategy over a fresh stream and reports
/// per-task test metrics at every task boundary.
StrategyRunResult run_strategy(StrategyKind kind, const ExperimentConfig& cfg, double sigma,
                               int repetition);

/// The full explore/encode/retrieve loop with noisy updates, reservoir
/// buffering, periodic grouping, and batch-level retrieval at boundaries.
StrategyRunResult run_driftnet(const ExperimentConfig& cfg, double sigma, int repetition);

}  // namespace driftnet
