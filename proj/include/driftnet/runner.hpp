#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "driftnet/baselines.hpp"
#include "driftnet/config.hpp"

namespace driftnet {

/// Runs jobs [0, count) across `workers` threads (<= 0 resolves to the
/// DRIFTNET_WORKERS env var, then hardware concurrency). Each job owns its
/// state; completion order does not affect results.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

int resolve_workers(int configured, std::size_t jobs);

/// Runs every (strategy, sigma, repetition) combination, then writes
/// metrics.csv plus per-run artifact directories (retrieval-event logs,
/// drift traces, final performance vectors) under cfg.output_dir. Output is
/// byte-identical for identical configs.
void run_experiment(const ExperimentConfig& cfg);

/// CSV schema: strategy,repetition,sigma,tasks_seen,task_id,metric,value
void write_metrics_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& file);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& file);

void write_events_jsonl(const std::vector<RetrievalEvent>& events,
                        const std::filesystem::path& file);

void write_trace(const DriftTrace& trace, const std::filesystem::path& file);
DriftTrace read_trace(const std::filesystem::path& file);

std::string format_sigma(double sigma);

}  // namespace driftnet
