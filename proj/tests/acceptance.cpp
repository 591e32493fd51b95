#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <vector>

#include "driftnet/analysis.hpp"
#include "driftnet/baselines.hpp"
#include "driftnet/config.hpp"
#include "driftnet/runner.hpp"
#include "driftnet/selfcheck.hpp"

using namespace driftnet;

namespace {

constexpr int kReps = 10;
const std::vector<double> kSweepSigmas = {0.001, 0.3, 1.0, 3.0, 6.0, 10.0};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double mean_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / static_cast<double>(v.size());
}

void report_line(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
}

// In/out-of-distribution uncertainty samples per task from one run's
// final-boundary events (first `batches` events per task).
using UncertaintySplit = std::map<int, std::pair<std::vector<double>, std::vector<double>>>;

UncertaintySplit split_uncertainties(const DriftNetArtifacts& art, int tasks_seen, int batches) {
    UncertaintySplit split;
    std::map<int, int> used;
    for (const RetrievalEvent& e : art.events) {
        if (e.tasks_seen != tasks_seen) continue;
        if (used[e.test_task] >= batches) continue;
        ++used[e.test_task];
        for (std::size_t g = 0; g < e.group_labels.size(); ++g) {
            const auto& members = e.group_member_tasks[g];
            if (members.empty()) continue;
            std::map<int, int> counts;
            for (int t : members) ++counts[t];
            int majority = members[0];
            int best = 0;
            for (const auto& [t, c] : counts)
                if (c > best) {
                    best = c;
                    majority = t;
                }
            auto& [in_samples, out_samples] = split[e.test_task];
            (majority == e.test_task ? in_samples : out_samples).push_back(e.uncertainties[g]);
        }
    }
    return split;
}

struct SimResults {
    std::map<double, std::vector<double>> loss;       // driftnet final avg test loss
    std::map<double, std::vector<double>> retrieval;  // final overall retrieval accuracy
    std::map<double, std::vector<double>> ari;
    std::map<double, std::vector<double>> drift;
    std::vector<double> stable_loss;                  // sigma = 3
    std::vector<UncertaintySplit> sigma3_uncertainty;  // per repetition
    double elapsed_sigma3 = 0.0;
    double elapsed_total = 0.0;
};

const SimResults& sim_results() {
    static const SimResults results = [] {
        SimResults out;
        ExperimentConfig cfg = ExperimentConfig::preset("simulation");
        cfg.repetitions = kReps;

        const auto t_start = std::chrono::steady_clock::now();

        // Phase 1: sigma = 3 head-to-head (criterion 1 budget).
        {
            std::vector<StrategyRunResult> driftnet_runs(kReps), stable_runs(kReps);
            parallel_for(2 * kReps, cfg.workers, [&](std::size_t i) {
                const int rep = static_cast<int>(i % kReps);
                if (i < static_cast<std::size_t>(kReps))
                    driftnet_runs[static_cast<std::size_t>(rep)] = run_driftnet(cfg, 3.0, rep);
                else
                    stable_runs[static_cast<std::size_t>(rep)] =
                        run_strategy(StrategyKind::Stable, cfg, 3.0, rep);
            });
            for (int rep = 0; rep < kReps; ++rep) {
                const auto& run = driftnet_runs[static_cast<std::size_t>(rep)];
                for (const MetricRow& r : run.rows) {
                    if (r.task_id != -1 || r.tasks_seen != 2) continue;
                    if (r.metric == "avg_test_loss") out.loss[3.0].push_back(r.value);
                    if (r.metric == "retrieval_accuracy") out.retrieval[3.0].push_back(r.value);
                    if (r.metric == "ari") out.ari[3.0].push_back(r.value);
                    if (r.metric == "drift_rate") out.drift[3.0].push_back(r.value);
                }
                out.sigma3_uncertainty.push_back(split_uncertainties(*run.driftnet, 2, 50));
                for (const MetricRow& r : stable_runs[static_cast<std::size_t>(rep)].rows)
                    if (r.metric == "avg_test_loss" && r.tasks_seen == 2)
                        out.stable_loss.push_back(r.value);
            }
        }
        out.elapsed_sigma3 = seconds_since(t_start);

        // Phase 2: the remaining noise levels (criterion 2 budget covers both).
        {
            std::vector<double> rest;
            for (double s : kSweepSigmas)
                if (s != 3.0) rest.push_back(s);
            std::vector<StrategyRunResult> runs(rest.size() * kReps);
            parallel_for(runs.size(), cfg.workers, [&](std::size_t i) {
                const double sigma = rest[i / kReps];
                const int rep = static_cast<int>(i % kReps);
                runs[i] = run_driftnet(cfg, sigma, rep);
            });
            for (std::size_t i = 0; i < runs.size(); ++i) {
                const double sigma = rest[i / kReps];
                for (const MetricRow& r : runs[i].rows) {
                    if (r.task_id != -1 || r.tasks_seen != 2) continue;
                    if (r.metric == "avg_test_loss") out.loss[sigma].push_back(r.value);
                    if (r.metric == "retrieval_accuracy") out.retrieval[sigma].push_back(r.value);
                    if (r.metric == "ari") out.ari[sigma].push_back(r.value);
                    if (r.metric == "drift_rate") out.drift[sigma].push_back(r.value);
                }
            }
        }
        out.elapsed_total = seconds_since(t_start);
        return out;
    }();
    return results;
}

struct BlobResults {
    std::map<std::string, std::vector<double>> final_acc;  // strategy -> per-rep
    double elapsed = 0.0;
};

const BlobResults& blob_results() {
    static const BlobResults results = [] {
        BlobResults out;
        ExperimentConfig cfg = ExperimentConfig::preset("blobs");
        cfg.repetitions = kReps;
        const std::vector<StrategyKind> kinds = {StrategyKind::DriftNet, StrategyKind::Stable,
                                                 StrategyKind::Joint,
                                                 StrategyKind::TheoreticalLimits};
        const auto t_start = std::chrono::steady_clock::now();
        std::vector<StrategyRunResult> runs(kinds.size() * kReps);
        parallel_for(runs.size(), cfg.workers, [&](std::size_t i) {
            runs[i] = run_strategy(kinds[i / kReps], cfg, cfg.sigmas[0], static_cast<int>(i % kReps));
        });
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const std::string name = strategy_name(kinds[i / kReps]);
            for (const MetricRow& r : runs[i].rows)
                if (r.metric == "avg_test_accuracy" && r.task_id == -1 &&
                    r.tasks_seen == cfg.blob_tasks)
                    out.final_acc[name].push_back(r.value);
        }
        out.elapsed = seconds_since(t_start);
        return out;
    }();
    return results;
}

}  // namespace

TEST_CASE("criterion 1: two-task regression headline losses") {
    const SimResults& sim = sim_results();
    const double driftnet_loss = mean_of(sim.loss.at(3.0));
    const double stable_loss = mean_of(sim.stable_loss);
    const bool pass = driftnet_loss <= 0.05 && stable_loss >= 1.0 && sim.elapsed_sigma3 <= 300.0;
    std::ostringstream detail;
    detail << "driftnet avg loss " << driftnet_loss << " (<= 0.05), stable " << stable_loss
           << " (>= 1.0), elapsed " << sim.elapsed_sigma3 << "s (<= 300)";
    report_line(1, pass, detail.str());
    CHECK(driftnet_loss <= 0.05);
    CHECK(stable_loss >= 1.0);
    CHECK(sim.elapsed_sigma3 <= 300.0);
}

TEST_CASE("criterion 2: retrieval accuracy rises, plateaus, then falls with noise") {
    const SimResults& sim = sim_results();
    const double at_tiny = mean_of(sim.retrieval.at(0.001));
    const double at_huge = mean_of(sim.retrieval.at(10.0));
    bool plateau_ok = true;
    std::ostringstream detail;
    detail << "retrieval: sigma 0.001 -> " << at_tiny << " (in [0.35, 0.65])";
    for (double sigma : {0.3, 1.0, 3.0, 6.0}) {
        const double acc = mean_of(sim.retrieval.at(sigma));
        plateau_ok = plateau_ok && acc >= 0.85;
        detail << ", " << sigma << " -> " << acc;
    }
    detail << " (each >= 0.85), 10 -> " << at_huge << " (<= 0.65), elapsed "
           << sim.elapsed_total << "s (<= 900)";
    const bool pass = at_tiny >= 0.35 && at_tiny <= 0.65 && plateau_ok && at_huge <= 0.65 &&
                      sim.elapsed_total <= 900.0;
    report_line(2, pass, detail.str());
    CHECK(at_tiny >= 0.35);
    CHECK(at_tiny <= 0.65);
    CHECK(plateau_ok);
    CHECK(at_huge <= 0.65);
    CHECK(sim.elapsed_total <= 900.0);
}

TEST_CASE("criterion 3: grouping matches hidden task labels at moderate noise") {
    const SimResults& sim = sim_results();
    bool pass = true;
    std::ostringstream detail;
    detail << "ari:";
    for (double sigma : {1.0, 3.0, 6.0}) {
        const double ari = mean_of(sim.ari.at(sigma));
        pass = pass && ari >= 0.85;
        detail << " sigma " << sigma << " -> " << ari;
    }
    detail << " (each >= 0.85)";
    report_line(3, pass, detail.str());
    for (double sigma : {1.0, 3.0, 6.0}) CHECK(mean_of(sim.ari.at(sigma)) >= 0.85);
}

TEST_CASE("criterion 4: in- vs out-of-distribution uncertainties separate statistically") {
    const SimResults& sim = sim_results();
    double worst_t = 0.0, worst_u = 0.0;
    bool pass = true;
    for (const UncertaintySplit& split : sim.sigma3_uncertainty) {
        for (const auto& [task, samples] : split) {
            const auto& [in_dist, out_dist] = samples;
            if (in_dist.size() < 2 || out_dist.size() < 2) {
                pass = false;
                continue;
            }
            const double p_t = t_test(in_dist, out_dist).p_value;
            const double p_u = mann_whitney_u(in_dist, out_dist).p_value;
            worst_t = std::max(worst_t, p_t);
            worst_u = std::max(worst_u, p_u);
            pass = pass && p_t < 0.001 && p_u < 0.001;
            // the separation direction: matched group is less uncertain
            pass = pass && mean_of(in_dist) < mean_of(out_dist);
        }
    }
    std::ostringstream detail;
    detail << "worst t-test p " << worst_t << ", worst rank-test p " << worst_u
           << " over 50 batches per task per repetition (< 0.001)";
    report_line(4, pass, detail.str());
    CHECK(pass);
}

TEST_CASE("criterion 5: drift rate increases with the noise level") {
    const SimResults& sim = sim_results();
    std::vector<double> sigmas, rates;
    for (double sigma : {0.3, 1.0, 3.0, 6.0})
        for (double rate : sim.drift.at(sigma)) {
            sigmas.push_back(sigma);
            rates.push_back(rate);
        }
    const double rho = spearman(sigmas, rates);
    std::ostringstream detail;
    detail << "spearman(drift rate, sigma) = " << rho << " over 4 noise levels x " << kReps
           << " reps (>= 0.9)";
    report_line(5, rho >= 0.9, detail.str());
    CHECK(rho >= 0.9);
}

TEST_CASE("criterion 6: class-incremental ordering on the blob stream") {
    const BlobResults& blobs = blob_results();
    const auto& driftnet = blobs.final_acc.at("driftnet");
    const auto& stable = blobs.final_acc.at("stable");
    const auto& joint = blobs.final_acc.at("joint");
    const auto& limits = blobs.final_acc.at("theoretical-limits");
    const double gap_stable = mean_of(driftnet) - mean_of(stable);
    const double gap_limits = mean_of(limits) - mean_of(driftnet);
    int ordering_hits = 0;
    for (int rep = 0; rep < kReps; ++rep) {
        const std::size_t r = static_cast<std::size_t>(rep);
        if (limits[r] >= joint[r] && joint[r] >= driftnet[r] - 0.10) ++ordering_hits;
    }
    const bool pass = gap_stable >= 0.20 && gap_limits <= 0.10 && ordering_hits >= 8 &&
                      blobs.elapsed <= 1200.0;
    std::ostringstream detail;
    detail << "driftnet " << mean_of(driftnet) << ", stable " << mean_of(stable) << " (gap "
           << gap_stable << " >= 0.20), limits " << mean_of(limits) << " (gap " << gap_limits
           << " <= 0.10), ordering " << ordering_hits << "/10 (>= 8), elapsed " << blobs.elapsed
           << "s (<= 1200)";
    report_line(6, pass, detail.str());
    CHECK(gap_stable >= 0.20);
    CHECK(gap_limits <= 0.10);
    CHECK(ordering_hits >= 8);
    CHECK(blobs.elapsed <= 1200.0);
}

TEST_CASE("criterion 7: oracle equivalences") {
    const CheckResult dbscan_check = check_dbscan_oracle(200, 40, 20240817);
    const CheckResult ari_check = check_ari_oracle(500, 811);
    const CheckResult grad_check = check_gradient_finite_difference(20, 4242);
    const CheckResult reservoir_check = check_reservoir_uniformity(20000, 1000, 10, 902);
    const bool pass =
        dbscan_check.pass && ari_check.pass && grad_check.pass && reservoir_check.pass;
    std::ostringstream detail;
    detail << "dbscan[" << (dbscan_check.pass ? "ok" : dbscan_check.detail) << "] ari["
           << (ari_check.pass ? "ok" : ari_check.detail) << "] gradient["
           << (grad_check.pass ? "ok" : grad_check.detail) << "] reservoir["
           << (reservoir_check.pass ? "ok" : reservoir_check.detail) << "]";
    report_line(7, pass, detail.str());
    CHECK(dbscan_check.pass);
    CHECK(ari_check.pass);
    CHECK(grad_check.pass);
    CHECK(reservoir_check.pass);
}

TEST_CASE("criterion 8: statistical tests agree with the permutation oracle") {
    const CheckResult r = check_stat_tests_vs_permutation(50, 77);
    report_line(8, r.pass, r.detail);
    CHECK(r.pass);
}
