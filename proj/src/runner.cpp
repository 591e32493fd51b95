#include "driftnet/runner.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "driftnet/errors.hpp"

namespace driftnet {

namespace {

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

std::string format_sigma(double sigma) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", sigma);
    return buf;
}

int resolve_workers(int configured, std::size_t jobs) {
    int workers = configured;
    if (workers <= 0) {
        if (const char* env = std::getenv("DRIFTNET_WORKERS")) workers = std::atoi(env);
    }
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers),
                                                  std::max<std::size_t>(jobs, 1)));
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
    const int n_threads = resolve_workers(workers, count);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count || failed.load()) break;
                try {
                    job(i);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!failed.exchange(true)) first_error = e.what();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) throw std::runtime_error("parallel job failed: " + first_error);
}

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("write_metrics_csv: cannot open " + file.string());
    out << "strategy,repetition,sigma,tasks_seen,task_id,metric,value\n";
    for (const MetricRow& r : rows)
        out << r.strategy << ',' << r.repetition << ',' << format_value(r.sigma) << ','
            << r.tasks_seen << ',' << r.task_id << ',' << r.metric << ','
            << format_value(r.value) << '\n';
}

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("read_metrics_csv: cannot open " + file.string());
    std::string header;
    if (!std::getline(in, header)) throw ReportError("metrics csv is empty");
    const std::string expected = "strategy,repetition,sigma,tasks_seen,task_id,metric,value";
    {
        std::stringstream hs(header);
        std::stringstream es(expected);
        std::string hcol, ecol;
        while (std::getline(es, ecol, ',')) {
            if (!std::getline(hs, hcol, ',') || hcol != ecol)
                throw ReportError("metrics csv missing column '" + ecol + "'");
        }
    }
    std::vector<MetricRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        MetricRow r;
        std::string field;
        std::getline(ss, r.strategy, ',');
        std::getline(ss, field, ',');
        r.repetition = std::stoi(field);
        std::getline(ss, field, ',');
        r.sigma = std::stod(field);
        std::getline(ss, field, ',');
        r.tasks_seen = std::stoi(field);
        std::getline(ss, field, ',');
        r.task_id = std::stoi(field);
        std::getline(ss, r.metric, ',');
        std::getline(ss, field, ',');
        r.value = std::stod(field);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_events_jsonl(const std::vector<RetrievalEvent>& events,
                        const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("write_events_jsonl: cannot open " + file.string());
    for (const RetrievalEvent& e : events) {
        nlohmann::json groups = nlohmann::json::array();
        for (std::size_t g = 0; g < e.group_labels.size(); ++g)
            groups.push_back({{"label", e.group_labels[g]},
                              {"uncertainty", e.uncertainties[g]},
                              {"member_tasks", e.group_member_tasks[g]}});
        const nlohmann::json record = {{"tasks_seen", e.tasks_seen},
                                       {"test_task", e.test_task},
                                       {"chosen_group", e.chosen_group},
                                       {"groups", groups}};
        out << record.dump() << '\n';
    }
}

void write_trace(const DriftTrace& trace, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("write_trace: cannot open " + file.string());
    out.precision(17);
    const std::size_t times = trace.snapshots.size();
    const std::size_t inputs = times ? trace.snapshots[0].rows() : 0;
    const std::size_t q = times ? trace.snapshots[0].cols() : 0;
    out << times << ' ' << inputs << ' ' << q << ' ' << trace.t0 << '\n';
    for (const Matrix& snap : trace.snapshots)
        for (std::size_t i = 0; i < snap.rows(); ++i) {
            for (std::size_t j = 0; j < q; ++j) {
                out << snap(i, j);
                out << (j + 1 < q ? ' ' : '\n');
            }
        }
}

DriftTrace read_trace(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("read_trace: cannot open " + file.string());
    std::size_t times = 0, inputs = 0, q = 0;
    DriftTrace trace;
    if (!(in >> times >> inputs >> q >> trace.t0)) throw IoError("read_trace: bad header");
    for (std::size_t t = 0; t < times; ++t) {
        Matrix snap(inputs, q);
        for (std::size_t i = 0; i < inputs; ++i)
            for (std::size_t j = 0; j < q; ++j)
                if (!(in >> snap(i, j))) throw IoError("read_trace: truncated");
        trace.snapshots.push_back(std::move(snap));
    }
    return trace;
}

void run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::filesystem::path out_dir(cfg.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "runs", ec);
    if (ec) throw IoError("run_experiment: cannot create " + (out_dir / "runs").string());
    {
        std::ofstream probe(out_dir / ".write_probe");
        if (!probe) throw IoError("run_experiment: output dir not writable: " + out_dir.string());
    }
    std::filesystem::remove(out_dir / ".write_probe");

    struct Job {
        StrategyKind kind;
        std::string strategy;
        double sigma;
        int repetition;
    };
    std::vector<Job> jobs;
    for (const std::string& s : cfg.strategies)
        for (double sigma : cfg.sigmas)
            for (int rep = 0; rep < cfg.repetitions; ++rep)
                jobs.push_back({strategy_from_string(s), s, sigma, rep});

    std::vector<StrategyRunResult> results(jobs.size());
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
        results[i] = run_strategy(jobs[i].kind, cfg, jobs[i].sigma, jobs[i].repetition);
    });

    // Deterministic merge in job order regardless of completion order.
    std::vector<MetricRow> rows;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        rows.insert(rows.end(), results[i].rows.begin(), results[i].rows.end());
        if (!results[i].driftnet) continue;
        const DriftNetArtifacts& art = *results[i].driftnet;
        const std::filesystem::path run_dir =
            out_dir / "runs" /
            (jobs[i].strategy + "-s" + format_sigma(jobs[i].sigma) + "-r" +
             std::to_string(jobs[i].repetition));
        std::filesystem::create_directories(run_dir);
        write_events_jsonl(art.events, run_dir / "events.jsonl");
        for (std::size_t t = 0; t < art.traces.size(); ++t)
            write_trace(art.traces[t], run_dir / ("trace_task" + std::to_string(t) + ".txt"));
        if (!art.final_pv.empty()) {
            std::ofstream pv(run_dir / "final_pv.csv");
            if (!pv) throw IoError("run_experiment: cannot write final_pv.csv");
            pv << "group,hidden_task";
            for (std::size_t j = 0; j < art.final_pv.cols(); ++j) pv << ",pv_" << j;
            pv << '\n';
            pv.precision(12);
            for (std::size_t r = 0; r < art.final_pv.rows(); ++r) {
                pv << art.final_groups[r] << ',' << art.final_hidden[r];
                for (std::size_t j = 0; j < art.final_pv.cols(); ++j)
                    pv << ',' << art.final_pv(r, j);
                pv << '\n';
            }
        }
    }
    write_metrics_csv(rows, out_dir / "metrics.csv");
}

}  // namespace driftnet
